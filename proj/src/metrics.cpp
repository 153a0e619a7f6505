#include "triagebench/metrics.hpp"

#include <algorithm>
#include <numeric>

namespace triagebench::metrics {

namespace {

void check_lengths(std::size_t a, std::size_t b) {
    if (a != b) {
        throw InputError("length mismatch: " + std::to_string(a) + " scores vs " + std::to_string(b) +
                         " labels");
    }
}

// Per-unique-score counts of positives and negatives, ascending by score.
struct ScoreGroups {
    std::vector<double> value;
    std::vector<std::size_t> pos, neg;
};

ScoreGroups group_scores(std::span<const double> scores, std::span<const int> labels) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    ScoreGroups g;
    for (std::size_t i : order) {
        if (g.value.empty() || g.value.back() != scores[i]) {
            g.value.push_back(scores[i]);
            g.pos.push_back(0);
            g.neg.push_back(0);
        }
        (labels[i] ? g.pos : g.neg).back() += 1;
    }
    return g;
}

}  // namespace

OperatingPoint make_operating_point(double threshold, const ConfusionCounts& c) {
    OperatingPoint op;
    op.threshold = threshold;
    op.counts = c;
    op.sensitivity = c.sensitivity();
    op.specificity = c.specificity();
    op.ppv = c.ppv();
    op.npv = c.npv();
    op.youden = op.sensitivity.value_or(0.0) + op.specificity.value_or(0.0) - 1.0;
    return op;
}

ConfusionCounts confusion_at_threshold(std::span<const double> scores, std::span<const int> labels,
                                       double threshold) {
    check_lengths(scores.size(), labels.size());
    if (scores.empty()) throw InputError("confusion_at_threshold: empty input");
    ConfusionCounts c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool call = scores[i] >= threshold;
        if (labels[i]) {
            (call ? c.tp : c.fn) += 1;
        } else {
            (call ? c.fp : c.tn) += 1;
        }
    }
    return c;
}

MaybeReal binary_auc(std::span<const double> scores, std::span<const int> labels) {
    check_lengths(scores.size(), labels.size());
    const auto g = group_scores(scores, labels);
    // U = sum over positives of (#negatives below + 0.5 * #negatives tied)
    double u = 0.0;
    double neg_below = 0.0;
    double n_pos = 0.0, n_neg = 0.0;
    for (std::size_t k = 0; k < g.value.size(); ++k) {
        u += static_cast<double>(g.pos[k]) * (neg_below + 0.5 * static_cast<double>(g.neg[k]));
        neg_below += static_cast<double>(g.neg[k]);
        n_pos += static_cast<double>(g.pos[k]);
        n_neg += static_cast<double>(g.neg[k]);
    }
    if (n_pos == 0.0 || n_neg == 0.0) return std::nullopt;
    return u / (n_pos * n_neg);
}

namespace {

MacroAuc macro_auc_core(std::span<const int> labels, const std::vector<std::vector<double>>& class_scores,
                        const std::vector<std::string>* names) {
    if (class_scores.size() < 2) throw InputError("macro-AUC requires at least two classes");
    MacroAuc out;
    double sum = 0.0;
    std::size_t defined = 0;
    std::vector<int> onehot(labels.size());
    for (std::size_t c = 0; c < class_scores.size(); ++c) {
        for (std::size_t i = 0; i < labels.size(); ++i) onehot[i] = labels[i] == static_cast<int>(c) ? 1 : 0;
        auto auc = binary_auc(class_scores[c], onehot);
        out.per_class.push_back(auc);
        if (auc) {
            sum += *auc;
            ++defined;
        } else {
            const std::string cls = names ? "'" + (*names)[c] + "'" : std::to_string(c);
            out.warnings.push_back("class " + cls + " has undefined one-vs-rest AUC; excluded");
        }
    }
    if (defined == 0) throw Inestimable("macro-AUC undefined for every class");
    out.value = sum / static_cast<double>(defined);
    return out;
}

}  // namespace

MacroAuc macro_auc_ovr(std::span<const int> labels, const std::vector<std::vector<double>>& class_scores) {
    return macro_auc_core(labels, class_scores, nullptr);
}

MacroAuc macro_auc_ovr(const cohort::Cohort& c) {
    std::vector<std::size_t> idx(c.size());
    std::iota(idx.begin(), idx.end(), 0);
    return macro_auc_ovr(c, idx);
}

MacroAuc macro_auc_ovr(const cohort::Cohort& c, std::span<const std::size_t> idx) {
    const std::size_t k = c.class_map.size();
    std::vector<int> labels;
    labels.reserve(idx.size());
    std::vector<std::vector<double>> scores(k);
    for (auto& s : scores) s.reserve(idx.size());
    for (std::size_t i : idx) {
        const auto& r = c.records[i];
        labels.push_back(static_cast<int>(r.true_label));
        for (std::size_t j = 0; j < k; ++j) scores[j].push_back(r.scores[j]);
    }
    return macro_auc_core(labels, scores, &c.class_map.names());
}

OperatingPoint youden_optimal(std::span<const double> scores, std::span<const int> labels) {
    check_lengths(scores.size(), labels.size());
    const auto g = group_scores(scores, labels);
    std::size_t n_pos = 0, n_neg = 0;
    for (std::size_t k = 0; k < g.value.size(); ++k) {
        n_pos += g.pos[k];
        n_neg += g.neg[k];
    }
    if (n_pos == 0 || n_neg == 0) throw Inestimable("Youden operating point needs both classes");

    // Walk candidates ascending: at u_k everything with score >= u_k is called.
    ConfusionCounts c{n_pos, n_neg, 0, 0};
    OperatingPoint best = make_operating_point(g.value[0], c);
    for (std::size_t k = 0; k < g.value.size(); ++k) {
        if (k > 0) {
            c.tp -= g.pos[k - 1];
            c.fn += g.pos[k - 1];
            c.fp -= g.neg[k - 1];
            c.tn += g.neg[k - 1];
            auto op = make_operating_point(g.value[k], c);
            if (op.youden > best.youden) best = op;
        }
    }
    // +inf sentinel: nothing called positive
    auto top = make_operating_point(kInf, ConfusionCounts{0, 0, n_neg, n_pos});
    if (top.youden > best.youden) best = top;
    return best;
}

double balanced_accuracy(std::span<const int> predicted, std::span<const int> truth) {
    check_lengths(predicted.size(), truth.size());
    if (truth.empty()) throw InputError("balanced_accuracy: empty input");
    std::vector<int> classes(truth.begin(), truth.end());
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    double sum = 0.0;
    for (int c : classes) {
        std::size_t n = 0, hit = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            if (truth[i] != c) continue;
            ++n;
            if (predicted[i] == c && predicted[i] != kTimeoutResponse) ++hit;
        }
        sum += static_cast<double>(hit) / static_cast<double>(n);
    }
    return sum / static_cast<double>(classes.size());
}

MaybeReal auprc(std::span<const double> scores, std::span<const int> labels) {
    check_lengths(scores.size(), labels.size());
    const auto g = group_scores(scores, labels);
    std::size_t n_pos = 0;
    for (auto p : g.pos) n_pos += p;
    if (n_pos == 0) return std::nullopt;
    double area = 0.0, prev_recall = 0.0;
    std::size_t tp = 0, called = 0;
    for (std::size_t k = g.value.size(); k-- > 0;) {
        tp += g.pos[k];
        called += g.pos[k] + g.neg[k];
        const double recall = static_cast<double>(tp) / static_cast<double>(n_pos);
        const double precision = static_cast<double>(tp) / static_cast<double>(called);
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    return area;
}

double brier(std::span<const double> probabilities, std::span<const int> labels) {
    check_lengths(probabilities.size(), labels.size());
    if (labels.empty()) throw InputError("brier: empty input");
    double s = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double d = probabilities[i] - (labels[i] ? 1.0 : 0.0);
        s += d * d;
    }
    return s / static_cast<double>(labels.size());
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
    check_lengths(scores.size(), labels.size());
    const auto g = group_scores(scores, labels);
    std::size_t n_pos = 0, n_neg = 0;
    for (std::size_t k = 0; k < g.value.size(); ++k) {
        n_pos += g.pos[k];
        n_neg += g.neg[k];
    }
    if (n_pos == 0 || n_neg == 0) throw Inestimable("ROC curve needs both classes");
    std::vector<RocPoint> out{{kInf, 0.0, 0.0}};
    std::size_t tp = 0, fp = 0;
    for (std::size_t k = g.value.size(); k-- > 0;) {
        tp += g.pos[k];
        fp += g.neg[k];
        out.push_back({g.value[k], double(fp) / double(n_neg), double(tp) / double(n_pos)});
    }
    return out;
}

std::vector<double> unique_sorted(std::span<const double> scores) {
    std::vector<double> u(scores.begin(), scores.end());
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    return u;
}

}  // namespace triagebench::metrics
