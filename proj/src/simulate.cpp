#include "triagebench/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "triagebench/metrics.hpp"

namespace triagebench::simulate {

// ============================================================================
// second review
// ============================================================================

SecondReviewOutcome SecondReviewOutcome::from_counts(double threshold, std::size_t total_fn, std::size_t rescued_fn,
                                                     std::size_t review_cases,
                                                     std::optional<std::size_t> doctor_negative_cases) {
    if (rescued_fn > total_fn) throw InputError("second review: rescued exceeds total false negatives");
    if (rescued_fn > review_cases) throw InputError("second review: rescued exceeds reviewed cases");
    if (doctor_negative_cases && review_cases > *doctor_negative_cases) {
        throw InputError("second review: more reviews than doctor-negative cases");
    }
    SecondReviewOutcome o;
    o.threshold = threshold;
    o.total_fn = total_fn;
    o.rescued_fn = rescued_fn;
    o.review_cases = review_cases;
    o.false_alarm_reviews = review_cases - rescued_fn;
    o.doctor_negative_cases = doctor_negative_cases;
    o.rescue_rate = safe_ratio(double(rescued_fn), double(total_fn));
    if (doctor_negative_cases) o.review_burden = safe_ratio(double(review_cases), double(*doctor_negative_cases));
    o.nnr = safe_ratio(double(review_cases), double(rescued_fn));
    return o;
}

SecondReviewOutcome second_review(std::span<const double> scores, std::span<const int> truth, double threshold) {
    if (scores.size() != truth.size()) throw InputError("second review: scores and truth differ in length");
    if (scores.empty()) throw InputError("second review: no cases");
    std::size_t fn = 0, rescued = 0, reviews = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool flag = scores[i] >= threshold;
        if (truth[i]) ++fn;
        if (flag) ++reviews;
        if (flag && truth[i]) ++rescued;
    }
    return SecondReviewOutcome::from_counts(threshold, fn, rescued, reviews, scores.size());
}

SecondReviewSweep select_second_review(std::vector<SecondReviewOutcome> rows, const policy::RescueBurden& p) {
    policy::validate(p);
    constexpr double eps = 1e-12;
    SecondReviewSweep out;
    out.rows = std::move(rows);
    auto nnr = [](const SecondReviewOutcome& o) { return o.nnr.value_or(kInf); };
    bool rescue_ok = false, burden_ok = false;
    for (std::size_t i = 0; i < out.rows.size(); ++i) {
        const auto& r = out.rows[i];
        const bool rescue = r.rescue_rate && *r.rescue_rate >= p.min_rescue_rate - eps;
        const bool burden = r.review_burden && *r.review_burden <= p.max_review_burden + eps;
        rescue_ok = rescue_ok || rescue;
        burden_ok = burden_ok || burden;
        if (!rescue || !burden) continue;
        if (!out.selected) {
            out.selected = i;
            continue;
        }
        const auto& b = out.rows[*out.selected];
        if (*r.rescue_rate != *b.rescue_rate) {
            if (*r.rescue_rate > *b.rescue_rate) out.selected = i;
        } else if (*r.review_burden != *b.review_burden) {
            if (*r.review_burden < *b.review_burden) out.selected = i;
        } else if (nnr(r) != nnr(b)) {
            if (nnr(r) < nnr(b)) out.selected = i;
        } else if (r.threshold > b.threshold) {
            out.selected = i;
        }
    }
    if (!out.selected) {
        if (!rescue_ok) {
            out.binding_constraint = "rescue_rate >= " + std::to_string(p.min_rescue_rate);
        } else if (!burden_ok) {
            out.binding_constraint = "review_burden <= " + std::to_string(p.max_review_burden);
        } else {
            out.binding_constraint = "rescue_rate >= " + std::to_string(p.min_rescue_rate) +
                                     " jointly with review_burden <= " + std::to_string(p.max_review_burden);
        }
    }
    return out;
}

SecondReviewSweep second_review_sweep(std::span<const double> scores, std::span<const int> truth,
                                      const policy::RescueBurden& p) {
    if (scores.size() != truth.size()) throw InputError("second review: scores and truth differ in length");
    if (scores.empty()) throw InputError("second review: no cases");
    const auto u = metrics::unique_sorted(scores);
    std::vector<SecondReviewOutcome> rows;
    rows.reserve(u.size() + 1);
    for (std::size_t k = 0; k <= u.size(); ++k) {
        const double t = k < u.size() ? u[k] : kInf;
        auto o = second_review(scores, truth, t);
        o.threshold = policy::reported_threshold(u, k);
        rows.push_back(o);
    }
    return select_second_review(std::move(rows), p);
}

// ============================================================================
// triage
// ============================================================================

namespace {

struct Bands {
    std::size_t out = 0, in = 0, out_tn = 0, in_tp = 0;
};

Bands count_bands(std::span<const double> scores, std::span<const int> labels, std::span<const std::size_t> idx,
                  std::optional<double> lo, std::optional<double> hi) {
    Bands b;
    for (std::size_t i : idx) {
        if (lo && scores[i] < *lo) {
            ++b.out;
            if (!labels[i]) ++b.out_tn;
        } else if (hi && scores[i] >= *hi) {
            ++b.in;
            if (labels[i]) ++b.in_tp;
        }
    }
    return b;
}

}  // namespace

TriageOutcome triage(std::span<const double> scores, std::span<const int> labels, std::optional<double> t_low,
                     std::optional<double> t_high, const resample::BootstrapOptions* ci) {
    if (scores.size() != labels.size()) throw InputError("triage: scores and labels differ in length");
    if (scores.empty()) throw InputError("triage: no cases");
    if (t_low && t_high && *t_low > *t_high) throw InputError("triage: T_low exceeds T_high");
    std::vector<std::size_t> all(scores.size());
    std::iota(all.begin(), all.end(), 0);
    const auto b = count_bands(scores, labels, all, t_low, t_high);

    TriageOutcome o;
    o.t_low = t_low;
    o.t_high = t_high;
    o.total_cases = scores.size();
    o.ruleout_cases = b.out;
    o.rulein_cases = b.in;
    o.gray_cases = o.total_cases - b.out - b.in;
    o.ruleout_true_negatives = b.out_tn;
    o.rulein_true_positives = b.in_tp;
    const double n = static_cast<double>(o.total_cases);
    o.ruleout_coverage = static_cast<double>(b.out) / n;
    o.rulein_coverage = static_cast<double>(b.in) / n;
    o.npv_at_ruleout = safe_ratio(double(b.out_tn), double(b.out));
    o.ppv_at_rulein = safe_ratio(double(b.in_tp), double(b.in));

    if (ci) {
        auto attach = [&](bool ruleout, std::optional<resample::BootstrapResult>& slot, const char* what) {
            resample::IndexStatistic stat = [&, ruleout](std::span<const std::size_t> idx) -> MaybeReal {
                const auto bb = count_bands(scores, labels, idx, t_low, t_high);
                return ruleout ? safe_ratio(double(bb.out_tn), double(bb.out))
                               : safe_ratio(double(bb.in_tp), double(bb.in));
            };
            try {
                slot = resample::bootstrap_ci(stat, scores.size(), *ci);
            } catch (const Inestimable& e) {
                o.warnings.push_back(std::string(what) + " CI not estimable: " + e.what());
            }
        };
        if (o.npv_at_ruleout) attach(true, o.npv_ci, "NPV");
        if (o.ppv_at_rulein) attach(false, o.ppv_ci, "PPV");
    }
    if (!o.npv_at_ruleout && t_low) o.warnings.push_back("rule-out band is empty; NPV undefined");
    if (!o.ppv_at_rulein && t_high) o.warnings.push_back("rule-in band is empty; PPV undefined");
    return o;
}

TriageOutcome ruleout_from_counts(std::size_t total_cases, std::size_t ruleout_cases, std::size_t ruleout_true_negatives) {
    if (total_cases == 0) throw InputError("triage: no cases");
    if (ruleout_cases > total_cases || ruleout_true_negatives > ruleout_cases) {
        throw InputError("triage: inconsistent rule-out counts");
    }
    TriageOutcome o;
    o.total_cases = total_cases;
    o.ruleout_cases = ruleout_cases;
    o.gray_cases = total_cases - ruleout_cases;
    o.ruleout_true_negatives = ruleout_true_negatives;
    o.ruleout_coverage = static_cast<double>(ruleout_cases) / static_cast<double>(total_cases);
    o.npv_at_ruleout = safe_ratio(double(ruleout_true_negatives), double(ruleout_cases));
    return o;
}

// ============================================================================
// prioritisation
// ============================================================================

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::clinical: return "clinical";
        case Strategy::model_only: return "model_only";
        case Strategy::clinical_plus_model: return "clinical_plus_model";
    }
    return "?";
}

Strategy parse_strategy(const std::string& s) {
    if (s == "clinical") return Strategy::clinical;
    if (s == "model_only") return Strategy::model_only;
    if (s == "clinical_plus_model") return Strategy::clinical_plus_model;
    throw InputError("unknown prioritisation strategy '" + s + "'");
}

PrioritizationOutcome prioritization_from_counts(Strategy s, double intended_rate, std::size_t n, std::size_t n_pos,
                                                 std::size_t selected, std::size_t true_positives,
                                                 std::optional<double> threshold) {
    if (n == 0) throw InputError("prioritisation: no cases");
    if (n_pos > n || selected > n || true_positives > selected || true_positives > n_pos) {
        throw InputError("prioritisation: inconsistent counts");
    }
    PrioritizationOutcome o;
    o.strategy = s;
    o.intended_rate = intended_rate;
    o.n = n;
    o.n_pos = n_pos;
    o.selected = selected;
    o.true_positives = true_positives;
    o.threshold = threshold;
    o.actual_rate = static_cast<double>(selected) / static_cast<double>(n);
    o.prevalence = static_cast<double>(n_pos) / static_cast<double>(n);
    o.sensitivity = safe_ratio(double(true_positives), double(n_pos));
    o.ppv = safe_ratio(double(true_positives), double(selected));
    if (o.ppv && o.prevalence > 0.0) o.enrichment = *o.ppv / o.prevalence;
    if (o.ppv && *o.ppv > 0.0) o.tests_per_mutation = 1.0 / *o.ppv;
    return o;
}

namespace {

std::size_t selection_size(double rate, std::size_t n) {
    if (!(rate >= 0.0 && rate <= 1.0)) throw InputError("prioritisation: rate must lie in [0,1]");
    const double k = std::ceil(rate * static_cast<double>(n) - 1e-9);
    return std::min(n, static_cast<std::size_t>(std::max(0.0, k)));
}

std::vector<RankedCase> ranked(std::vector<RankedCase> cases) {
    std::sort(cases.begin(), cases.end(), [](const RankedCase& a, const RankedCase& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.case_id < b.case_id;
    });
    return cases;
}

}  // namespace

std::vector<PrioritizationOutcome> prioritize_internal(Strategy s, const std::vector<RankedCase>& cases,
                                                       const std::vector<double>& rates) {
    if (rates.empty()) throw InputError("prioritisation: empty rate list");
    if (cases.empty()) throw InputError("prioritisation: no cases");
    const auto order = ranked(cases);
    std::size_t n_pos = 0;
    for (const auto& c : order) n_pos += c.truth ? 1 : 0;

    std::vector<PrioritizationOutcome> out;
    for (double r : rates) {
        const std::size_t k = selection_size(r, order.size());
        std::size_t selected = 0, tp = 0;
        std::optional<double> boundary;
        if (k > 0) {
            boundary = order[k - 1].score;
            while (selected < order.size() && order[selected].score >= *boundary) {
                tp += order[selected].truth ? 1 : 0;
                ++selected;
            }
        }
        auto o = prioritization_from_counts(s, r, order.size(), n_pos, selected, tp, boundary);
        if (n_pos > 0 && selected == 0) o.sensitivity = 0.0;
        out.push_back(o);
    }
    return out;
}

double transfer_threshold(std::span<const double> internal_scores, double intended_rate) {
    if (internal_scores.empty()) throw InputError("transfer threshold: no internal cases");
    if (!(intended_rate > 0.0 && intended_rate < 1.0)) throw InputError("transfer threshold: rate must lie in (0,1)");
    std::vector<double> s(internal_scores.begin(), internal_scores.end());
    std::sort(s.begin(), s.end(), std::greater<>());
    if (s.front() == s.back()) throw InputError("transfer threshold: all internal scores are equal");
    const std::size_t k = std::max<std::size_t>(1, selection_size(intended_rate, s.size()));
    return s[k - 1];
}

PrioritizationOutcome prioritize_external(Strategy s, const std::vector<RankedCase>& external, double threshold,
                                          double intended_rate) {
    if (external.empty()) throw InputError("prioritisation: no external cases");
    std::size_t n_pos = 0, selected = 0, tp = 0;
    for (const auto& c : external) {
        n_pos += c.truth ? 1 : 0;
        if (c.score >= threshold) {
            ++selected;
            tp += c.truth ? 1 : 0;
        }
    }
    auto o = prioritization_from_counts(s, intended_rate, external.size(), n_pos, selected, tp, threshold);
    return o;
}

// ============================================================================
// deferral
// ============================================================================

DeferralOutcome deferral_analysis(std::span<const double> scores, std::span<const int> labels,
                                  std::span<const int> deferred, double t_low) {
    if (scores.size() != labels.size() || scores.size() != deferred.size()) {
        throw InputError("deferral: input lengths differ");
    }
    DeferralOutcome o;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!deferred[i]) {
            ++o.non_deferred;
        } else if (scores[i] < t_low) {
            (labels[i] ? o.unsafe_rescues : o.safe_rescues) += 1;
        } else {
            ++o.still_deferred;
        }
    }
    return o;
}

DeferralOutcome deferral_analysis(const cohort::Cohort& c, const policy::LockedThreshold& ruleout) {
    if (ruleout.band != policy::Semantics::ruleout) throw InputError("deferral: needs a rule-out threshold");
    if (ruleout.task != c.task) {
        throw InputError("deferral: threshold locked for task '" + ruleout.task + "' but cohort task is '" + c.task +
                         "'");
    }
    const auto scores = c.positive_scores();
    const auto labels = c.binary_labels();
    std::vector<int> deferred;
    deferred.reserve(c.size());
    for (const auto& r : c.records) deferred.push_back(r.has_tag(kDeferTag) ? 1 : 0);
    return deferral_analysis(scores, labels, deferred, ruleout.value);
}

}  // namespace triagebench::simulate
