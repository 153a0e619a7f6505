#include "triagebench/reader.hpp"

#include <algorithm>
#include <set>
#include <tuple>

namespace triagebench::reader {

using cohort::Experience;
using cohort::ReadingCondition;

std::vector<std::string> tasks_of(const std::vector<ReaderObservation>& reads) {
    std::set<std::string> t;
    for (const auto& r : reads) t.insert(r.task);
    return {t.begin(), t.end()};
}

std::string to_string(Outcome o) {
    switch (o) {
        case Outcome::accuracy: return "accuracy";
        case Outcome::time: return "time";
        case Outcome::confidence: return "confidence";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// descriptive

std::vector<ReaderSummary> summarize_readers(const std::vector<ReaderObservation>& reads) {
    if (reads.empty()) throw InputError("reader study: no reads");
    using Key = std::pair<std::string, ReadingCondition>;
    std::map<Key, std::vector<const ReaderObservation*>> groups;
    for (const auto& r : reads) groups[{r.reader_id, r.condition}].push_back(&r);

    std::vector<ReaderSummary> out;
    for (const auto& [key, rs] : groups) {
        ReaderSummary s;
        s.reader_id = key.first;
        s.condition = key.second;
        s.experience = rs.front()->experience;
        s.n_reads = rs.size();
        double correct = 0.0, time = 0.0, conf = 0.0;
        std::size_t n_conf = 0;
        bool all_truth = true;
        // (task, truth) -> (hits, n)
        std::map<std::pair<std::string, std::string>, std::pair<std::size_t, std::size_t>> cells;
        for (const auto* r : rs) {
            if (r->timed_out) ++s.n_timeouts;
            if (r->correct) correct += 1.0;
            time += r->time_s;
            if (r->confidence) {
                conf += *r->confidence;
                ++n_conf;
            }
            if (!r->truth) {
                all_truth = false;
                continue;
            }
            auto& cell = cells[{r->task, *r->truth}];
            cell.second += 1;
            if (r->correct) cell.first += 1;
        }
        const double n = static_cast<double>(rs.size());
        s.accuracy = correct / n;
        s.mean_time_s = time / n;
        if (n_conf > 0) s.mean_confidence = conf / static_cast<double>(n_conf);
        if (all_truth && !cells.empty()) {
            double sum = 0.0;
            for (const auto& [k, hn] : cells) sum += static_cast<double>(hn.first) / static_cast<double>(hn.second);
            s.balanced_accuracy = sum / static_cast<double>(cells.size());
        }
        out.push_back(s);
    }
    return out;
}

// ---------------------------------------------------------------------------
// GEE models

namespace {

using ReadKey = std::tuple<std::string, std::string, std::string>;  // reader, case, task

ReadKey key_of(const ReaderObservation& r) { return {r.reader_id, r.case_id, r.task}; }

std::vector<const ReaderObservation*> rows_for(const std::vector<ReaderObservation>& reads, Outcome outcome) {
    std::set<ReadKey> dropped;
    if (outcome == Outcome::confidence) {
        for (const auto& r : reads) {
            if (r.timed_out) dropped.insert(key_of(r));
        }
    }
    std::vector<const ReaderObservation*> rows;
    for (const auto& r : reads) {
        if (!dropped.count(key_of(r))) rows.push_back(&r);
    }
    if (rows.empty()) throw InputError("reader GEE: no usable reads for " + to_string(outcome));
    return rows;
}

regression::GeeFit fit_outcome(const std::vector<const ReaderObservation*>& rows, Outcome outcome,
                               bool sequence_term) {
    std::vector<std::string> tasks;
    {
        std::set<std::string> t;
        for (const auto* r : rows) t.insert(r->task);
        tasks.assign(t.begin(), t.end());
    }
    std::vector<std::string> names;
    std::vector<std::vector<double>> cols;
    auto add = [&](const std::string& name, auto fn) {
        names.push_back(name);
        std::vector<double> c;
        c.reserve(rows.size());
        for (const auto* r : rows) c.push_back(fn(*r));
        cols.push_back(std::move(c));
    };
    if (sequence_term) add("with_ai_first", [](const ReaderObservation& r) { return r.with_ai_first ? 1.0 : 0.0; });
    add("with_ai", [](const ReaderObservation& r) { return r.condition == ReadingCondition::with_ai ? 1.0 : 0.0; });
    if (!sequence_term) add("period_2", [](const ReaderObservation& r) { return r.period == 2 ? 1.0 : 0.0; });
    for (std::size_t t = 1; t < tasks.size(); ++t) {
        const std::string task = tasks[t];
        add("task_" + task, [task](const ReaderObservation& r) { return r.task == task ? 1.0 : 0.0; });
    }
    add("senior", [](const ReaderObservation& r) { return r.experience == Experience::senior ? 1.0 : 0.0; });

    if (sequence_term) {
        const auto& c = cols.front();
        if (std::all_of(c.begin(), c.end(), [&](double v) { return v == c.front(); })) {
            throw Inestimable("sequence effect: every read shares one reading order");
        }
    }

    const auto design = regression::with_intercept(names, cols);
    std::vector<double> y;
    std::vector<std::string> clusters;
    for (const auto* r : rows) {
        clusters.push_back(r->reader_id);
        switch (outcome) {
            case Outcome::accuracy: y.push_back(r->correct ? 1.0 : 0.0); break;
            case Outcome::time: y.push_back(r->time_s); break;
            case Outcome::confidence: y.push_back(static_cast<double>(r->confidence.value_or(0))); break;
        }
    }
    regression::GeeOptions opts;
    switch (outcome) {
        case Outcome::accuracy:
            opts.link = regression::Link::logit;
            opts.variance = regression::VarianceFunction::binomial;
            break;
        case Outcome::time:
            opts.link = regression::Link::log;
            opts.variance = regression::VarianceFunction::constant;
            break;
        case Outcome::confidence:
            opts.link = regression::Link::identity;
            opts.variance = regression::VarianceFunction::constant;
            break;
    }
    return regression::gee_fit(y, design, clusters, opts);
}

}  // namespace

regression::GeeFit outcome_gee(const std::vector<ReaderObservation>& reads, Outcome outcome) {
    return fit_outcome(rows_for(reads, outcome), outcome, false);
}

regression::GeeFit sequence_effect(const std::vector<ReaderObservation>& reads, Outcome outcome) {
    return fit_outcome(rows_for(reads, outcome), outcome, true);
}

// ---------------------------------------------------------------------------
// agreement

RatingMatrix rating_matrix(const std::vector<ReaderObservation>& reads, const std::string& task,
                           ReadingCondition condition, const std::vector<std::string>& categories) {
    std::map<std::string, std::size_t> cat_index;
    for (std::size_t i = 0; i < categories.size(); ++i) cat_index[categories[i]] = i;
    std::map<std::string, std::vector<int>> rows;
    for (const auto& r : reads) {
        if (r.task != task || r.condition != condition) continue;
        auto it = cat_index.find(r.response);
        if (it == cat_index.end()) throw InputError("rating matrix: response '" + r.response + "' not in category list");
        auto& row = rows[r.case_id];
        if (row.empty()) row.assign(categories.size(), 0);
        row[it->second] += 1;
    }
    RatingMatrix m;
    m.categories = categories;
    for (auto& [id, row] : rows) {
        m.case_ids.push_back(id);
        m.counts.push_back(std::move(row));
    }
    return m;
}

AgreementResult agreement_by_task(const std::vector<ReaderObservation>& reads, const std::string& task,
                                  const resample::BootstrapOptions& opts) {
    std::set<std::string> cats;
    for (const auto& r : reads) {
        if (r.task == task) cats.insert(r.response);
    }
    if (cats.empty()) throw InputError("agreement: no reads for task '" + task + "'");
    const std::vector<std::string> categories(cats.begin(), cats.end());
    auto a = rating_matrix(reads, task, ReadingCondition::without_ai, categories);
    auto b = rating_matrix(reads, task, ReadingCondition::with_ai, categories);

    // Restrict both matrices to the cases read under both conditions.
    std::set<std::string> in_b(b.case_ids.begin(), b.case_ids.end());
    inference::CountMatrix ca, cb;
    std::map<std::string, std::size_t> b_row;
    for (std::size_t i = 0; i < b.case_ids.size(); ++i) b_row[b.case_ids[i]] = i;
    for (std::size_t i = 0; i < a.case_ids.size(); ++i) {
        auto it = b_row.find(a.case_ids[i]);
        if (it == b_row.end()) continue;
        ca.push_back(a.counts[i]);
        cb.push_back(b.counts[it->second]);
    }
    if (ca.empty()) throw InputError("agreement: task '" + task + "' has no case read in both conditions");
    AgreementResult out;
    out.task = task;
    out.n_cases = ca.size();
    out.difference = resample::bootstrap_kappa_difference(ca, cb, opts);
    return out;
}

// ---------------------------------------------------------------------------
// decision trajectories

Trajectory decision_trajectory(const std::vector<ReaderObservation>& reads, const std::optional<std::string>& task) {
    std::map<ReadKey, std::pair<const ReaderObservation*, const ReaderObservation*>> pairs;
    for (const auto& r : reads) {
        if (task && r.task != *task) continue;
        auto& slot = pairs[key_of(r)];
        (r.condition == ReadingCondition::without_ai ? slot.first : slot.second) = &r;
    }
    if (pairs.empty()) throw InputError("decision trajectory: no reads");
    Trajectory t;
    for (const auto& [key, pr] : pairs) {
        if (!pr.first || !pr.second) {
            throw InputError("decision trajectory: reader '" + std::get<0>(key) + "' case '" + std::get<1>(key) +
                             "' is missing its " + (pr.first ? "with_ai" : "without_ai") + " read");
        }
        const bool before = pr.first->correct;
        const bool after = pr.second->correct;
        ++t.n_pairs;
        if (before && after) ++t.correct_to_correct;
        if (!before && after) ++t.error_to_correct;
        if (before && !after) ++t.correct_to_error;
        if (!before && !after) ++t.error_to_error;
        if (!before) {
            const auto& r = *pr.first;
            const std::string subtype = r.truth ? *r.truth + " as " + r.response : "called " + r.response;
            auto& s = t.subtypes[subtype];
            ++s.initial_errors;
            if (after) ++s.corrected;
        }
    }
    const double n = static_cast<double>(t.n_pairs);
    t.pct_correct_to_correct = 100.0 * static_cast<double>(t.correct_to_correct) / n;
    t.pct_error_to_correct = 100.0 * static_cast<double>(t.error_to_correct) / n;
    t.pct_correct_to_error = 100.0 * static_cast<double>(t.correct_to_error) / n;
    t.pct_error_to_error = 100.0 * static_cast<double>(t.error_to_error) / n;
    t.initial_error_burden = 100.0 * static_cast<double>(t.error_to_correct + t.error_to_error) / n;
    return t;
}

}  // namespace triagebench::reader
