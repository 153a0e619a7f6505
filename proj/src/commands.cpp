#include "triagebench/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "triagebench/cohort.hpp"
#include "triagebench/csv.hpp"
#include "triagebench/inference.hpp"
#include "triagebench/metrics.hpp"
#include "triagebench/policy.hpp"
#include "triagebench/reader.hpp"
#include "triagebench/regression.hpp"
#include "triagebench/report.hpp"
#include "triagebench/resample.hpp"
#include "triagebench/simulate.hpp"
#include "triagebench/survival.hpp"

namespace triagebench::commands {

using nlohmann::json;
using report::number;

namespace {

// ---------------------------------------------------------------------------
// shared plumbing

// Collects results and per-analysis failures for one command.
struct Builder {
    json results = json::object();
    json failures = json::array();
    std::vector<std::pair<std::string, std::string>> extracts;

    // Runs one analysis; a thrown error is recorded instead of propagated.
    void attempt(const std::string& analysis, const std::function<void()>& fn) {
        try {
            fn();
        } catch (const std::exception& e) {
            failures.push_back(json{{"analysis", analysis}, {"error", e.what()}});
        }
    }
};

const std::string& single_input(const RunConfig& cfg) {
    if (cfg.inputs.size() != 1) throw InputError(cfg.command + ": expected exactly one --input");
    return cfg.inputs.front();
}

cohort::Cohort load_cohort(const RunConfig& cfg) {
    if (cfg.schema.empty()) throw InputError(cfg.command + ": --schema is required");
    return cohort::load_cohort(single_input(cfg), cohort::load_schema(cfg.schema));
}

void require_binary(const cohort::Cohort& c, const std::string& what) {
    if (c.class_map.size() != 2) throw InputError(what + " needs a binary task; cohort has " +
                                                  std::to_string(c.class_map.size()) + " classes");
}

resample::BootstrapOptions boot(const RunConfig& cfg, const cohort::Cohort* strata_from = nullptr) {
    resample::BootstrapOptions o;
    o.n_resamples = cfg.resamples;
    o.seed = cfg.seed;
    o.level = cfg.level;
    o.threads = cfg.threads;
    if (cfg.stratify && strata_from) {
        for (const auto& r : strata_from->records) o.strata.push_back(static_cast<int>(r.true_label));
    }
    return o;
}

std::string to_csv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
    std::ostringstream os;
    csv::write_row(os, header);
    for (const auto& r : rows) csv::write_row(os, r);
    return os.str();
}

std::string num(double v) { return csv::format_double(v); }
std::string num(MaybeReal v) { return v ? csv::format_double(*v) : std::string("NaN"); }

json maybe_display(MaybeReal v, int digits) {
    return v ? json(report::fixed(*v, digits)) : json("NaN");
}

// ---------------------------------------------------------------------------
// metrics

void cmd_metrics(const RunConfig& cfg, Builder& b) {
    const auto c = load_cohort(cfg);
    json dist = json::object();
    for (const auto& [k, v] : cohort::class_distribution(c)) dist[k] = v;
    b.results["cohort"] = c.name;
    b.results["n"] = c.size();
    b.results["class_distribution"] = dist;

    b.attempt("macro_auc", [&] {
        const auto m = metrics::macro_auc_ovr(c);
        json per = json::object();
        for (std::size_t k = 0; k < m.per_class.size(); ++k) per[c.class_map.name(k)] = number(m.per_class[k]);
        json j{{"value", m.value}, {"per_class", per}, {"warnings", m.warnings}};
        const auto opts = boot(cfg, &c);
        resample::IndexStatistic stat = [&c](std::span<const std::size_t> idx) -> MaybeReal {
            try {
                return metrics::macro_auc_ovr(c, idx).value;
            } catch (const Inestimable&) {
                return std::nullopt;
            }
        };
        const auto ci = resample::bootstrap_ci(stat, c.size(), opts);
        j["ci"] = report::bootstrap(ci);
        j["display"] = report::format_ci(m.value, ci.lo, ci.hi);
        b.results["macro_auc"] = j;
    });

    if (c.class_map.size() == 2) {
        const auto s = c.positive_scores();
        const auto y = c.binary_labels();
        b.attempt("youden", [&] { b.results["youden"] = report::operating_point(metrics::youden_optimal(s, y)); });
        b.results["auprc"] = number(metrics::auprc(s, y));
        b.results["brier"] = metrics::brier(s, y);
    }
}

// ---------------------------------------------------------------------------
// threshold selection / application

json sweep_row_json(const policy::SweepRow& r) {
    MaybeReal nnr;
    if (r.counts.tp > 0) nnr = double(r.counts.tp + r.counts.fp) / double(r.counts.tp);
    return json{{"threshold", number(r.reported_threshold)},
                {"candidate_threshold", number(r.threshold)},
                {"counts", report::counts(r.counts)},
                {"sensitivity", number(r.sensitivity)},
                {"specificity", number(r.specificity)},
                {"ppv", number(r.ppv)},
                {"npv", number(r.npv)},
                {"ruleout_coverage", r.ruleout_coverage},
                {"rulein_coverage", r.rulein_coverage},
                {"number_needed_to_review", number(nnr)}};
}

void cmd_threshold_select(const RunConfig& cfg, Builder& b) {
    const auto c = load_cohort(cfg);
    require_binary(c, "threshold-select");
    if (cfg.policy.empty()) throw InputError("threshold-select: --policy is required");
    if (c.task.empty()) throw InputError("threshold-select: the schema must name a task");
    const auto pol = policy::parse_policy_json(cohort::read_text(cfg.policy));
    const auto band = policy::band_of(pol);
    const auto sw = policy::sweep(c.positive_scores(), c.binary_labels(), band);
    const auto sel = policy::select_threshold(sw, pol);

    b.results["task"] = c.task;
    b.results["band"] = policy::to_string(band);
    b.results["policy"] = json::parse(policy::policy_to_json(pol));
    b.results["source_cohort"] = c.name;
    b.results["feasible"] = sel.feasible;
    if (sel.feasible) {
        b.results["selection"] = sweep_row_json(*sel.row);
        auto reg = policy::Registry::load(cfg.registry);
        policy::LockedThreshold lt{c.task, band, sel.row->reported_threshold, pol, c.name, policy::utc_timestamp_now()};
        reg.append(lt, cfg.relock);
        reg.save(cfg.registry);
        b.results["locked"] = true;
    } else {
        b.results["status"] = "INFEASIBLE";
        b.results["binding_constraint"] = sel.binding_constraint;
        b.results["locked"] = false;
    }

    std::vector<std::vector<std::string>> rows;
    for (const auto& r : sw.rows) {
        rows.push_back({num(r.reported_threshold), num(r.threshold), std::to_string(r.counts.tp),
                        std::to_string(r.counts.fp), std::to_string(r.counts.tn), std::to_string(r.counts.fn),
                        num(r.sensitivity), num(r.specificity), num(r.ppv), num(r.npv), num(r.ruleout_coverage),
                        num(r.rulein_coverage)});
    }
    b.extracts.emplace_back("sweep.csv", to_csv({"threshold", "candidate_threshold", "tp", "fp", "tn", "fn",
                                                 "sensitivity", "specificity", "ppv", "npv", "ruleout_coverage",
                                                 "rulein_coverage"},
                                                rows));
}

json triage_json(const simulate::TriageOutcome& o) {
    json j{{"total_cases", o.total_cases},
           {"ruleout_cases", o.ruleout_cases},
           {"rulein_cases", o.rulein_cases},
           {"gray_cases", o.gray_cases},
           {"ruleout_true_negatives", o.ruleout_true_negatives},
           {"rulein_true_positives", o.rulein_true_positives},
           {"ruleout_coverage", o.ruleout_coverage},
           {"rulein_coverage", o.rulein_coverage},
           {"ruleout_coverage_display", report::percent(o.ruleout_coverage)},
           {"rulein_coverage_display", report::percent(o.rulein_coverage)},
           {"npv_at_ruleout", number(o.npv_at_ruleout)},
           {"ppv_at_rulein", number(o.ppv_at_rulein)},
           {"npv_display", maybe_display(o.npv_at_ruleout, 3)},
           {"ppv_display", maybe_display(o.ppv_at_rulein, 3)},
           {"t_low", o.t_low ? json(*o.t_low) : json(nullptr)},
           {"t_high", o.t_high ? json(*o.t_high) : json(nullptr)},
           {"warnings", o.warnings}};
    if (o.npv_ci) j["npv_ci"] = report::bootstrap(*o.npv_ci);
    if (o.ppv_ci) j["ppv_ci"] = report::bootstrap(*o.ppv_ci);
    return j;
}

json locked_json(const policy::LockedThreshold& t) {
    // locked_at stays in the registry only, keeping reports reproducible
    return json{{"task", t.task},
                {"band", policy::to_string(t.band)},
                {"value", t.value},
                {"policy", json::parse(policy::policy_to_json(t.policy))},
                {"source_cohort", t.source_cohort}};
}

void cmd_threshold_apply(const RunConfig& cfg, Builder& b) {
    const auto c = load_cohort(cfg);
    require_binary(c, "threshold-apply");
    if (!std::filesystem::exists(cfg.registry)) {
        throw InputError("threshold-apply: registry '" + cfg.registry + "' not found");
    }
    const auto reg = policy::Registry::load(cfg.registry);
    const auto low = reg.latest(c.task, policy::Semantics::ruleout);
    const auto high = reg.latest(c.task, policy::Semantics::rulein);
    if (!low && !high) throw InputError("threshold-apply: no locked threshold registered for task '" + c.task + "'");
    const auto assignments = policy::apply_locked(low, high, c);
    const auto s = c.positive_scores();
    const auto y = c.binary_labels();
    const auto opts = boot(cfg);
    const auto outcome = simulate::triage(s, y, low ? std::optional(low->value) : std::nullopt,
                                          high ? std::optional(high->value) : std::nullopt, &opts);
    b.results["cohort"] = c.name;
    b.results["task"] = c.task;
    b.results["t_low"] = low ? locked_json(*low) : json(nullptr);
    b.results["t_high"] = high ? locked_json(*high) : json(nullptr);
    b.results["outcome"] = triage_json(outcome);

    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        rows.push_back({assignments[i].case_id, num(assignments[i].score), policy::to_string(assignments[i].assignment),
                        std::to_string(y[i])});
    }
    b.extracts.emplace_back("assignments.csv", to_csv({"case_id", "score", "assignment", "label"}, rows));
}

// ---------------------------------------------------------------------------
// simulations

json second_review_json(const simulate::SecondReviewOutcome& o) {
    return json{{"threshold", number(o.threshold)},
                {"total_fn", o.total_fn},
                {"rescued_fn", o.rescued_fn},
                {"review_cases", o.review_cases},
                {"false_alarm_reviews", o.false_alarm_reviews},
                {"doctor_negative_cases", o.doctor_negative_cases ? json(*o.doctor_negative_cases) : json(nullptr)},
                {"rescue_rate", number(o.rescue_rate)},
                {"review_burden", number(o.review_burden)},
                {"number_needed_to_review", number(o.nnr)},
                {"rescue_rate_display", maybe_display(o.rescue_rate, 2)},
                {"review_burden_display", maybe_display(o.review_burden, 3)},
                {"nnr_display", maybe_display(o.nnr, 2)}};
}

json sweep_result_json(const simulate::SecondReviewSweep& sw) {
    json rows = json::array();
    for (const auto& r : sw.rows) rows.push_back(second_review_json(r));
    json j{{"rows", rows}, {"feasible", sw.selected.has_value()}};
    if (sw.selected) {
        j["selected"] = second_review_json(sw.rows[*sw.selected]);
    } else {
        j["status"] = "INFEASIBLE";
        j["binding_constraint"] = sw.binding_constraint;
    }
    return j;
}

std::optional<policy::RescueBurden> rescue_policy(const RunConfig& cfg) {
    if (cfg.policy.empty()) return std::nullopt;
    const auto p = policy::parse_policy_json(cohort::read_text(cfg.policy));
    const auto* rb = std::get_if<policy::RescueBurden>(&p);
    if (!rb) throw InputError("second-review: the policy must be of type rescue_burden");
    return *rb;
}

std::vector<simulate::SecondReviewOutcome> load_review_counts(const std::string& path) {
    const auto t = csv::read_file(path);
    const auto ct = t.require_column("threshold");
    const auto cf = t.require_column("total_fn");
    const auto cr = t.require_column("rescued_fn");
    const auto cv = t.require_column("review_cases");
    const auto cn = t.column("doctor_negative_cases");
    std::vector<simulate::SecondReviewOutcome> rows;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& r = t.rows[i];
        try {
            std::optional<std::size_t> neg;
            if (cn && !r[*cn].empty()) neg = std::stoul(r[*cn]);
            rows.push_back(simulate::SecondReviewOutcome::from_counts(std::stod(r[ct]), std::stoul(r[cf]),
                                                                      std::stoul(r[cr]), std::stoul(r[cv]), neg));
        } catch (const InputError& e) {
            throw InputError("line " + std::to_string(t.line_numbers[i]) + ": " + e.what());
        } catch (const std::exception&) {
            throw InputError("line " + std::to_string(t.line_numbers[i]) + ": malformed count");
        }
    }
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.threshold < b.threshold; });
    return rows;
}

void cmd_second_review(const RunConfig& cfg, Builder& b) {
    const auto pol = rescue_policy(cfg);
    if (!cfg.counts.empty()) {
        auto rows = load_review_counts(cfg.counts);
        if (pol) {
            b.results["counts_replay"] = sweep_result_json(simulate::select_second_review(std::move(rows), *pol));
        } else {
            json arr = json::array();
            for (const auto& r : rows) arr.push_back(second_review_json(r));
            b.results["counts_replay"] = json{{"rows", arr}};
        }
    }
    if (!cfg.inputs.empty()) {
        const auto c = load_cohort(cfg);
        require_binary(c, "second-review");
        const auto s = c.positive_scores();
        const auto y = c.binary_labels();
        if (cfg.threshold) b.results["at_threshold"] = second_review_json(simulate::second_review(s, y, *cfg.threshold));
        if (pol) b.results["sweep"] = sweep_result_json(simulate::second_review_sweep(s, y, *pol));
        if (!cfg.threshold && !pol) throw InputError("second-review: give --threshold or --policy with --input");
    }
    if (cfg.counts.empty() && cfg.inputs.empty()) throw InputError("second-review: give --input or --counts");
    if (pol) b.results["policy"] = json{{"min_rescue_rate", pol->min_rescue_rate}, {"max_review_burden", pol->max_review_burden}};
}

void cmd_triage(const RunConfig& cfg, Builder& b) {
    const auto c = load_cohort(cfg);
    require_binary(c, "triage");
    if (!cfg.t_low && !cfg.t_high) throw InputError("triage: give --t-low and/or --t-high");
    const auto opts = boot(cfg);
    const auto o = simulate::triage(c.positive_scores(), c.binary_labels(), cfg.t_low, cfg.t_high, &opts);
    b.results["cohort"] = c.name;
    b.results["outcome"] = triage_json(o);
}

struct StrategyTable {
    std::vector<std::string> strategies;  // in column order
    std::map<std::string, std::vector<simulate::RankedCase>> cases;
};

StrategyTable load_strategy_table(const std::string& path) {
    const auto t = csv::read_file(path);
    if (t.rows.empty()) throw InputError(path + ": no records");
    const auto cid = t.require_column("case_id");
    const auto ctruth = t.require_column("truth");
    StrategyTable st;
    std::vector<std::pair<std::string, std::size_t>> cols;
    for (std::size_t i = 0; i < t.header.size(); ++i) {
        if (t.header[i].rfind("score_", 0) == 0) {
            const auto name = t.header[i].substr(6);
            simulate::parse_strategy(name);
            cols.emplace_back(name, i);
            st.strategies.push_back(name);
        }
    }
    if (cols.empty()) throw InputError(path + ": no score_<strategy> columns");
    std::set<std::string> ids;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::string at = path + " line " + std::to_string(t.line_numbers[r]) + ": ";
        if (!ids.insert(row[cid]).second) throw InputError(at + "duplicate case_id '" + row[cid] + "'");
        if (row[ctruth] != "0" && row[ctruth] != "1") throw InputError(at + "truth must be 0 or 1");
        for (const auto& [name, col] : cols) {
            double v;
            try {
                std::size_t used = 0;
                v = std::stod(row[col], &used);
                if (used != row[col].size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw InputError(at + "bad score '" + row[col] + "'");
            }
            st.cases[name].push_back({row[cid], v, row[ctruth] == "1" ? 1 : 0});
        }
    }
    return st;
}

json prioritization_json(const simulate::PrioritizationOutcome& o) {
    return json{{"strategy", simulate::to_string(o.strategy)},
                {"intended_rate", o.intended_rate},
                {"actual_rate", o.actual_rate},
                {"actual_rate_display", report::percent(o.actual_rate)},
                {"threshold", o.threshold ? json(*o.threshold) : json(nullptr)},
                {"n", o.n},
                {"n_pos", o.n_pos},
                {"selected", o.selected},
                {"true_positives", o.true_positives},
                {"prevalence", o.prevalence},
                {"sensitivity", number(o.sensitivity)},
                {"ppv", number(o.ppv)},
                {"enrichment", number(o.enrichment)},
                {"tests_per_mutation", number(o.tests_per_mutation)},
                {"ppv_display", o.ppv ? json(report::percent(*o.ppv)) : json("NaN")},
                {"enrichment_display", maybe_display(o.enrichment, 2)},
                {"tests_per_mutation_display", maybe_display(o.tests_per_mutation, 1)}};
}

void cmd_prioritize(const RunConfig& cfg, Builder& b) {
    const auto internal = load_strategy_table(single_input(cfg));
    std::vector<double> rates = cfg.rates;
    if (rates.empty()) {
        for (int k = 1; k <= 10; ++k) rates.push_back(k / 10.0);
    }
    json internal_j = json::object();
    for (const auto& name : internal.strategies) {
        json arr = json::array();
        for (const auto& o : simulate::prioritize_internal(simulate::parse_strategy(name), internal.cases.at(name), rates)) {
            arr.push_back(prioritization_json(o));
        }
        internal_j[name] = arr;
    }
    b.results["internal"] = internal_j;
    b.results["rates"] = rates;

    if (!cfg.external.empty()) {
        const auto external = load_strategy_table(cfg.external);
        json ext = json::object();
        for (const auto& name : internal.strategies) {
            if (!external.cases.count(name)) continue;
            b.attempt("external:" + name, [&] {
                std::vector<double> scores;
                for (const auto& c : internal.cases.at(name)) scores.push_back(c.score);
                json arr = json::array();
                for (double r : rates) {
                    if (!(r > 0.0 && r < 1.0)) continue;
                    const double t = simulate::transfer_threshold(scores, r);
                    arr.push_back(prioritization_json(
                        simulate::prioritize_external(simulate::parse_strategy(name), external.cases.at(name), t, r)));
                }
                ext[name] = arr;
            });
        }
        b.results["external"] = ext;
    }
}

void cmd_deferral(const RunConfig& cfg, Builder& b) {
    const auto c = load_cohort(cfg);
    require_binary(c, "deferral");
    const auto reg = policy::Registry::load(cfg.registry);
    const auto low = reg.latest(c.task, policy::Semantics::ruleout);
    if (!low) throw InputError("deferral: no locked rule-out threshold for task '" + c.task + "'");
    const auto o = simulate::deferral_analysis(c, *low);
    b.results["cohort"] = c.name;
    b.results["t_low"] = locked_json(*low);
    b.results["outcome"] = json{{"non_deferred", o.non_deferred},
                                {"safe_rescues", o.safe_rescues},
                                {"unsafe_rescues", o.unsafe_rescues},
                                {"still_deferred", o.still_deferred}};
}

// ---------------------------------------------------------------------------
// reader study

json gee_json(const regression::GeeFit& f, const std::string& effect_name) {
    json coefs = json::array();
    for (const auto& c : f.coefficients) coefs.push_back(report::coefficient(c, effect_name));
    return json{{"link", regression::to_string(f.link)},
                {"variance", regression::to_string(f.variance)},
                {"correlation", regression::to_string(f.correlation)},
                {"working_correlation", f.alpha},
                {"scale", f.scale},
                {"n_clusters", f.n_clusters},
                {"n_obs", f.n_obs},
                {"converged", f.converged},
                {"iterations", f.iterations},
                {"coefficients", coefs},
                {"warnings", f.warnings}};
}

std::string effect_name(reader::Outcome o) {
    switch (o) {
        case reader::Outcome::accuracy: return "OR";
        case reader::Outcome::time: return "TR";
        case reader::Outcome::confidence: return "Diff";
    }
    return "effect";
}

json trajectory_json(const reader::Trajectory& t) {
    json sub = json::object();
    for (const auto& [k, s] : t.subtypes) sub[k] = json{{"initial_errors", s.initial_errors}, {"corrected", s.corrected}};
    return json{{"n_pairs", t.n_pairs},
                {"correct_to_correct", t.correct_to_correct},
                {"error_to_correct", t.error_to_correct},
                {"correct_to_error", t.correct_to_error},
                {"error_to_error", t.error_to_error},
                {"pct_correct_to_correct", t.pct_correct_to_correct},
                {"pct_error_to_correct", t.pct_error_to_correct},
                {"pct_correct_to_error", t.pct_correct_to_error},
                {"pct_error_to_error", t.pct_error_to_error},
                {"initial_error_burden_pct", t.initial_error_burden},
                {"subtypes", sub}};
}

void cmd_reader_study(const RunConfig& cfg, Builder& b) {
    const auto reads = cohort::load_reader(single_input(cfg));
    json summ = json::array();
    for (const auto& s : reader::summarize_readers(reads)) {
        summ.push_back(json{{"reader_id", s.reader_id},
                            {"experience", s.experience == cohort::Experience::senior ? "senior" : "junior"},
                            {"condition", s.condition == cohort::ReadingCondition::with_ai ? "with_ai" : "without_ai"},
                            {"n_reads", s.n_reads},
                            {"n_timeouts", s.n_timeouts},
                            {"accuracy", s.accuracy},
                            {"balanced_accuracy", number(s.balanced_accuracy)},
                            {"mean_time_s", s.mean_time_s},
                            {"mean_confidence", number(s.mean_confidence)}});
    }
    b.results["readers"] = summ;

    json gee = json::object(), seq = json::object();
    for (auto o : {reader::Outcome::accuracy, reader::Outcome::time, reader::Outcome::confidence}) {
        b.attempt("gee:" + reader::to_string(o), [&] { gee[reader::to_string(o)] = gee_json(reader::outcome_gee(reads, o), effect_name(o)); });
        b.attempt("sequence_effect:" + reader::to_string(o),
                  [&] { seq[reader::to_string(o)] = gee_json(reader::sequence_effect(reads, o), effect_name(o)); });
    }
    b.results["gee"] = gee;
    b.results["sequence_effect"] = seq;

    json agree = json::object(), traj = json::object();
    const auto opts = boot(cfg);
    for (const auto& task : reader::tasks_of(reads)) {
        b.attempt("agreement:" + task, [&] {
            const auto a = reader::agreement_by_task(reads, task, opts);
            const auto& d = a.difference;
            agree[task] = json{{"n_cases", a.n_cases},
                               {"kappa_without_ai", report::bootstrap(d.ci_a)},
                               {"kappa_with_ai", report::bootstrap(d.ci_b)},
                               {"delta_kappa", report::bootstrap(d.ci_delta)},
                               {"p", report::pvalue(d.p)},
                               {"interpretation_without_ai", inference::kappa_band(d.kappa_a)},
                               {"interpretation_with_ai", inference::kappa_band(d.kappa_b)}};
        });
        b.attempt("trajectory:" + task, [&] { traj[task] = trajectory_json(reader::decision_trajectory(reads, task)); });
    }
    b.attempt("trajectory:all", [&] { traj["all"] = trajectory_json(reader::decision_trajectory(reads)); });
    b.results["agreement"] = agree;
    b.results["trajectory"] = traj;
}

// ---------------------------------------------------------------------------
// survival

json cox_json(const survival::CoxFit& f, const std::vector<survival::HrBootstrap>* boot_hr) {
    json coefs = json::array();
    for (std::size_t j = 0; j < f.coefficients.size(); ++j) {
        auto cj = report::coefficient(f.coefficients[j], "HR");
        if (boot_hr) {
            const auto& h = (*boot_hr)[j];
            cj["bootstrap"] = json{{"hr", report::bootstrap(h.hr)}, {"p", report::pvalue(h.p)}};
            cj["display"] = report::format_ci(h.hr.point, h.hr.lo, h.hr.hi, 2);
        }
        coefs.push_back(cj);
    }
    return json{{"coefficients", coefs},
                {"ties", "breslow"},
                {"ci_method", boot_hr ? "bootstrap_percentile" : "wald"},
                {"log_partial_likelihood", f.log_partial_likelihood},
                {"converged", f.converged},
                {"monotone_likelihood", f.monotone_likelihood},
                {"warnings", f.warnings}};
}

void cmd_survival(const RunConfig& cfg, Builder& b) {
    const auto records = cohort::load_survival(single_input(cfg));
    const auto d = survival::survival_data(records);
    if (d.risk.empty()) throw InputError("survival: records carry no risk_score or fold-model scores");
    const auto opts = boot(cfg);
    b.results["n"] = records.size();
    b.results["events"] = std::count(d.event.begin(), d.event.end(), 1);

    b.attempt("c_index", [&] {
        const auto ci = survival::concordance_index(d.risk, d.time, d.event);
        json j{{"value", ci.value}, {"comparable_pairs", ci.comparable}};
        const bool folds = std::any_of(d.fold.begin(), d.fold.end(), [](int f) { return f >= 0; });
        if (folds) {
            const auto bt = survival::fold_cindex_bootstrap(d.risk, d.time, d.event, d.fold, opts);
            j["ci"] = report::bootstrap(bt);
            j["ci_scheme"] = "per_fold_pooled";
        } else {
            resample::IndexStatistic stat = [&](std::span<const std::size_t> idx) -> MaybeReal {
                std::vector<double> r, t;
                std::vector<int> e;
                for (auto i : idx) {
                    r.push_back(d.risk[i]);
                    t.push_back(d.time[i]);
                    e.push_back(d.event[i]);
                }
                try {
                    return survival::concordance_index(r, t, e).value;
                } catch (const Inestimable&) {
                    return std::nullopt;
                }
            };
            j["ci"] = report::bootstrap(resample::bootstrap_ci(stat, d.risk.size(), opts));
            j["ci_scheme"] = "case";
        }
        b.results["c_index"] = j;
    });

    const auto groups = survival::risk_dichotomize(d.risk, cfg.cut);
    b.results["risk_groups"] = json{{"cut", groups.cut},
                                    {"rule", cfg.cut ? "supplied" : "median (ties to low)"},
                                    {"n_high", std::count(groups.high.begin(), groups.high.end(), 1)},
                                    {"n_low", std::count(groups.high.begin(), groups.high.end(), 0)}};

    std::vector<std::vector<std::string>> km_rows;
    json km = json::object();
    for (int g : {0, 1}) {
        std::vector<double> t;
        std::vector<int> e;
        for (std::size_t i = 0; i < d.time.size(); ++i) {
            if (groups.high[i] == g) {
                t.push_back(d.time[i]);
                e.push_back(d.event[i]);
            }
        }
        if (t.empty()) continue;
        const auto curve = survival::kaplan_meier(t, e);
        const std::string name = g ? "high" : "low";
        km[name] = json{{"n", t.size()}, {"events", std::count(e.begin(), e.end(), 1)}};
        for (std::size_t k = 0; k < curve.time.size(); ++k) {
            km_rows.push_back({name, num(curve.time[k]), num(curve.survival[k]), std::to_string(curve.at_risk[k]),
                               std::to_string(curve.events[k])});
        }
    }
    b.results["kaplan_meier"] = km;
    b.extracts.emplace_back("km_curves.csv", to_csv({"group", "time", "survival", "at_risk", "events"}, km_rows));

    b.attempt("logrank", [&] {
        const auto lr = survival::logrank_test(d.time, d.event, groups.high);
        b.results["logrank"] = json{{"chi2", lr.chi2}, {"p", report::pvalue(lr.p)}};
    });

    auto fit_and_report = [&](const regression::DesignMatrix& X) {
        const auto fit = survival::cox_fit(d.time, d.event, X);
        if (cfg.wald) return cox_json(fit, nullptr);
        const auto bt = survival::cox_bootstrap(d.time, d.event, X, opts);
        return cox_json(fit, &bt);
    };
    regression::DesignMatrix uni;
    uni.names = {"risk_group_high"};
    uni.X.resize(static_cast<Eigen::Index>(d.time.size()), 1);
    for (std::size_t i = 0; i < d.time.size(); ++i) uni.X(static_cast<Eigen::Index>(i), 0) = groups.high[i];
    b.attempt("cox_univariable", [&] { b.results["cox_univariable"] = fit_and_report(uni); });

    std::vector<std::string> covs = cfg.covariates;
    if (covs.empty() && !records.empty()) {
        for (const auto& [name, v] : records.front().covariates) covs.push_back(name);
    }
    regression::DesignMatrix multi = uni;
    if (!covs.empty()) {
        const auto cd = survival::covariate_design(records, covs);
        multi.names.insert(multi.names.end(), cd.names.begin(), cd.names.end());
        Eigen::MatrixXd X(uni.X.rows(), uni.X.cols() + cd.X.cols());
        X << uni.X, cd.X;
        multi.X = X;
        b.attempt("cox_multivariable", [&] { b.results["cox_multivariable"] = fit_and_report(multi); });
    }

    b.attempt("adjusted_curves", [&] {
        const auto fit = survival::cox_fit(d.time, d.event, multi);
        const auto curves = survival::adjusted_curves(fit, multi, "risk_group_high", {0.0, 1.0});
        std::vector<std::vector<std::string>> rows;
        json summary = json::object();
        for (const auto& c : curves) {
            const std::string name = c.group_value == 1.0 ? "high" : "low";
            summary[name] = json{{"final_survival", c.survival.back()}, {"points", c.survival.size()}};
            for (std::size_t k = 0; k < c.time.size(); ++k) rows.push_back({name, num(c.time[k]), num(c.survival[k])});
        }
        b.results["adjusted_curves"] = json{{"method", "direct adjustment, Breslow baseline"},
                                            {"covariates", multi.names},
                                            {"groups", summary}};
        b.extracts.emplace_back("adjusted_curves.csv", to_csv({"group", "time", "survival"}, rows));
    });
}

// ---------------------------------------------------------------------------
// model comparison

void cmd_compare(const RunConfig& cfg, Builder& b) {
    const auto t = csv::read_file(single_input(cfg));
    const auto cm = t.require_column("model");
    const auto cc = t.require_column("cohort");
    const auto cv = t.require_column("value");
    const auto ct = t.column("task");
    std::set<std::string> models, cohorts;
    std::map<std::pair<std::string, std::string>, double> value;
    std::map<std::string, std::string> task_of;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& r = t.rows[i];
        double v;
        try {
            v = (r[cv].empty() || r[cv] == "NaN" || r[cv] == "nan") ? std::nan("") : std::stod(r[cv]);
        } catch (const std::exception&) {
            throw InputError("line " + std::to_string(t.line_numbers[i]) + ": bad value '" + r[cv] + "'");
        }
        if (!value.emplace(std::make_pair(r[cm], r[cc]), v).second) {
            throw InputError("line " + std::to_string(t.line_numbers[i]) + ": duplicate model/cohort pair");
        }
        models.insert(r[cm]);
        cohorts.insert(r[cc]);
        task_of[r[cc]] = ct ? r[*ct] : "all";
    }
    inference::MetricTable table;
    table.models.assign(models.begin(), models.end());
    table.cohorts.assign(cohorts.begin(), cohorts.end());
    for (const auto& m : table.models) {
        std::vector<double> row;
        for (const auto& c : table.cohorts) {
            auto it = value.find({m, c});
            row.push_back(it == value.end() ? std::nan("") : it->second);
        }
        table.value.push_back(row);
    }
    const auto ranks = inference::model_mean_rank(table, !cfg.lower_is_better);
    json mr = json::object();
    for (const auto& m : ranks.models) mr[m.model] = json{{"mean_rank", m.mean_rank}, {"display", report::fixed(m.mean_rank, 2)}};
    b.results["mean_rank"] = mr;
    b.results["cohorts_used"] = ranks.cohorts_used;
    b.results["warnings"] = ranks.warnings;

    std::string ref = cfg.reference;
    if (ref.empty()) {
        // best mean rank; the first model wins ties
        const auto best = std::min_element(ranks.models.begin(), ranks.models.end(),
                                           [](const auto& x, const auto& y) { return x.mean_rank < y.mean_rank; });
        ref = best->model;
    }
    if (!models.count(ref)) throw InputError("compare: reference model '" + ref + "' not in table");
    b.results["reference"] = ref;

    std::set<std::string> tasks;
    for (const auto& [c, tk] : task_of) tasks.insert(tk);
    json wil = json::object();
    for (const auto& tk : tasks) {
        for (const auto& m : table.models) {
            if (m == ref) continue;
            b.attempt("wilcoxon:" + tk + ":" + m, [&] {
                std::vector<double> diffs;
                for (const auto& c : table.cohorts) {
                    if (task_of[c] != tk) continue;
                    const double a = value.count({ref, c}) ? value.at({ref, c}) : std::nan("");
                    const double o = value.count({m, c}) ? value.at({m, c}) : std::nan("");
                    if (std::isnan(a) || std::isnan(o)) continue;
                    diffs.push_back(cfg.lower_is_better ? o - a : a - o);
                }
                const auto w = inference::wilcoxon_signed_rank_one_sided(diffs);
                wil[tk][m] = json{{"w_plus", w.w_plus},
                                  {"n_nonzero", w.n_nonzero},
                                  {"method", w.exact ? "exact" : "normal"},
                                  {"p", report::pvalue(w.p)}};
            });
        }
    }
    b.results["wilcoxon_one_sided"] = wil;
}

// ---------------------------------------------------------------------------
// paired biomarker status and subgroup shift

void cmd_paired(const RunConfig& cfg, Builder& b) {
    const auto recs = cohort::load_paired(single_input(cfg));
    std::map<std::string, std::array<std::size_t, 4>> cells;  // PP, PN, NP, NN
    for (const auto& r : recs) {
        auto& c = cells[r.biomarker];
        const std::size_t k = r.pre_positive ? (r.post_positive ? 0 : 1) : (r.post_positive ? 2 : 3);
        ++c[k];
    }
    json out = json::object();
    for (const auto& [bm, c] : cells) {
        json j{{"PP", c[0]}, {"PN", c[1]}, {"NP", c[2]}, {"NN", c[3]}, {"n", c[0] + c[1] + c[2] + c[3]}};
        b.attempt("kappa:" + bm, [&] { j["kappa"] = report::kappa(inference::cohen_kappa_2x2(c[0], c[1], c[2], c[3])); });
        if (c[1] + c[2] > 0) {
            const auto m = inference::mcnemar(static_cast<int>(c[1]), static_cast<int>(c[2]));
            j["mcnemar"] = json{{"b", m.b},
                                {"c", m.c},
                                {"mode", m.mode == inference::McNemarMode::exact ? "exact" : "chi2"},
                                {"statistic", number(m.statistic)},
                                {"p", report::pvalue(m.p)}};
        } else {
            j["mcnemar"] = json{{"b", 0}, {"c", 0}, {"note", "no discordant pairs"}};
        }
        out[bm] = j;
    }
    b.results["biomarkers"] = out;
}

void cmd_subgroup(const RunConfig& cfg, Builder& b) {
    const auto c = load_cohort(cfg);
    if (cfg.tag.empty()) throw InputError("subgroup: --tag is required");
    const auto f = cohort::subgroup_filter(c, cfg.tag);
    b.results["tag"] = cfg.tag;
    b.results["subgroup_n"] = f.cohort.size();
    json dist = json::object();
    for (const auto& [k, v] : cohort::class_distribution(f.cohort)) dist[k] = v;
    b.results["subgroup_class_distribution"] = dist;
    std::vector<std::string> warnings = f.warnings;
    if (f.cohort.size() > 0) {
        const auto rep = inference::subgroup_shift_report(c, f.cohort, boot(cfg));
        auto auc_j = [](const inference::AucWithCi& a) {
            json j{{"value", number(a.auc)}};
            j["display"] = a.auc ? (a.ci ? report::format_ci(*a.auc, a.ci->lo, a.ci->hi) : report::fixed(*a.auc, 3))
                                 : std::string("NaN");
            if (a.ci) j["ci"] = report::bootstrap(*a.ci);
            return j;
        };
        b.results["baseline_auc"] = auc_j(rep.baseline_auc);
        b.results["subgroup_auc"] = auc_j(rep.subgroup_auc);
        json cls = json::array();
        for (const auto& s : rep.classes) {
            cls.push_back(json{{"class", s.class_name},
                               {"baseline_n", s.baseline_n},
                               {"subgroup_n", s.subgroup_n},
                               {"ks", report::ks(s.ks)}});
        }
        b.results["classes"] = cls;
        warnings.insert(warnings.end(), rep.warnings.begin(), rep.warnings.end());
    }
    b.results["warnings"] = warnings;
}

using Handler = void (*)(const RunConfig&, Builder&);

const std::map<std::string, Handler>& handlers() {
    static const std::map<std::string, Handler> h{
        {"metrics", cmd_metrics},
        {"threshold-select", cmd_threshold_select},
        {"threshold-apply", cmd_threshold_apply},
        {"second-review", cmd_second_review},
        {"triage", cmd_triage},
        {"prioritize", cmd_prioritize},
        {"deferral", cmd_deferral},
        {"reader-study", cmd_reader_study},
        {"survival", cmd_survival},
        {"compare", cmd_compare},
        {"paired", cmd_paired},
        {"subgroup", cmd_subgroup},
    };
    return h;
}

}  // namespace

std::vector<std::string> command_names() {
    std::vector<std::string> out;
    for (const auto& [k, v] : handlers()) out.push_back(k);
    return out;
}

json config_json(const RunConfig& cfg) {
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    return json{{"command", cfg.command},
                {"inputs", cfg.inputs},
                {"schema", cfg.schema},
                {"policy", cfg.policy},
                {"registry", cfg.registry},
                {"external", cfg.external},
                {"counts", cfg.counts},
                {"seed", cfg.seed},
                {"resamples", cfg.resamples},
                {"level", cfg.level},
                {"relock", cfg.relock},
                {"stratify", cfg.stratify},
                {"wald", cfg.wald},
                {"lower_is_better", cfg.lower_is_better},
                {"t_low", opt(cfg.t_low)},
                {"t_high", opt(cfg.t_high)},
                {"threshold", opt(cfg.threshold)},
                {"cut", opt(cfg.cut)},
                {"rates", cfg.rates},
                {"covariates", cfg.covariates},
                {"tag", cfg.tag},
                {"reference", cfg.reference},
                {"bins", cfg.bins},
                {"bootstrap", "percentile"}};
}

CommandResult run(const RunConfig& cfg) {
    const auto it = handlers().find(cfg.command);
    if (it == handlers().end()) throw InputError("unknown command '" + cfg.command + "'");
    if (cfg.resamples < 1) throw InputError("--resamples must be >= 1");
    if (!(cfg.level > 0.0 && cfg.level < 1.0)) throw InputError("--level must lie in (0,1)");
    Builder b;
    it->second(cfg, b);
    CommandResult r;
    r.exit_code = b.failures.empty() ? 0 : 2;
    r.report = json{{"command", cfg.command},
                    {"version", kVersion},
                    {"config", config_json(cfg)},
                    {"results", b.results},
                    {"failures", b.failures},
                    {"status", b.failures.empty() ? "ok" : "partial"}};
    r.extracts = std::move(b.extracts);
    return r;
}

void write_outputs(const RunConfig& cfg, const CommandResult& result) {
    if (cfg.out.empty()) return;
    std::filesystem::create_directories(cfg.out);
    auto write = [&](const std::string& name, const std::string& text) {
        const auto path = std::filesystem::path(cfg.out) / name;
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) throw InputError("cannot write " + path.string());
        f << text;
    };
    write("report.json", report::dump(result.report));
    for (const auto& [name, text] : result.extracts) write(name, text);
}

}  // namespace triagebench::commands
