#pragma once

// Workflow simulations: model-triggered second review, rule-out/rule-in
// triage, genomic-testing prioritisation and deferral rescue. Every outcome
// keeps its integer counts next to the derived rates.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "triagebench/cohort.hpp"
#include "triagebench/common.hpp"
#include "triagebench/policy.hpp"
#include "triagebench/resample.hpp"

namespace triagebench::simulate {

// --- second review ------------------------------------------------------------

struct SecondReviewOutcome {
    double threshold = 0.0;
    std::size_t total_fn = 0;     // positives among doctor-negative cases
    std::size_t rescued_fn = 0;   // of those, flagged by the model
    std::size_t review_cases = 0; // every flagged case
    std::size_t false_alarm_reviews = 0;
    std::optional<std::size_t> doctor_negative_cases;
    MaybeReal rescue_rate;    // rescued_fn / total_fn
    MaybeReal review_burden;  // review_cases / doctor_negative_cases
    MaybeReal nnr;            // review_cases / rescued_fn

    // Builds the derived rates from published counts. Without the
    // doctor-negative count the burden stays undefined.
    static SecondReviewOutcome from_counts(double threshold, std::size_t total_fn, std::size_t rescued_fn,
                                           std::size_t review_cases,
                                           std::optional<std::size_t> doctor_negative_cases = {});
};

// Cases are all initially called negative; truth 1 marks a missed positive.
// A case is flagged when score >= threshold.
SecondReviewOutcome second_review(std::span<const double> scores, std::span<const int> truth, double threshold);

struct SecondReviewSweep {
    std::vector<SecondReviewOutcome> rows;  // ascending threshold
    std::optional<std::size_t> selected;    // index into rows
    std::string binding_constraint;         // set when infeasible
};

// Selection over precomputed rows: rescue_rate >= min and burden <= max;
// maximise rescue, then minimise burden, then nnr, then take the largest T.
SecondReviewSweep select_second_review(std::vector<SecondReviewOutcome> rows, const policy::RescueBurden& p);

// Candidates are the unique scores plus +inf; reported thresholds are midpoints.
SecondReviewSweep second_review_sweep(std::span<const double> scores, std::span<const int> truth,
                                      const policy::RescueBurden& p);

// --- triage -------------------------------------------------------------------

struct TriageOutcome {
    std::optional<double> t_low, t_high;
    std::size_t total_cases = 0;
    std::size_t ruleout_cases = 0, rulein_cases = 0, gray_cases = 0;
    std::size_t ruleout_true_negatives = 0, rulein_true_positives = 0;
    double ruleout_coverage = 0.0, rulein_coverage = 0.0;
    MaybeReal npv_at_ruleout, ppv_at_rulein;
    std::optional<resample::BootstrapResult> npv_ci, ppv_ci;
    std::vector<std::string> warnings;
};

// score < t_low is ruled out, score >= t_high ruled in. Pass bootstrap
// options to attach percentile CIs to NPV and PPV.
TriageOutcome triage(std::span<const double> scores, std::span<const int> labels, std::optional<double> t_low,
                     std::optional<double> t_high, const resample::BootstrapOptions* ci = nullptr);

// Rule-out half from published counts.
TriageOutcome ruleout_from_counts(std::size_t total_cases, std::size_t ruleout_cases,
                                  std::size_t ruleout_true_negatives);

// --- prioritisation -------------------------------------------------------------

enum class Strategy { clinical, model_only, clinical_plus_model };
std::string to_string(Strategy s);
Strategy parse_strategy(const std::string& s);

struct RankedCase {
    std::string case_id;
    double score = 0.0;
    int truth = 0;  // 1 = mutation present
};

struct PrioritizationOutcome {
    Strategy strategy = Strategy::model_only;
    double intended_rate = 0.0;
    double actual_rate = 0.0;
    std::optional<double> threshold;  // lowest selected score
    std::size_t n = 0, n_pos = 0, selected = 0, true_positives = 0;
    double prevalence = 0.0;
    MaybeReal sensitivity, ppv, enrichment, tests_per_mutation;
};

PrioritizationOutcome prioritization_from_counts(Strategy s, double intended_rate, std::size_t n, std::size_t n_pos,
                                                 std::size_t selected, std::size_t true_positives,
                                                 std::optional<double> threshold = {});

// Ranks by score descending (case_id breaks ties) and selects the top
// ceil(rate * n), widened to every case tied with the boundary score.
std::vector<PrioritizationOutcome> prioritize_internal(Strategy s, const std::vector<RankedCase>& cases,
                                                       const std::vector<double>& rates);

// Score of the ceil(rate * n)-th highest internal case.
double transfer_threshold(std::span<const double> internal_scores, double intended_rate);

// Selects external cases with score >= threshold.
PrioritizationOutcome prioritize_external(Strategy s, const std::vector<RankedCase>& external, double threshold,
                                          double intended_rate);

// --- deferral -------------------------------------------------------------------

inline constexpr const char* kDeferTag = "Defer";

struct DeferralOutcome {
    std::size_t non_deferred = 0;
    std::size_t safe_rescues = 0;    // deferred, ruled out, truly negative
    std::size_t unsafe_rescues = 0;  // deferred, ruled out, truly positive
    std::size_t still_deferred = 0;  // deferred, not ruled out
};

DeferralOutcome deferral_analysis(std::span<const double> scores, std::span<const int> labels,
                                  std::span<const int> deferred, double t_low);
DeferralOutcome deferral_analysis(const cohort::Cohort& c, const policy::LockedThreshold& ruleout);

}  // namespace triagebench::simulate
