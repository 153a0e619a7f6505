#pragma once

// Constraint-based threshold selection over score sweeps, plus the
// append-only registry of locked thresholds.

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "triagebench/cohort.hpp"
#include "triagebench/common.hpp"
#include "triagebench/metrics.hpp"

namespace triagebench::policy {

// ruleout: the band {score < T}; rulein: the band {score >= T}
enum class Semantics { ruleout, rulein };
std::string to_string(Semantics s);

struct SweepRow {
    double threshold = 0.0;           // candidate used for partitioning
    double reported_threshold = 0.0;  // midpoint shown in reports
    metrics::ConfusionCounts counts;  // calls are score >= threshold
    MaybeReal sensitivity, specificity, ppv, npv;
    double ruleout_coverage = 0.0;  // (tn + fn) / n
    double rulein_coverage = 0.0;   // (tp + fp) / n
};

struct Sweep {
    Semantics semantics = Semantics::ruleout;
    std::size_t n_pos = 0, n_neg = 0;
    std::vector<SweepRow> rows;  // ascending threshold
};

// Candidates are the unique scores plus +inf. The -inf sentinel is left out
// because the lowest unique score gives the same partition.
Sweep sweep(std::span<const double> scores, std::span<const int> labels, Semantics semantics);

// Threshold that reproduces candidate k's partition when applied with the
// strict/non-strict comparisons above.
double reported_threshold(const std::vector<double>& unique_scores, std::size_t k);

// --- policies ---------------------------------------------------------------

enum class Pick { largest, smallest };

struct RuleOutNpv {
    double min_npv = 1.0;
};
struct RuleInPpv {
    double min_ppv = 1.0;
    Pick pick = Pick::largest;
};
struct RescueBurden {
    double min_rescue_rate = 0.0;
    double max_review_burden = 1.0;
};
struct SensitivityFloor {
    double min_sensitivity = 0.0;
};

using ThresholdPolicy = std::variant<RuleOutNpv, RuleInPpv, RescueBurden, SensitivityFloor>;

std::string policy_name(const ThresholdPolicy& p);
// The band a policy locks: rule-out for RuleOutNpv, rule-in otherwise.
Semantics band_of(const ThresholdPolicy& p);
void validate(const ThresholdPolicy& p);

ThresholdPolicy parse_policy_json(const std::string& text);
std::string policy_to_json(const ThresholdPolicy& p);

struct Selection {
    bool feasible = false;
    std::optional<SweepRow> row;
    // for infeasible selections, the constraint nobody satisfied
    std::string binding_constraint;
};

// Rules (ties broken toward the stated extremum, then toward smaller T):
//   RuleOutNpv       largest T with rule-out NPV >= min
//   RuleInPpv        largest or smallest T with rule-in PPV >= min
//   SensitivityFloor largest T with sensitivity >= floor
//   RescueBurden     rescue = sensitivity, burden = rule-in coverage; among
//                    feasible rows maximise rescue, then minimise burden,
//                    then nnr, then take the largest T
Selection select_threshold(const Sweep& sw, const ThresholdPolicy& policy);

// True when the row meets every constraint of the policy.
bool satisfies(const SweepRow& row, const ThresholdPolicy& policy);

// --- locked thresholds ------------------------------------------------------

struct LockedThreshold {
    std::string task;
    Semantics band = Semantics::ruleout;
    double value = 0.0;
    ThresholdPolicy policy;
    std::string source_cohort;
    std::string locked_at;  // ISO-8601 UTC
};

class Registry {
public:
    // Missing file gives an empty registry.
    static Registry load(const std::string& path);
    static Registry parse(const std::string& json_text);
    std::string to_json() const;
    void save(const std::string& path) const;

    // Appends; an existing (task, band) entry needs relock = true, in which
    // case the new entry supersedes it without removing it.
    void append(const LockedThreshold& t, bool relock);
    // Latest entry for (task, band), if any.
    std::optional<LockedThreshold> latest(const std::string& task, Semantics band) const;
    const std::vector<LockedThreshold>& entries() const { return entries_; }

private:
    std::vector<LockedThreshold> entries_;
};

std::string utc_timestamp_now();

enum class Assignment { ruled_out, gray_zone, ruled_in };
std::string to_string(Assignment a);

struct CaseAssignment {
    std::string case_id;
    double score = 0.0;
    Assignment assignment = Assignment::gray_zone;
};

// Uses only the stored values: score < low -> ruled_out, score >= high ->
// ruled_in, otherwise gray_zone. Either band may be absent.
std::vector<CaseAssignment> apply_locked(const std::optional<LockedThreshold>& low,
                                         const std::optional<LockedThreshold>& high, const cohort::Cohort& c);

}  // namespace triagebench::policy
