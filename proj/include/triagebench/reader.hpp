#pragma once

// Reader-study analyses over exported pathologist reads: descriptive
// accuracy, GEE outcome models, sequence effects, Fleiss agreement and
// decision trajectories between unassisted and assisted reading.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "triagebench/cohort.hpp"
#include "triagebench/inference.hpp"
#include "triagebench/regression.hpp"
#include "triagebench/resample.hpp"

namespace triagebench::reader {

using cohort::ReaderObservation;

struct ReaderSummary {
    std::string reader_id;
    cohort::Experience experience = cohort::Experience::junior;
    cohort::ReadingCondition condition = cohort::ReadingCondition::without_ai;
    std::size_t n_reads = 0;
    std::size_t n_timeouts = 0;
    double accuracy = 0.0;
    // mean recall over (task, true class) cells; needs the truth column
    MaybeReal balanced_accuracy;
    double mean_time_s = 0.0;
    MaybeReal mean_confidence;
};

std::vector<ReaderSummary> summarize_readers(const std::vector<ReaderObservation>& reads);

enum class Outcome { accuracy, time, confidence };
std::string to_string(Outcome o);

// GEE with readers as clusters. Covariates: with_ai, period_2, one dummy per
// non-reference task and senior. Accuracy uses a logit link (timeouts count
// as incorrect); time a log link with constant variance (timeouts kept);
// confidence an identity link with any reader-case pair containing a
// timeout dropped.
regression::GeeFit outcome_gee(const std::vector<ReaderObservation>& reads, Outcome outcome);

// Same machinery with the reading-order indicator as exposure; covariates
// with_ai_first, with_ai, task dummies and senior. Throws Inestimable when
// only one sequence is present.
regression::GeeFit sequence_effect(const std::vector<ReaderObservation>& reads, Outcome outcome = Outcome::accuracy);

// Case x category counts for one task and condition. TIMEOUT is its own
// category. Cases must be read by the same number of readers.
struct RatingMatrix {
    std::vector<std::string> case_ids;
    std::vector<std::string> categories;
    inference::CountMatrix counts;
};
RatingMatrix rating_matrix(const std::vector<ReaderObservation>& reads, const std::string& task,
                           cohort::ReadingCondition condition, const std::vector<std::string>& categories);

struct AgreementResult {
    std::string task;
    std::size_t n_cases = 0;
    resample::KappaDifference difference;  // a = without AI, b = with AI
};
AgreementResult agreement_by_task(const std::vector<ReaderObservation>& reads, const std::string& task,
                                  const resample::BootstrapOptions& opts);

struct SubtypeShift {
    std::size_t initial_errors = 0;
    std::size_t corrected = 0;
};

struct Trajectory {
    std::size_t n_pairs = 0;
    std::size_t correct_to_correct = 0, error_to_correct = 0, correct_to_error = 0, error_to_error = 0;
    // percentages over all paired reads
    double pct_correct_to_correct = 0.0, pct_error_to_correct = 0.0;
    double pct_correct_to_error = 0.0, pct_error_to_error = 0.0;
    double initial_error_burden = 0.0;  // percent of pairs wrong without AI
    // keyed by unassisted error subtype ("<truth> as <response>", or
    // "called <response>" without truth)
    std::map<std::string, SubtypeShift> subtypes;
};

// Pairs each reader-case between conditions; a missing partner is an error.
Trajectory decision_trajectory(const std::vector<ReaderObservation>& reads, const std::optional<std::string>& task = {});

std::vector<std::string> tasks_of(const std::vector<ReaderObservation>& reads);

}  // namespace triagebench::reader
