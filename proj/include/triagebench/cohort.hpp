#pragma once

// Data model and file ingestion for every downstream analysis. Cohorts are
// immutable after load; loaders either return a fully validated object or
// throw an InputError naming the offending line.

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "triagebench/common.hpp"

namespace triagebench::cohort {

class ClassMap {
public:
    ClassMap() = default;
    ClassMap(std::vector<std::string> names, std::optional<std::size_t> positive_index);

    const std::vector<std::string>& names() const { return names_; }
    std::size_t size() const { return names_.size(); }
    std::optional<std::size_t> positive_index() const { return positive_; }
    std::optional<std::size_t> index_of(const std::string& label) const;
    const std::string& name(std::size_t i) const { return names_.at(i); }

    bool operator==(const ClassMap&) const = default;

private:
    std::vector<std::string> names_;
    std::optional<std::size_t> positive_;
};

enum class Stage { unspecified, pre, intra, post };
enum class CohortRole { train, val, internal_test, retrospective_external, prospective };

std::string to_string(Stage s);
std::string to_string(CohortRole r);
Stage parse_stage(const std::string& s);
CohortRole parse_role(const std::string& s);

struct CaseRecord {
    std::string case_id;
    std::size_t true_label = 0;
    // One score per class. Binary files with a single `score` column get the
    // complement filled in for the non-positive class.
    std::vector<double> scores;
    std::set<std::string> subgroup_tags;
    std::string center;
    Stage stage = Stage::unspecified;

    bool has_tag(const std::string& t) const { return subgroup_tags.count(t) > 0; }
    bool operator==(const CaseRecord&) const = default;
};

struct Cohort {
    std::string name;
    std::string task;
    ClassMap class_map;
    std::vector<CaseRecord> records;
    CohortRole role = CohortRole::internal_test;
    bool single_score_column = false;

    std::size_t size() const { return records.size(); }
    // Score of the designated positive class (binary tasks).
    std::vector<double> positive_scores() const;
    // 1 when the record's label is the positive class, else 0.
    std::vector<int> binary_labels() const;
    std::vector<int> labels() const;
    std::size_t positive_class() const;

    bool operator==(const Cohort&) const = default;
};

// Everything needed to interpret a cohort CSV.
struct CohortSchema {
    std::string name;
    std::string task;
    CohortRole role = CohortRole::internal_test;
    ClassMap class_map;
    bool normalized = false;
    double normalization_tolerance = 1e-6;
};

CohortSchema parse_schema_json(const std::string& json_text);
CohortSchema load_schema(const std::string& path);

Cohort load_cohort(const std::string& path, const CohortSchema& schema);
Cohort parse_cohort(const std::string& csv_text, const CohortSchema& schema);
std::string write_cohort(const Cohort& c);

std::map<std::string, std::size_t> class_distribution(const Cohort& c);

struct FilterResult {
    Cohort cohort;
    std::vector<std::string> warnings;
};
FilterResult subgroup_filter(const Cohort& c, const std::string& tag);

// --- paired biomarker labels --------------------------------------------

struct PairedLabelRecord {
    std::string case_id;
    std::string biomarker;
    bool pre_positive = false;
    bool post_positive = false;
};

std::vector<PairedLabelRecord> parse_paired(const std::string& csv_text);
std::vector<PairedLabelRecord> load_paired(const std::string& path);

// --- survival --------------------------------------------------------------

using CovariateValue = std::variant<double, std::string>;

struct SurvivalRecord {
    std::string case_id;
    double time = 0.0;  // months
    int event = 0;      // 1 observed, 0 censored
    std::map<std::string, CovariateValue> covariates;
    MaybeReal risk_score;
    std::optional<int> fold;
    // risk_score_fold* columns: one score per cross-validation fold model
    std::vector<double> fold_model_scores;
};

std::vector<SurvivalRecord> parse_survival(const std::string& csv_text);
std::vector<SurvivalRecord> load_survival(const std::string& path);

// --- reader study ----------------------------------------------------------

enum class Experience { junior, senior };
enum class ReadingCondition { without_ai, with_ai };

inline constexpr const char* kTimeoutLabel = "TIMEOUT";

struct ReaderObservation {
    std::string reader_id;
    Experience experience = Experience::junior;
    std::string case_id;
    std::string task;
    ReadingCondition condition = ReadingCondition::without_ai;
    int period = 1;
    bool with_ai_first = false;
    std::string response;  // class label or kTimeoutLabel
    std::optional<std::string> truth;
    bool correct = false;
    std::optional<int> confidence;  // 1..10, absent iff timed out
    double time_s = 0.0;
    bool timed_out = false;
};

std::vector<ReaderObservation> parse_reader(const std::string& csv_text);
std::vector<ReaderObservation> load_reader(const std::string& path);

std::string read_text(const std::string& path);

}  // namespace triagebench::cohort
