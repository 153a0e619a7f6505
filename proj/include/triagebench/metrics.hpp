#pragma once

// Classification metrics. Decision direction is fixed everywhere:
// score >= T is a positive call. Labels are 1 (positive) / 0 (negative).

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "triagebench/cohort.hpp"
#include "triagebench/common.hpp"

namespace triagebench::metrics {

inline constexpr int kTimeoutResponse = -1;

struct ConfusionCounts {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    std::size_t total() const { return tp + fp + tn + fn; }
    std::size_t positives() const { return tp + fn; }
    std::size_t negatives() const { return tn + fp; }
    MaybeReal sensitivity() const { return safe_ratio(double(tp), double(tp + fn)); }
    MaybeReal specificity() const { return safe_ratio(double(tn), double(tn + fp)); }
    MaybeReal ppv() const { return safe_ratio(double(tp), double(tp + fp)); }
    MaybeReal npv() const { return safe_ratio(double(tn), double(tn + fn)); }

    bool operator==(const ConfusionCounts&) const = default;
};

struct OperatingPoint {
    double threshold = 0.0;
    ConfusionCounts counts;
    MaybeReal sensitivity, specificity, ppv, npv;
    double youden = 0.0;
};

OperatingPoint make_operating_point(double threshold, const ConfusionCounts& c);

ConfusionCounts confusion_at_threshold(std::span<const double> scores, std::span<const int> labels,
                                       double threshold);

// Mann-Whitney concordance probability, ties credited 1/2.
// Empty when either class is absent.
MaybeReal binary_auc(std::span<const double> scores, std::span<const int> labels);

struct MacroAuc {
    double value = 0.0;
    std::vector<MaybeReal> per_class;
    std::vector<std::string> warnings;
};

// class_scores[c][i] is case i's score for class c; labels hold class indices.
MacroAuc macro_auc_ovr(std::span<const int> labels, const std::vector<std::vector<double>>& class_scores);
MacroAuc macro_auc_ovr(const cohort::Cohort& c);
// Same statistic restricted to (possibly repeated) case indices.
MacroAuc macro_auc_ovr(const cohort::Cohort& c, std::span<const std::size_t> idx);

// Candidates are the unique scores plus +inf; ties in Youden go to the
// smallest threshold.
OperatingPoint youden_optimal(std::span<const double> scores, std::span<const int> labels);

// Mean recall over classes present in truth. kTimeoutResponse never matches.
double balanced_accuracy(std::span<const int> predicted, std::span<const int> truth);

// Step-interpolated area under precision-recall (average precision).
MaybeReal auprc(std::span<const double> scores, std::span<const int> labels);
double brier(std::span<const double> probabilities, std::span<const int> labels);

struct RocPoint {
    double threshold;
    double fpr;
    double tpr;
};
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels);

// Unique scores ascending.
std::vector<double> unique_sorted(std::span<const double> scores);

}  // namespace triagebench::metrics
