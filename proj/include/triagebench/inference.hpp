#pragma once

// Hypothesis tests, agreement statistics and correlation/trend analysis.
// Regression models (logistic, GEE) live in regression.hpp.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "triagebench/cohort.hpp"
#include "triagebench/common.hpp"
#include "triagebench/resample.hpp"

namespace triagebench::inference {

// --- distribution helpers (Boost.Math backed) -------------------------------

double normal_cdf(double z);
double normal_quantile(double p);
double chi2_sf(double x, double df);
double student_t_two_sided(double t, double df);

// --- Kolmogorov-Smirnov -----------------------------------------------------

enum class KsMethod { automatic, exact, asymptotic };

struct KsResult {
    double d = 0.0;
    double p = 1.0;
    std::size_t n1 = 0, n2 = 0;
    KsMethod method = KsMethod::exact;
};

// Samples up to this n1*n2 use the exact null distribution under `automatic`.
inline constexpr double kKsExactLimit = 2.5e7;

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b,
                       KsMethod method = KsMethod::automatic);

// P(D >= d) for sample sizes (m, n) with D expressed as an integer multiple
// of 1/(m*n), via lattice-path probabilities.
double ks_exact_sf(std::size_t m, std::size_t n, long long d_numerator);
// Kolmogorov limiting survival function 2*sum_{j>=1} (-1)^{j-1} exp(-2 j^2 x^2),
// truncated at 100 terms.
double kolmogorov_sf(double lambda);

// --- McNemar ----------------------------------------------------------------

enum class McNemarMode { automatic, exact, chi2 };

struct McNemarResult {
    int b = 0, c = 0;
    McNemarMode mode = McNemarMode::exact;  // mode actually used
    MaybeReal statistic;                    // chi2 mode only
    double p = 1.0;
};

// automatic: exact binomial when b + c < 25, continuity-corrected chi2 otherwise
McNemarResult mcnemar(int b, int c, McNemarMode mode = McNemarMode::automatic);

// --- agreement --------------------------------------------------------------

struct ProportionCi {
    double estimate = 0.0, lo = 0.0, hi = 0.0;
};
ProportionCi wilson_interval(std::size_t successes, std::size_t n, double level = 0.95);

// Kappa with p_e = 1 throws Inestimable.
struct KappaResult {
    double kappa = 0.0;
    double observed_agreement = 0.0;
    double expected_agreement = 0.0;
    std::size_t n = 0;
    std::string interpretation;
    // Cohen only: raw concordance (= observed agreement) with a Wilson interval
    std::optional<ProportionCi> concordance;
};

// <=0.20 poor, 0.21-0.40 fair, 0.41-0.60 moderate, 0.61-0.80 substantial,
// above that almost perfect
std::string kappa_band(double kappa);

KappaResult cohen_kappa(std::span<const std::pair<std::string, std::string>> pairs);
// 2x2 convenience: counts of (pre,post) = (+,+), (+,-), (-,+), (-,-).
KappaResult cohen_kappa_2x2(std::size_t pp, std::size_t pn, std::size_t np, std::size_t nn);

using CountMatrix = resample::CountMatrix;
KappaResult fleiss_kappa(const CountMatrix& ratings);

// --- rank tests and correlation ---------------------------------------------

std::vector<double> average_ranks(std::span<const double> x);

struct WilcoxonResult {
    double w_plus = 0.0;
    std::size_t n_nonzero = 0;
    bool exact = true;
    double p = 1.0;
};
// H1: differences are shifted above zero.
inline constexpr std::size_t kWilcoxonExactMax = 20;
WilcoxonResult wilcoxon_signed_rank_one_sided(std::span<const double> differences);

struct CorrelationResult {
    double r = 0.0;
    double p = 1.0;
    std::size_t n = 0;
};
CorrelationResult pearson(std::span<const double> x, std::span<const double> y);
CorrelationResult spearman(std::span<const double> x, std::span<const double> y);

struct TrendBin {
    double mean_score = 0.0;
    double event_rate = 0.0;
    std::size_t n = 0;
};
struct BinnedTrend {
    std::vector<TrendBin> bins;
    CorrelationResult correlation;
    std::vector<std::string> warnings;
};
inline constexpr std::size_t kDefaultTrendBins = 10;
BinnedTrend binned_trend(std::span<const double> scores, std::span<const int> truth,
                         std::size_t n_bins = kDefaultTrendBins);

// --- model comparison -------------------------------------------------------

struct MetricTable {
    std::vector<std::string> models;
    std::vector<std::string> cohorts;
    std::vector<std::vector<double>> value;  // [model][cohort]
};

struct MeanRank {
    std::string model;
    double mean_rank = 0.0;
    std::vector<double> ranks;  // one per cohort
};
struct MeanRankResult {
    std::vector<MeanRank> models;
    std::vector<std::string> cohorts_used;
    std::vector<std::string> warnings;
};
// Ranks within each cohort (1 = best; ties share the average rank). Cohorts
// with a missing (NaN) value for any model are skipped with a warning.
MeanRankResult model_mean_rank(const MetricTable& table, bool higher_is_better = true);

// --- subgroup robustness ----------------------------------------------------

struct ClassShift {
    std::string class_name;
    std::size_t baseline_n = 0;
    std::size_t subgroup_n = 0;
    KsResult ks;
};

struct AucWithCi {
    MaybeReal auc;
    std::optional<resample::BootstrapResult> ci;
};

struct SubgroupShiftReport {
    AucWithCi baseline_auc;
    AucWithCi subgroup_auc;
    std::vector<ClassShift> classes;
    std::vector<std::string> warnings;
};

SubgroupShiftReport subgroup_shift_report(const cohort::Cohort& baseline, const cohort::Cohort& subgroup,
                                          const resample::BootstrapOptions& opts);

// Macro-AUC (binary AUC for two classes) with a case-bootstrap percentile CI.
AucWithCi auc_with_ci(const cohort::Cohort& c, const resample::BootstrapOptions& opts);

}  // namespace triagebench::inference
