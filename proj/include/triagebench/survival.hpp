#pragma once

// Kaplan-Meier, log-rank, Cox proportional hazards (Breslow ties),
// Harrell's C-index, risk grouping and directly adjusted survival curves.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "triagebench/cohort.hpp"
#include "triagebench/regression.hpp"
#include "triagebench/resample.hpp"

namespace triagebench::survival {

struct KmCurve {
    std::vector<double> time;  // distinct event times, ascending
    std::vector<double> survival;
    std::vector<std::size_t> at_risk;
    std::vector<std::size_t> events;

    // Step function value at t (1 before the first event).
    double at(double t) const;
};

// Censoring at an event time is applied after that time's events.
KmCurve kaplan_meier(std::span<const double> time, std::span<const int> event);

struct LogRank {
    double chi2 = 0.0;
    double p = 1.0;
    double observed_a = 0.0, expected_a = 0.0;
};

// group: 0 = a, 1 = b
LogRank logrank_test(std::span<const double> time, std::span<const int> event, std::span<const int> group);

// --- Cox --------------------------------------------------------------------

struct CoxOptions {
    int max_iter = 50;
    double tol = 1e-9;
    double level = 0.95;
};

struct CoxFit {
    std::vector<std::string> names;
    std::vector<regression::Coefficient> coefficients;  // effect = HR
    std::vector<double> beta;
    std::vector<double> means;  // covariate means used for internal centring
    double log_partial_likelihood = 0.0;
    double null_log_partial_likelihood = 0.0;
    // Breslow cumulative baseline hazard at covariates = 0
    std::vector<double> baseline_time;
    std::vector<double> baseline_cumhaz;
    int iterations = 0;
    bool converged = false;
    bool monotone_likelihood = false;
    std::vector<std::string> warnings;

    const regression::Coefficient& coef(const std::string& name) const;
    double cumhaz_at(double t) const;
};

// X holds covariates only (no intercept). Throws InputError on a constant
// column and Inestimable when there are no events.
CoxFit cox_fit(std::span<const double> time, std::span<const int> event, const regression::DesignMatrix& X,
               const CoxOptions& opts = {});

// Breslow log partial likelihood at beta; shared with test oracles.
double cox_log_partial_likelihood(std::span<const double> time, std::span<const int> event, const Eigen::MatrixXd& X,
                                  const Eigen::VectorXd& beta);

struct HrBootstrap {
    std::string name;
    resample::BootstrapResult hr;  // percentile CI on the HR scale
    double p = 1.0;                // zero-crossing p on log-HR
};

// Case-bootstrap of every coefficient; failed refits count as degenerate.
std::vector<HrBootstrap> cox_bootstrap(std::span<const double> time, std::span<const int> event,
                                       const regression::DesignMatrix& X, const resample::BootstrapOptions& opts);

// --- discrimination -----------------------------------------------------------

struct CIndex {
    double value = 0.5;
    double concordant = 0.0;  // ties counted 1/2
    std::size_t comparable = 0;
};

// Pair (i, j) is comparable when i has an event and t_i < t_j, or t_i = t_j
// with j censored. Higher risk for the earlier event is concordant.
CIndex concordance_index(std::span<const double> risk, std::span<const double> time, std::span<const int> event);

// Fold-wise bootstrap: n_resamples per fold, replicates pooled; the point
// estimate is the mean of the per-fold C-indices.
resample::BootstrapResult fold_cindex_bootstrap(std::span<const double> risk, std::span<const double> time,
                                                std::span<const int> event, std::span<const int> fold,
                                                const resample::BootstrapOptions& opts);

// --- grouping and adjusted curves ---------------------------------------------

struct RiskGroups {
    double cut = 0.0;
    std::vector<int> high;  // 1 when risk > cut
};

// Median split (ties go to the low group) unless a cut is supplied.
RiskGroups risk_dichotomize(std::span<const double> risk, std::optional<double> cut = {});

struct AdjustedCurve {
    double group_value = 0.0;
    std::vector<double> time;
    std::vector<double> survival;
};

// S_g(t) = mean_i S0(t)^exp(x_i' beta) with the group column forced to each
// value in `levels`.
std::vector<AdjustedCurve> adjusted_curves(const CoxFit& fit, const regression::DesignMatrix& X,
                                           const std::string& group_column, const std::vector<double>& levels);

// --- record plumbing ----------------------------------------------------------

struct SurvivalData {
    std::vector<double> time;
    std::vector<int> event;
    std::vector<double> risk;  // from risk_score, or the mean of fold-model scores
    std::vector<int> fold;     // -1 when absent
};

SurvivalData survival_data(const std::vector<cohort::SurvivalRecord>& records);

// Mean of each record's fold-model scores.
std::vector<double> average_fold_scores(const std::vector<cohort::SurvivalRecord>& records);

// Design over the named covariates: numeric ones as-is, categorical ones as
// indicator columns for every non-reference (sorted-first) level.
regression::DesignMatrix covariate_design(const std::vector<cohort::SurvivalRecord>& records,
                                          const std::vector<std::string>& covariates);

}  // namespace triagebench::survival
