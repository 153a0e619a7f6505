#pragma once

// Logistic regression with likelihood-ratio testing, and marginal models
// fitted by generalized estimating equations.

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "triagebench/common.hpp"

namespace triagebench::regression {

struct DesignMatrix {
    std::vector<std::string> names;
    Eigen::MatrixXd X;  // rows = observations

    std::size_t rows() const { return static_cast<std::size_t>(X.rows()); }
    std::size_t cols() const { return static_cast<std::size_t>(X.cols()); }
};

// Builds an n x (1 + k) design whose first column is "(Intercept)".
DesignMatrix with_intercept(const std::vector<std::string>& names, const std::vector<std::vector<double>>& columns);

// Greedy left-to-right selection of linearly independent columns. The
// returned flags mark columns that are linear combinations of earlier ones.
std::vector<bool> aliased_columns(const Eigen::MatrixXd& X, double tol = 1e-9);

struct Coefficient {
    std::string name;
    double estimate = 0.0;
    double se = 0.0;  // model-based (logistic) or robust sandwich (GEE)
    double lo = 0.0, hi = 0.0;
    double p = 1.0;
    // exp(estimate) and exp(CI) under logit/log links, estimate itself under identity
    double effect = 0.0, effect_lo = 0.0, effect_hi = 0.0;
    bool aliased = false;
};

// --- logistic ---------------------------------------------------------------

struct LogisticOptions {
    // Centre and scale non-binary columns so ORs read per standard deviation.
    bool standardize = false;
    int max_iter = 100;
    double tol = 1e-10;
    double level = 0.95;
};

struct LogisticFit {
    std::vector<Coefficient> coefficients;
    double log_likelihood = 0.0;
    std::size_t n = 0;
    std::size_t n_params = 0;  // non-aliased
    int iterations = 0;
    bool converged = false;
    std::vector<double> fitted;  // P(y = 1)
    std::vector<int> y;
    std::vector<std::string> warnings;

    const Coefficient& coef(const std::string& name) const;
};

LogisticFit logistic_fit(const std::vector<int>& y, const DesignMatrix& design, const LogisticOptions& opts = {});

struct LrTest {
    double chi2 = 0.0;
    int df = 0;
    double p = 1.0;
    MaybeReal delta_auroc, delta_auprc;
    double delta_brier = 0.0;
};

// full must nest reduced; both fitted on the same outcome vector.
LrTest lr_test(const LogisticFit& full, const LogisticFit& reduced);

// --- GEE --------------------------------------------------------------------

enum class Link { logit, log, identity };
enum class VarianceFunction { binomial, constant, poisson };
enum class WorkingCorrelation { exchangeable, independence };

std::string to_string(Link l);
std::string to_string(VarianceFunction v);
std::string to_string(WorkingCorrelation c);

struct GeeOptions {
    Link link = Link::logit;
    VarianceFunction variance = VarianceFunction::binomial;
    WorkingCorrelation correlation = WorkingCorrelation::exchangeable;
    int max_iter = 100;
    double tol = 1e-8;
    double level = 0.95;
    // Pins alpha instead of estimating it (0 gives the independence fit).
    std::optional<double> fixed_alpha;
};

struct GeeFit {
    Link link = Link::logit;
    VarianceFunction variance = VarianceFunction::binomial;
    WorkingCorrelation correlation = WorkingCorrelation::exchangeable;
    std::vector<Coefficient> coefficients;
    double alpha = 0.0;  // exchangeable working correlation
    double scale = 1.0;  // Pearson dispersion
    std::size_t n_clusters = 0, n_obs = 0;
    int iterations = 0;
    bool converged = false;
    std::vector<std::string> warnings;

    const Coefficient& coef(const std::string& name) const;
};

// Observations sharing a cluster id form one cluster. Needs >= 2 clusters.
GeeFit gee_fit(const std::vector<double>& y, const DesignMatrix& design, const std::vector<std::string>& clusters,
               const GeeOptions& opts = {});

}  // namespace triagebench::regression
