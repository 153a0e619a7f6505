#include "triagebench/regression.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "triagebench/inference.hpp"
#include "triagebench/metrics.hpp"

namespace triagebench::regression {

using Eigen::MatrixXd;
using Eigen::VectorXd;

DesignMatrix with_intercept(const std::vector<std::string>& names, const std::vector<std::vector<double>>& columns) {
    if (names.size() != columns.size()) throw InputError("design: names and columns differ in count");
    std::size_t n = columns.empty() ? 0 : columns.front().size();
    for (const auto& c : columns) {
        if (c.size() != n) throw InputError("design: columns differ in length");
    }
    DesignMatrix d;
    d.names.push_back("(Intercept)");
    d.names.insert(d.names.end(), names.begin(), names.end());
    d.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(columns.size() + 1));
    d.X.col(0).setOnes();
    for (std::size_t j = 0; j < columns.size(); ++j) {
        for (std::size_t i = 0; i < n; ++i) d.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j + 1)) = columns[j][i];
    }
    return d;
}

std::vector<bool> aliased_columns(const MatrixXd& X, double tol) {
    std::vector<bool> aliased(static_cast<std::size_t>(X.cols()), false);
    std::vector<Eigen::Index> kept;
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        MatrixXd sub(X.rows(), static_cast<Eigen::Index>(kept.size()) + 1);
        for (std::size_t k = 0; k < kept.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = X.col(kept[k]);
        sub.col(sub.cols() - 1) = X.col(j);
        Eigen::ColPivHouseholderQR<MatrixXd> qr(sub);
        qr.setThreshold(tol);
        if (qr.rank() == sub.cols()) {
            kept.push_back(j);
        } else {
            aliased[static_cast<std::size_t>(j)] = true;
        }
    }
    return aliased;
}

namespace {

const Coefficient& find_coef(const std::vector<Coefficient>& cs, const std::string& name) {
    for (const auto& c : cs) {
        if (c.name == name) return c;
    }
    throw InputError("no coefficient named '" + name + "'");
}

Coefficient make_coefficient(const std::string& name, double beta, double se, double level, bool exp_scale) {
    Coefficient c;
    c.name = name;
    c.estimate = beta;
    c.se = se;
    const double z = inference::normal_quantile(1.0 - (1.0 - level) / 2.0);
    c.lo = beta - z * se;
    c.hi = beta + z * se;
    c.p = se > 0.0 ? 2.0 * (1.0 - inference::normal_cdf(std::fabs(beta / se))) : 1.0;
    if (exp_scale) {
        c.effect = std::exp(beta);
        c.effect_lo = std::exp(c.lo);
        c.effect_hi = std::exp(c.hi);
    } else {
        c.effect = beta;
        c.effect_lo = c.lo;
        c.effect_hi = c.hi;
    }
    return c;
}

Coefficient aliased_coefficient(const std::string& name) {
    Coefficient c;
    c.name = name;
    c.aliased = true;
    c.estimate = c.se = c.lo = c.hi = c.effect = c.effect_lo = c.effect_hi = std::nan("");
    c.p = std::nan("");
    return c;
}

// log(1 + exp(x)) without overflow
double log1pexp(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double logistic_loglik(const VectorXd& y, const VectorXd& eta) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) ll += y(i) * eta(i) - log1pexp(eta(i));
    return ll;
}

MatrixXd keep_columns(const MatrixXd& X, const std::vector<bool>& aliased) {
    std::vector<Eigen::Index> keep;
    for (std::size_t j = 0; j < aliased.size(); ++j) {
        if (!aliased[j]) keep.push_back(static_cast<Eigen::Index>(j));
    }
    MatrixXd out(X.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = X.col(keep[k]);
    return out;
}

bool is_binary_column(const VectorXd& c) {
    for (Eigen::Index i = 0; i < c.size(); ++i) {
        if (c(i) != 0.0 && c(i) != 1.0) return false;
    }
    return true;
}

}  // namespace

const Coefficient& LogisticFit::coef(const std::string& name) const { return find_coef(coefficients, name); }
const Coefficient& GeeFit::coef(const std::string& name) const { return find_coef(coefficients, name); }

// ============================================================================
// logistic regression
// ============================================================================

LogisticFit logistic_fit(const std::vector<int>& y_in, const DesignMatrix& design, const LogisticOptions& opts) {
    const auto n = static_cast<Eigen::Index>(y_in.size());
    if (n == 0) throw InputError("logistic: no observations");
    if (design.X.rows() != n) throw InputError("logistic: design rows do not match outcome length");
    if (design.names.size() != design.cols()) throw InputError("logistic: design names do not match columns");
    VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int v = y_in[static_cast<std::size_t>(i)];
        if (v != 0 && v != 1) throw InputError("logistic: outcome must be 0/1 (row " + std::to_string(i) + ")");
        y(i) = v;
    }

    MatrixXd X = design.X;
    LogisticFit fit;
    if (opts.standardize) {
        for (Eigen::Index j = 0; j < X.cols(); ++j) {
            VectorXd c = X.col(j);
            if (is_binary_column(c)) continue;
            const double mean = c.mean();
            const double sd = std::sqrt((c.array() - mean).square().sum() / static_cast<double>(n - 1));
            if (sd > 0.0) X.col(j) = (c.array() - mean) / sd;
        }
    }
    const auto aliased = aliased_columns(X);
    for (std::size_t j = 0; j < aliased.size(); ++j) {
        if (aliased[j]) fit.warnings.push_back("column '" + design.names[j] + "' is collinear with earlier columns; dropped");
    }
    const MatrixXd Xk = keep_columns(X, aliased);
    const Eigen::Index p = Xk.cols();

    VectorXd beta = VectorXd::Zero(p);
    VectorXd eta = Xk * beta;
    double ll = logistic_loglik(y, eta);
    MatrixXd H(p, p);
    for (int it = 1; it <= opts.max_iter; ++it) {
        fit.iterations = it;
        VectorXd mu = eta.unaryExpr([](double e) { return 1.0 / (1.0 + std::exp(-e)); });
        VectorXd w = mu.array() * (1.0 - mu.array());
        VectorXd grad = Xk.transpose() * (y - mu);
        H = Xk.transpose() * w.asDiagonal() * Xk;
        VectorXd step = H.ldlt().solve(grad);
        if (!step.allFinite()) break;
        // halve the step until the log-likelihood does not decrease
        double t = 1.0;
        VectorXd cand;
        double ll_cand = ll;
        for (int h = 0; h < 40; ++h) {
            cand = beta + t * step;
            ll_cand = logistic_loglik(y, Xk * cand);
            if (ll_cand >= ll - 1e-12) break;
            t *= 0.5;
        }
        const double change = (cand - beta).cwiseAbs().maxCoeff();
        beta = cand;
        eta = Xk * beta;
        ll = ll_cand;
        if (change < opts.tol) {
            fit.converged = true;
            break;
        }
    }
    if (!fit.converged) {
        fit.warnings.push_back("Newton iterations did not converge after " + std::to_string(fit.iterations) +
                               " steps (possible separation); last iterate reported");
    }

    VectorXd mu = eta.unaryExpr([](double e) { return 1.0 / (1.0 + std::exp(-e)); });
    VectorXd w = mu.array() * (1.0 - mu.array());
    H = Xk.transpose() * w.asDiagonal() * Xk;
    const MatrixXd cov = H.ldlt().solve(MatrixXd::Identity(p, p));

    Eigen::Index k = 0;
    for (std::size_t j = 0; j < aliased.size(); ++j) {
        if (aliased[j]) {
            fit.coefficients.push_back(aliased_coefficient(design.names[j]));
            continue;
        }
        const double se = std::sqrt(std::max(cov(k, k), 0.0));
        fit.coefficients.push_back(make_coefficient(design.names[j], beta(k), se, opts.level, true));
        ++k;
    }
    fit.log_likelihood = ll;
    fit.n = static_cast<std::size_t>(n);
    fit.n_params = static_cast<std::size_t>(p);
    fit.fitted.assign(mu.data(), mu.data() + mu.size());
    fit.y = y_in;
    return fit;
}

LrTest lr_test(const LogisticFit& full, const LogisticFit& reduced) {
    if (full.y != reduced.y) throw InputError("LR test: models were fitted to different outcomes");
    if (full.n_params < reduced.n_params) throw InputError("LR test: reduced model has more parameters than full");
    LrTest t;
    t.chi2 = std::max(0.0, 2.0 * (full.log_likelihood - reduced.log_likelihood));
    t.df = static_cast<int>(full.n_params - reduced.n_params);
    t.p = t.df > 0 ? inference::chi2_sf(t.chi2, t.df) : 1.0;
    const auto af = metrics::binary_auc(full.fitted, full.y);
    const auto ar = metrics::binary_auc(reduced.fitted, reduced.y);
    if (af && ar) t.delta_auroc = *af - *ar;
    const auto pf = metrics::auprc(full.fitted, full.y);
    const auto pr = metrics::auprc(reduced.fitted, reduced.y);
    if (pf && pr) t.delta_auprc = *pf - *pr;
    t.delta_brier = metrics::brier(full.fitted, full.y) - metrics::brier(reduced.fitted, reduced.y);
    return t;
}

// ============================================================================
// GEE
// ============================================================================

std::string to_string(Link l) {
    switch (l) {
        case Link::logit: return "logit";
        case Link::log: return "log";
        case Link::identity: return "identity";
    }
    return "?";
}

std::string to_string(VarianceFunction v) {
    switch (v) {
        case VarianceFunction::binomial: return "binomial";
        case VarianceFunction::constant: return "constant";
        case VarianceFunction::poisson: return "poisson";
    }
    return "?";
}

std::string to_string(WorkingCorrelation c) {
    return c == WorkingCorrelation::exchangeable ? "exchangeable" : "independence";
}

namespace {

struct LinkEval {
    double mu, dmu;
};

LinkEval apply_link(Link link, double eta) {
    switch (link) {
        case Link::logit: {
            const double m = 1.0 / (1.0 + std::exp(-eta));
            return {m, m * (1.0 - m)};
        }
        case Link::log: {
            const double m = std::exp(eta);
            return {m, m};
        }
        case Link::identity:
            return {eta, 1.0};
    }
    return {eta, 1.0};
}

double variance_of(VarianceFunction v, double mu) {
    switch (v) {
        case VarianceFunction::binomial: return mu * (1.0 - mu);
        case VarianceFunction::constant: return 1.0;
        case VarianceFunction::poisson: return mu;
    }
    return 1.0;
}

struct Cluster {
    std::vector<Eigen::Index> rows;
};

// Pieces of one pass over the clusters at a fixed beta.
struct GeeState {
    VectorXd mu, dmu, sd;  // sd = sqrt(variance)
    double scale = 1.0;
    double alpha = 0.0;
};

GeeState evaluate(const VectorXd& y, const MatrixXd& X, const VectorXd& beta, const std::vector<Cluster>& clusters,
                  const GeeOptions& opts) {
    const Eigen::Index n = y.size();
    const auto p = static_cast<double>(X.cols());
    GeeState s;
    s.mu.resize(n);
    s.dmu.resize(n);
    s.sd.resize(n);
    const VectorXd eta = X * beta;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto le = apply_link(opts.link, eta(i));
        s.mu(i) = le.mu;
        s.dmu(i) = le.dmu;
        s.sd(i) = std::sqrt(std::max(variance_of(opts.variance, le.mu), 1e-300));
    }
    double ss = 0.0, cross = 0.0, pairs = 0.0;
    for (const auto& c : clusters) {
        double sum = 0.0, sq = 0.0;
        for (auto i : c.rows) {
            const double r = (y(i) - s.mu(i)) / s.sd(i);
            sum += r;
            sq += r * r;
        }
        ss += sq;
        cross += (sum * sum - sq) / 2.0;
        const double m = static_cast<double>(c.rows.size());
        pairs += m * (m - 1.0) / 2.0;
    }
    s.scale = ss / std::max(static_cast<double>(n) - p, 1.0);
    if (opts.fixed_alpha) {
        s.alpha = *opts.fixed_alpha;
    } else if (opts.correlation == WorkingCorrelation::independence || pairs - p <= 0.0 || s.scale <= 0.0) {
        s.alpha = 0.0;
    } else {
        s.alpha = cross / (s.scale * (pairs - p));
    }
    return s;
}

// R^{-1} for an m x m exchangeable matrix with parameter a.
MatrixXd exchangeable_inverse(Eigen::Index m, double a) {
    const double c = a / (1.0 + (static_cast<double>(m) - 1.0) * a);
    MatrixXd R = -c * MatrixXd::Ones(m, m);
    R.diagonal().array() += 1.0;
    return R / (1.0 - a);
}

}  // namespace

GeeFit gee_fit(const std::vector<double>& y_in, const DesignMatrix& design, const std::vector<std::string>& cluster_ids,
               const GeeOptions& opts) {
    const auto n = static_cast<Eigen::Index>(y_in.size());
    if (n == 0) throw InputError("GEE: no observations");
    if (design.X.rows() != n || cluster_ids.size() != y_in.size()) {
        throw InputError("GEE: outcome, design and cluster lengths differ");
    }
    std::map<std::string, Cluster> by_id;
    for (Eigen::Index i = 0; i < n; ++i) by_id[cluster_ids[static_cast<std::size_t>(i)]].rows.push_back(i);
    if (by_id.size() < 2) throw Inestimable("GEE: need at least two clusters, found " + std::to_string(by_id.size()));
    std::vector<Cluster> clusters;
    for (auto& [id, c] : by_id) clusters.push_back(std::move(c));

    GeeFit fit;
    fit.link = opts.link;
    fit.variance = opts.variance;
    fit.correlation = opts.correlation;
    fit.n_obs = static_cast<std::size_t>(n);
    fit.n_clusters = clusters.size();

    const VectorXd y = Eigen::Map<const VectorXd>(y_in.data(), n);
    const auto aliased = aliased_columns(design.X);
    for (std::size_t j = 0; j < aliased.size(); ++j) {
        if (aliased[j]) fit.warnings.push_back("column '" + design.names[j] + "' is collinear with earlier columns; dropped");
    }
    const MatrixXd X = keep_columns(design.X, aliased);
    const Eigen::Index p = X.cols();

    // Start at the marginal mean through the intercept column, if there is one.
    VectorXd beta = VectorXd::Zero(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        if ((X.col(j).array() == 1.0).all()) {
            const double m = y.mean();
            if (opts.link == Link::logit && m > 0.0 && m < 1.0) beta(j) = std::log(m / (1.0 - m));
            if (opts.link == Link::log && m > 0.0) beta(j) = std::log(m);
            if (opts.link == Link::identity) beta(j) = m;
            break;
        }
    }

    auto accumulate = [&](const GeeState& s, MatrixXd& H, VectorXd& U, MatrixXd* meat) {
        H.setZero(p, p);
        U.setZero(p);
        if (meat) meat->setZero(p, p);
        for (const auto& c : clusters) {
            const auto m = static_cast<Eigen::Index>(c.rows.size());
            MatrixXd D(m, p);
            VectorXd r(m), sd(m);
            for (Eigen::Index k = 0; k < m; ++k) {
                const auto i = c.rows[static_cast<std::size_t>(k)];
                D.row(k) = s.dmu(i) * X.row(i);
                r(k) = y(i) - s.mu(i);
                sd(k) = s.sd(i);
            }
            // V^{-1} = A^{-1/2} R^{-1} A^{-1/2}
            MatrixXd Vinv = exchangeable_inverse(m, s.alpha);
            const VectorXd inv_sd = sd.cwiseInverse();
            Vinv = inv_sd.asDiagonal() * Vinv * inv_sd.asDiagonal();
            const MatrixXd DtV = D.transpose() * Vinv;
            H += DtV * D;
            const VectorXd u = DtV * r;
            U += u;
            if (meat) *meat += u * u.transpose();
        }
    };

    MatrixXd H(p, p), meat(p, p);
    VectorXd U(p);
    GeeState state;
    for (int it = 1; it <= opts.max_iter; ++it) {
        fit.iterations = it;
        state = evaluate(y, X, beta, clusters, opts);
        accumulate(state, H, U, nullptr);
        const VectorXd step = H.ldlt().solve(U);
        if (!step.allFinite()) break;
        beta += step;
        if (step.cwiseAbs().maxCoeff() < opts.tol) {
            fit.converged = true;
            break;
        }
    }
    if (!fit.converged) {
        fit.warnings.push_back("GEE did not converge after " + std::to_string(fit.iterations) +
                               " iterations; last iterate reported");
    }

    state = evaluate(y, X, beta, clusters, opts);
    accumulate(state, H, U, &meat);
    const MatrixXd bread = H.ldlt().solve(MatrixXd::Identity(p, p));
    const MatrixXd cov = bread * meat * bread;
    fit.alpha = state.alpha;
    fit.scale = state.scale;

    const bool exp_scale = opts.link != Link::identity;
    Eigen::Index k = 0;
    for (std::size_t j = 0; j < aliased.size(); ++j) {
        if (aliased[j]) {
            fit.coefficients.push_back(aliased_coefficient(design.names[j]));
            continue;
        }
        const double se = std::sqrt(std::max(cov(k, k), 0.0));
        fit.coefficients.push_back(make_coefficient(design.names[j], beta(k), se, opts.level, exp_scale));
        ++k;
    }
    return fit;
}

}  // namespace triagebench::regression
