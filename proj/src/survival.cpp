#include "triagebench/survival.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "triagebench/inference.hpp"

namespace triagebench::survival {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

void check_times(std::span<const double> time, std::span<const int> event) {
    if (time.size() != event.size()) throw InputError("survival: time and event lengths differ");
    if (time.empty()) throw InputError("survival: no records");
    for (std::size_t i = 0; i < time.size(); ++i) {
        if (!(time[i] > 0.0)) throw InputError("survival: time must be positive (record " + std::to_string(i) + ")");
        if (event[i] != 0 && event[i] != 1) throw InputError("survival: event must be 0/1 (record " + std::to_string(i) + ")");
    }
}

std::vector<std::size_t> order_by_time(std::span<const double> time) {
    std::vector<std::size_t> o(time.size());
    std::iota(o.begin(), o.end(), 0);
    std::stable_sort(o.begin(), o.end(), [&](std::size_t a, std::size_t b) { return time[a] < time[b]; });
    return o;
}

}  // namespace

// ============================================================================
// Kaplan-Meier and log-rank
// ============================================================================

double KmCurve::at(double t) const {
    double s = 1.0;
    for (std::size_t k = 0; k < time.size() && time[k] <= t; ++k) s = survival[k];
    return s;
}

KmCurve kaplan_meier(std::span<const double> time, std::span<const int> event) {
    check_times(time, event);
    const auto o = order_by_time(time);
    KmCurve c;
    std::size_t at_risk = time.size();
    double s = 1.0;
    std::size_t i = 0;
    while (i < o.size()) {
        const double t = time[o[i]];
        std::size_t d = 0, leaving = 0;
        while (i < o.size() && time[o[i]] == t) {
            d += static_cast<std::size_t>(event[o[i]]);
            ++leaving;
            ++i;
        }
        if (d > 0) {
            s *= 1.0 - static_cast<double>(d) / static_cast<double>(at_risk);
            c.time.push_back(t);
            c.survival.push_back(s);
            c.at_risk.push_back(at_risk);
            c.events.push_back(d);
        }
        at_risk -= leaving;
    }
    return c;
}

LogRank logrank_test(std::span<const double> time, std::span<const int> event, std::span<const int> group) {
    check_times(time, event);
    if (group.size() != time.size()) throw InputError("log-rank: group length differs");
    std::size_t na = 0, nb = 0;
    for (int g : group) {
        if (g != 0 && g != 1) throw InputError("log-rank: group must be 0/1");
        (g ? nb : na) += 1;
    }
    if (na == 0 || nb == 0) throw InputError("log-rank: both groups must be non-empty");

    const auto o = order_by_time(time);
    double n = static_cast<double>(time.size()), n_a = static_cast<double>(na);
    LogRank r;
    double var = 0.0;
    std::size_t i = 0;
    while (i < o.size()) {
        const double t = time[o[i]];
        double d = 0.0, d_a = 0.0, leave = 0.0, leave_a = 0.0;
        while (i < o.size() && time[o[i]] == t) {
            const bool a = group[o[i]] == 0;
            if (event[o[i]]) {
                d += 1.0;
                if (a) d_a += 1.0;
            }
            leave += 1.0;
            if (a) leave_a += 1.0;
            ++i;
        }
        if (d > 0.0) {
            r.observed_a += d_a;
            r.expected_a += d * n_a / n;
            if (n > 1.0) var += d * (n_a / n) * (1.0 - n_a / n) * (n - d) / (n - 1.0);
        }
        n -= leave;
        n_a -= leave_a;
    }
    if (var > 0.0) {
        const double diff = r.observed_a - r.expected_a;
        r.chi2 = diff * diff / var;
        r.p = inference::chi2_sf(r.chi2, 1.0);
    }
    return r;
}

// ============================================================================
// Cox proportional hazards
// ============================================================================

namespace {

struct CoxEval {
    double ll = 0.0;
    VectorXd grad;
    MatrixXd info;  // observed information (negative Hessian)
};

// Breslow partial likelihood, risk set {time >= t}. `o` orders by time.
CoxEval cox_eval(std::span<const double> time, std::span<const int> event, const std::vector<std::size_t>& o,
                 const MatrixXd& X, const VectorXd& beta, bool derivs) {
    const Eigen::Index p = X.cols();
    CoxEval e;
    if (derivs) {
        e.grad = VectorXd::Zero(p);
        e.info = MatrixXd::Zero(p, p);
    }
    double s0 = 0.0;
    VectorXd s1 = VectorXd::Zero(p);
    MatrixXd s2 = MatrixXd::Zero(p, p);
    const VectorXd eta = X * beta;
    std::size_t hi = o.size();
    while (hi > 0) {
        // [lo, hi) is the tie group at the current time, walking downward
        std::size_t lo = hi;
        const double t = time[o[hi - 1]];
        while (lo > 0 && time[o[lo - 1]] == t) --lo;
        double d = 0.0;
        VectorXd xsum = VectorXd::Zero(p);
        double eta_sum = 0.0;
        for (std::size_t k = lo; k < hi; ++k) {
            const auto i = static_cast<Eigen::Index>(o[k]);
            const double w = std::exp(eta(i));
            s0 += w;
            if (derivs) {
                s1 += w * X.row(i).transpose();
                s2 += w * X.row(i).transpose() * X.row(i);
            }
            if (event[o[k]]) {
                d += 1.0;
                eta_sum += eta(i);
                if (derivs) xsum += X.row(i).transpose();
            }
        }
        if (d > 0.0) {
            e.ll += eta_sum - d * std::log(s0);
            if (derivs) {
                const VectorXd mean = s1 / s0;
                e.grad += xsum - d * mean;
                e.info += d * (s2 / s0 - mean * mean.transpose());
            }
        }
        hi = lo;
    }
    return e;
}

}  // namespace

double cox_log_partial_likelihood(std::span<const double> time, std::span<const int> event, const MatrixXd& X,
                                  const VectorXd& beta) {
    return cox_eval(time, event, order_by_time(time), X, beta, false).ll;
}

const regression::Coefficient& CoxFit::coef(const std::string& name) const {
    for (const auto& c : coefficients) {
        if (c.name == name) return c;
    }
    throw InputError("no Cox coefficient named '" + name + "'");
}

double CoxFit::cumhaz_at(double t) const {
    double h = 0.0;
    for (std::size_t k = 0; k < baseline_time.size() && baseline_time[k] <= t; ++k) h = baseline_cumhaz[k];
    return h;
}

CoxFit cox_fit(std::span<const double> time, std::span<const int> event, const regression::DesignMatrix& design,
               const CoxOptions& opts) {
    check_times(time, event);
    if (design.X.rows() != static_cast<Eigen::Index>(time.size())) throw InputError("Cox: design rows differ from records");
    if (design.X.cols() == 0) throw InputError("Cox: no covariates");
    if (std::accumulate(event.begin(), event.end(), 0) == 0) throw Inestimable("Cox: no events");
    const Eigen::Index p = design.X.cols();
    for (Eigen::Index j = 0; j < p; ++j) {
        const auto col = design.X.col(j);
        if ((col.array() == col(0)).all()) {
            throw InputError("Cox: covariate '" + design.names[static_cast<std::size_t>(j)] + "' is constant");
        }
    }

    CoxFit fit;
    fit.names = design.names;
    const VectorXd means = design.X.colwise().mean();
    const MatrixXd X = design.X.rowwise() - means.transpose();
    const auto o = order_by_time(time);

    VectorXd beta = VectorXd::Zero(p);
    CoxEval cur = cox_eval(time, event, o, X, beta, true);
    fit.null_log_partial_likelihood = cur.ll;
    for (int it = 1; it <= opts.max_iter; ++it) {
        fit.iterations = it;
        const VectorXd step = cur.info.ldlt().solve(cur.grad);
        if (!step.allFinite()) break;
        double t = 1.0;
        VectorXd cand;
        CoxEval next;
        for (int h = 0; h < 40; ++h) {
            cand = beta + t * step;
            next = cox_eval(time, event, o, X, cand, true);
            if (std::isfinite(next.ll) && next.ll >= cur.ll - 1e-12) break;
            t *= 0.5;
        }
        const double change = (cand - beta).cwiseAbs().maxCoeff();
        beta = cand;
        cur = next;
        if (change < opts.tol) {
            fit.converged = true;
            break;
        }
    }
    if (!fit.converged || beta.cwiseAbs().maxCoeff() > 15.0) {
        fit.monotone_likelihood = true;
        fit.warnings.push_back("partial likelihood appears monotone (coefficients diverging); estimates unreliable");
    }
    fit.log_partial_likelihood = cur.ll;

    const MatrixXd cov = cur.info.ldlt().solve(MatrixXd::Identity(p, p));
    for (Eigen::Index j = 0; j < p; ++j) {
        const double se = std::sqrt(std::max(cov(j, j), 0.0));
        regression::Coefficient c;
        c.name = design.names[static_cast<std::size_t>(j)];
        c.estimate = beta(j);
        c.se = se;
        const double z = inference::normal_quantile(1.0 - (1.0 - opts.level) / 2.0);
        c.lo = beta(j) - z * se;
        c.hi = beta(j) + z * se;
        c.p = se > 0.0 ? 2.0 * (1.0 - inference::normal_cdf(std::fabs(beta(j) / se))) : 1.0;
        c.effect = std::exp(beta(j));
        c.effect_lo = std::exp(c.lo);
        c.effect_hi = std::exp(c.hi);
        fit.coefficients.push_back(c);
    }
    fit.beta.assign(beta.data(), beta.data() + p);
    fit.means.assign(means.data(), means.data() + p);

    // Breslow baseline for centred covariates, shifted to covariates = 0.
    const VectorXd w = (X * beta).array().exp();
    const double shift = std::exp(-means.dot(beta));
    double risk_sum = w.sum();
    double cum = 0.0;
    std::size_t i = 0;
    while (i < o.size()) {
        const double t = time[o[i]];
        double d = 0.0, leaving = 0.0;
        while (i < o.size() && time[o[i]] == t) {
            d += event[o[i]];
            leaving += w(static_cast<Eigen::Index>(o[i]));
            ++i;
        }
        if (d > 0.0) {
            cum += d / risk_sum;
            fit.baseline_time.push_back(t);
            fit.baseline_cumhaz.push_back(cum * shift);
        }
        risk_sum -= leaving;
    }
    return fit;
}

std::vector<HrBootstrap> cox_bootstrap(std::span<const double> time, std::span<const int> event,
                                       const regression::DesignMatrix& X, const resample::BootstrapOptions& opts) {
    const auto full = cox_fit(time, event, X);
    const std::size_t p = X.cols();
    resample::VectorStatistic stat = [&](std::span<const std::size_t> idx) {
        std::vector<MaybeReal> out(p);
        std::vector<double> t;
        std::vector<int> e;
        regression::DesignMatrix sub;
        sub.names = X.names;
        sub.X.resize(static_cast<Eigen::Index>(idx.size()), X.X.cols());
        for (std::size_t k = 0; k < idx.size(); ++k) {
            t.push_back(time[idx[k]]);
            e.push_back(event[idx[k]]);
            sub.X.row(static_cast<Eigen::Index>(k)) = X.X.row(static_cast<Eigen::Index>(idx[k]));
        }
        try {
            const auto f = cox_fit(t, e, sub);
            if (f.monotone_likelihood) return out;
            for (std::size_t j = 0; j < p; ++j) out[j] = f.beta[j];
        } catch (const std::exception&) {
            // degenerate resample: no events or a constant column
        }
        return out;
    };
    const auto reps = resample::bootstrap_replicates_multi(stat, time.size(), opts);
    std::vector<HrBootstrap> out;
    for (std::size_t j = 0; j < p; ++j) {
        std::vector<MaybeReal> beta_j, hr_j;
        for (const auto& r : reps) {
            beta_j.push_back(r[j]);
            hr_j.push_back(r[j] ? MaybeReal(std::exp(*r[j])) : std::nullopt);
        }
        HrBootstrap h;
        h.name = X.names[j];
        h.hr = resample::percentile_interval(std::exp(full.beta[j]), hr_j, opts.level);
        h.p = resample::zero_crossing_pvalue(beta_j, opts.n_resamples);
        out.push_back(h);
    }
    return out;
}

// ============================================================================
// concordance
// ============================================================================

namespace {

class Fenwick {
public:
    explicit Fenwick(std::size_t n) : tree_(n + 1, 0) {}
    void add(std::size_t i) {
        for (++i; i < tree_.size(); i += i & (~i + 1)) ++tree_[i];
    }
    // count of inserted positions < i
    std::size_t prefix(std::size_t i) const {
        std::size_t s = 0;
        for (; i > 0; i -= i & (~i + 1)) s += tree_[i];
        return s;
    }

private:
    std::vector<std::size_t> tree_;
};

}  // namespace

CIndex concordance_index(std::span<const double> risk, std::span<const double> time, std::span<const int> event) {
    if (risk.size() != time.size() || time.size() != event.size()) throw InputError("C-index: input lengths differ");
    const auto levels = [&] {
        std::vector<double> u(risk.begin(), risk.end());
        std::sort(u.begin(), u.end());
        u.erase(std::unique(u.begin(), u.end()), u.end());
        return u;
    }();
    auto rank_of = [&](double r) {
        return static_cast<std::size_t>(std::lower_bound(levels.begin(), levels.end(), r) - levels.begin());
    };
    const auto o = order_by_time(time);
    Fenwick fw(levels.size());
    std::size_t inserted = 0;
    CIndex c;
    c.concordant = 0.0;
    std::size_t hi = o.size();
    while (hi > 0) {
        std::size_t lo = hi;
        const double t = time[o[hi - 1]];
        while (lo > 0 && time[o[lo - 1]] == t) --lo;
        // censored at t survive past the events at t
        for (std::size_t k = lo; k < hi; ++k) {
            if (!event[o[k]]) {
                fw.add(rank_of(risk[o[k]]));
                ++inserted;
            }
        }
        for (std::size_t k = lo; k < hi; ++k) {
            if (!event[o[k]]) continue;
            const std::size_t rk = rank_of(risk[o[k]]);
            const std::size_t below = fw.prefix(rk);
            const std::size_t equal = fw.prefix(rk + 1) - below;
            c.concordant += static_cast<double>(below) + 0.5 * static_cast<double>(equal);
            c.comparable += inserted;
        }
        for (std::size_t k = lo; k < hi; ++k) {
            if (event[o[k]]) {
                fw.add(rank_of(risk[o[k]]));
                ++inserted;
            }
        }
        hi = lo;
    }
    if (c.comparable == 0) throw Inestimable("C-index: no comparable pairs");
    c.value = c.concordant / static_cast<double>(c.comparable);
    return c;
}

resample::BootstrapResult fold_cindex_bootstrap(std::span<const double> risk, std::span<const double> time,
                                                std::span<const int> event, std::span<const int> fold,
                                                const resample::BootstrapOptions& opts) {
    if (fold.size() != risk.size()) throw InputError("fold C-index: fold length differs");
    std::map<int, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < fold.size(); ++i) {
        if (fold[i] >= 0) members[fold[i]].push_back(i);
    }
    if (members.empty()) throw InputError("fold C-index: no fold assignments");
    std::vector<MaybeReal> pooled;
    double point = 0.0;
    for (const auto& [f, idx] : members) {
        std::vector<double> r, t;
        std::vector<int> e;
        for (auto i : idx) {
            r.push_back(risk[i]);
            t.push_back(time[i]);
            e.push_back(event[i]);
        }
        point += concordance_index(r, t, e).value;
        auto fo = opts;
        fo.seed = resample::stream_seed(opts.seed, 0xF01D0000ULL + static_cast<std::uint64_t>(f));
        fo.strata.clear();
        resample::IndexStatistic stat = [&](std::span<const std::size_t> sidx) -> MaybeReal {
            std::vector<double> rr, tt;
            std::vector<int> ee;
            for (auto k : sidx) {
                rr.push_back(r[k]);
                tt.push_back(t[k]);
                ee.push_back(e[k]);
            }
            try {
                return concordance_index(rr, tt, ee).value;
            } catch (const Inestimable&) {
                return std::nullopt;
            }
        };
        const auto reps = resample::bootstrap_replicates(stat, idx.size(), fo);
        pooled.insert(pooled.end(), reps.begin(), reps.end());
    }
    point /= static_cast<double>(members.size());
    return resample::percentile_interval(point, pooled, opts.level);
}

// ============================================================================
// grouping and adjusted curves
// ============================================================================

RiskGroups risk_dichotomize(std::span<const double> risk, std::optional<double> cut) {
    if (risk.size() < 2) throw InputError("risk grouping: need at least two cases");
    RiskGroups g;
    if (cut) {
        g.cut = *cut;
    } else {
        std::vector<double> s(risk.begin(), risk.end());
        std::sort(s.begin(), s.end());
        g.cut = resample::quantile_sorted(s, 0.5);
    }
    for (double r : risk) g.high.push_back(r > g.cut ? 1 : 0);
    return g;
}

std::vector<AdjustedCurve> adjusted_curves(const CoxFit& fit, const regression::DesignMatrix& X,
                                           const std::string& group_column, const std::vector<double>& levels) {
    const auto it = std::find(fit.names.begin(), fit.names.end(), group_column);
    if (it == fit.names.end()) throw InputError("adjusted curves: model has no covariate '" + group_column + "'");
    if (X.names != fit.names) throw InputError("adjusted curves: design columns differ from the fitted model");
    const auto g = static_cast<Eigen::Index>(it - fit.names.begin());
    const VectorXd beta = Eigen::Map<const VectorXd>(fit.beta.data(), static_cast<Eigen::Index>(fit.beta.size()));
    std::vector<AdjustedCurve> out;
    for (double level : levels) {
        MatrixXd Xg = X.X;
        Xg.col(g).setConstant(level);
        const VectorXd rel = (Xg * beta).array().exp();
        AdjustedCurve c;
        c.group_value = level;
        c.time.push_back(0.0);
        c.survival.push_back(1.0);
        for (std::size_t k = 0; k < fit.baseline_time.size(); ++k) {
            const double h0 = fit.baseline_cumhaz[k];
            c.time.push_back(fit.baseline_time[k]);
            c.survival.push_back((-h0 * rel.array()).exp().mean());
        }
        out.push_back(std::move(c));
    }
    return out;
}

// ============================================================================
// record plumbing
// ============================================================================

std::vector<double> average_fold_scores(const std::vector<cohort::SurvivalRecord>& records) {
    std::vector<double> out;
    for (const auto& r : records) {
        if (r.fold_model_scores.empty()) throw InputError("record '" + r.case_id + "' has no fold-model scores");
        out.push_back(std::accumulate(r.fold_model_scores.begin(), r.fold_model_scores.end(), 0.0) /
                      static_cast<double>(r.fold_model_scores.size()));
    }
    return out;
}

SurvivalData survival_data(const std::vector<cohort::SurvivalRecord>& records) {
    SurvivalData d;
    const bool use_folds = std::all_of(records.begin(), records.end(),
                                       [](const auto& r) { return !r.risk_score && !r.fold_model_scores.empty(); });
    std::vector<double> averaged;
    if (use_folds && !records.empty()) averaged = average_fold_scores(records);
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        d.time.push_back(r.time);
        d.event.push_back(r.event);
        d.fold.push_back(r.fold.value_or(-1));
        if (r.risk_score) {
            d.risk.push_back(*r.risk_score);
        } else if (use_folds) {
            d.risk.push_back(averaged[i]);
        }
    }
    if (!d.risk.empty() && d.risk.size() != records.size()) {
        throw InputError("survival: risk_score is missing for some records");
    }
    return d;
}

regression::DesignMatrix covariate_design(const std::vector<cohort::SurvivalRecord>& records,
                                          const std::vector<std::string>& covariates) {
    regression::DesignMatrix d;
    std::vector<std::vector<double>> cols;
    for (const auto& name : covariates) {
        bool categorical = false;
        std::set<std::string> levels;
        for (const auto& r : records) {
            auto it = r.covariates.find(name);
            if (it == r.covariates.end()) throw InputError("record '" + r.case_id + "' lacks covariate '" + name + "'");
            if (const auto* s = std::get_if<std::string>(&it->second)) {
                categorical = true;
                levels.insert(*s);
            }
        }
        if (!categorical) {
            std::vector<double> c;
            for (const auto& r : records) c.push_back(std::get<double>(r.covariates.at(name)));
            d.names.push_back(name);
            cols.push_back(std::move(c));
            continue;
        }
        std::vector<std::string> lv(levels.begin(), levels.end());
        for (std::size_t k = 1; k < lv.size(); ++k) {
            std::vector<double> c;
            for (const auto& r : records) {
                const auto& v = r.covariates.at(name);
                const auto* s = std::get_if<std::string>(&v);
                c.push_back(s && *s == lv[k] ? 1.0 : 0.0);
            }
            d.names.push_back(name + "=" + lv[k]);
            cols.push_back(std::move(c));
        }
    }
    d.X.resize(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
        for (std::size_t i = 0; i < records.size(); ++i) {
            d.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cols[j][i];
        }
    }
    return d;
}

}  // namespace triagebench::survival
