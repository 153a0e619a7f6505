#include "triagebench/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "triagebench/metrics.hpp"

namespace triagebench::inference {

namespace bm = boost::math;

double normal_cdf(double z) { return bm::cdf(bm::normal(), z); }

double normal_quantile(double p) { return bm::quantile(bm::normal(), p); }

double chi2_sf(double x, double df) {
    if (x <= 0.0) return 1.0;
    return bm::cdf(bm::complement(bm::chi_squared(df), x));
}

double student_t_two_sided(double t, double df) {
    if (std::isinf(t)) return 0.0;
    return std::min(1.0, 2.0 * bm::cdf(bm::complement(bm::students_t(df), std::fabs(t))));
}

// ============================================================================
// Kolmogorov-Smirnov
// ============================================================================

namespace {

// max over pooled values of |i*n - j*m|, i.e. D scaled by m*n
long long ks_numerator(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const auto m = static_cast<long long>(a.size());
    const auto n = static_cast<long long>(b.size());
    long long i = 0, j = 0, best = 0;
    while (i < m || j < n) {
        double x;
        if (i < m && j < n) {
            x = std::min(a[i], b[j]);
        } else if (i < m) {
            x = a[i];
        } else {
            x = b[j];
        }
        while (i < m && a[i] <= x) ++i;
        while (j < n && b[j] <= x) ++j;
        best = std::max(best, std::llabs(i * n - j * m));
    }
    return best;
}

}  // namespace

double ks_exact_sf(std::size_t m, std::size_t n, long long d_numerator) {
    if (m == 0 || n == 0) throw InputError("KS: empty sample");
    if (d_numerator <= 0) return 1.0;
    const auto M = static_cast<long long>(m);
    const auto N = static_cast<long long>(n);
    auto inside = [&](long long i, long long j) { return std::llabs(i * N - j * M) < d_numerator; };

    // u[j] = probability that a uniformly random arrangement reaches (i, j)
    // without leaving the band; `escaped` collects the mass that leaves it.
    std::vector<double> u(n + 1, 0.0);
    double escaped = 0.0;
    u[0] = 1.0;
    for (long long i = 0; i <= M; ++i) {
        for (long long j = 0; j <= N; ++j) {
            if (i == 0 && j == 0) continue;
            double v = 0.0;
            const double remaining_up = static_cast<double>(M + N - i - j + 1);
            if (i > 0) {
                // arrive by an a-step from (i-1, j); u[j] still holds row i-1
                v += u[j] * static_cast<double>(M - i + 1) / remaining_up;
            }
            if (j > 0) {
                v += u[j - 1] * static_cast<double>(N - j + 1) / remaining_up;
            }
            if (inside(i, j)) {
                u[j] = v;
            } else {
                escaped += v;
                u[j] = 0.0;
            }
        }
    }
    return std::clamp(escaped, 0.0, 1.0);
}

double kolmogorov_sf(double lambda) {
    if (lambda <= 0.0) return 1.0;
    // The alternating series is useless for tiny lambda, where Q is 1 to
    // double precision anyway.
    if (lambda < 0.2) return 1.0;
    double s = 0.0;
    for (int j = 1; j <= 100; ++j) {
        const double term = std::exp(-2.0 * j * j * lambda * lambda);
        s += (j % 2 == 1) ? term : -term;
    }
    return std::clamp(2.0 * s, 0.0, 1.0);
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b, KsMethod method) {
    if (a.empty() || b.empty()) throw InputError("KS: empty sample");
    KsResult r;
    r.n1 = a.size();
    r.n2 = b.size();
    const long long num = ks_numerator({a.begin(), a.end()}, {b.begin(), b.end()});
    const double mn = static_cast<double>(r.n1) * static_cast<double>(r.n2);
    r.d = static_cast<double>(num) / mn;
    if (method == KsMethod::automatic) {
        method = mn <= kKsExactLimit ? KsMethod::exact : KsMethod::asymptotic;
    }
    r.method = method;
    if (method == KsMethod::exact) {
        r.p = ks_exact_sf(r.n1, r.n2, num);
    } else {
        const double ne = mn / static_cast<double>(r.n1 + r.n2);
        r.p = kolmogorov_sf(std::sqrt(ne) * r.d);
    }
    // keep p in (0, 1]
    r.p = std::max(r.p, std::numeric_limits<double>::min());
    return r;
}

// ============================================================================
// McNemar
// ============================================================================

McNemarResult mcnemar(int b, int c, McNemarMode mode) {
    if (b < 0 || c < 0) throw InputError("McNemar: negative discordant count");
    if (b + c == 0) throw InputError("McNemar: no discordant pairs (b + c = 0)");
    McNemarResult r;
    r.b = b;
    r.c = c;
    if (mode == McNemarMode::automatic) mode = (b + c < 25) ? McNemarMode::exact : McNemarMode::chi2;
    r.mode = mode;
    if (mode == McNemarMode::exact) {
        const bm::binomial dist(b + c, 0.5);
        r.p = std::min(1.0, 2.0 * bm::cdf(dist, std::min(b, c)));
    } else {
        const double diff = std::fabs(static_cast<double>(b - c)) - 1.0;
        const double stat = std::max(diff, 0.0) * std::max(diff, 0.0) / static_cast<double>(b + c);
        r.statistic = stat;
        r.p = chi2_sf(stat, 1.0);
    }
    return r;
}

// ============================================================================
// agreement
// ============================================================================

std::string kappa_band(double kappa) {
    if (kappa <= 0.20) return "poor";
    if (kappa <= 0.40) return "fair";
    if (kappa <= 0.60) return "moderate";
    if (kappa <= 0.80) return "substantial";
    return "almost perfect";
}

ProportionCi wilson_interval(std::size_t successes, std::size_t n, double level) {
    if (n == 0) throw InputError("Wilson interval: n = 0");
    if (successes > n) throw InputError("Wilson interval: successes exceed n");
    const double z = normal_quantile(1.0 - (1.0 - level) / 2.0);
    const double nn = static_cast<double>(n);
    const double p = static_cast<double>(successes) / nn;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / nn;
    const double center = (p + z2 / (2.0 * nn)) / denom;
    const double half = z / denom * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
    const double lo = successes == 0 ? 0.0 : std::max(0.0, center - half);
    const double hi = successes == n ? 1.0 : std::min(1.0, center + half);
    return {p, lo, hi};
}

KappaResult cohen_kappa(std::span<const std::pair<std::string, std::string>> pairs) {
    if (pairs.empty()) throw InputError("Cohen's kappa: no pairs");
    std::set<std::string> cats;
    for (const auto& [x, y] : pairs) {
        cats.insert(x);
        cats.insert(y);
    }
    std::map<std::string, double> row, col;
    std::size_t agree = 0;
    for (const auto& [x, y] : pairs) {
        row[x] += 1.0;
        col[y] += 1.0;
        if (x == y) ++agree;
    }
    const double n = static_cast<double>(pairs.size());
    double pe = 0.0;
    for (const auto& cat : cats) pe += (row[cat] / n) * (col[cat] / n);
    const double po = static_cast<double>(agree) / n;
    if (std::fabs(1.0 - pe) < 1e-15) {
        throw Inestimable("Cohen's kappa undefined: chance agreement is 1 (single category)");
    }
    KappaResult r;
    r.kappa = (po - pe) / (1.0 - pe);
    r.observed_agreement = po;
    r.expected_agreement = pe;
    r.n = pairs.size();
    r.interpretation = kappa_band(r.kappa);
    r.concordance = wilson_interval(agree, pairs.size());
    return r;
}

KappaResult cohen_kappa_2x2(std::size_t pp, std::size_t pn, std::size_t np, std::size_t nn) {
    std::vector<std::pair<std::string, std::string>> pairs;
    pairs.reserve(pp + pn + np + nn);
    pairs.insert(pairs.end(), pp, {"positive", "positive"});
    pairs.insert(pairs.end(), pn, {"positive", "negative"});
    pairs.insert(pairs.end(), np, {"negative", "positive"});
    pairs.insert(pairs.end(), nn, {"negative", "negative"});
    return cohen_kappa(pairs);
}

KappaResult fleiss_kappa(const CountMatrix& ratings) {
    if (ratings.empty()) throw InputError("Fleiss' kappa: no cases");
    const std::size_t k = ratings.front().size();
    if (k == 0) throw InputError("Fleiss' kappa: no categories");
    long long raters = -1;
    std::vector<double> totals(k, 0.0);
    double pbar = 0.0;
    for (std::size_t i = 0; i < ratings.size(); ++i) {
        const auto& row = ratings[i];
        if (row.size() != k) throw InputError("Fleiss' kappa: ragged count matrix at case " + std::to_string(i));
        long long s = 0, sq = 0;
        for (std::size_t j = 0; j < k; ++j) {
            if (row[j] < 0) throw InputError("Fleiss' kappa: negative count at case " + std::to_string(i));
            s += row[j];
            sq += static_cast<long long>(row[j]) * row[j];
            totals[j] += row[j];
        }
        if (raters < 0) raters = s;
        if (s != raters) {
            throw InputError("Fleiss' kappa: case " + std::to_string(i) + " has " + std::to_string(s) +
                             " ratings, expected " + std::to_string(raters));
        }
        if (raters < 2) throw InputError("Fleiss' kappa: need at least two raters per case");
        pbar += static_cast<double>(sq - s) / static_cast<double>(s * (s - 1));
    }
    const double N = static_cast<double>(ratings.size());
    pbar /= N;
    double pe = 0.0;
    for (double t : totals) {
        const double p = t / (N * static_cast<double>(raters));
        pe += p * p;
    }
    if (std::fabs(1.0 - pe) < 1e-15) {
        throw Inestimable("Fleiss' kappa undefined: every rating falls in one category");
    }
    KappaResult r;
    r.kappa = (pbar - pe) / (1.0 - pe);
    r.observed_agreement = pbar;
    r.expected_agreement = pe;
    r.n = ratings.size();
    r.interpretation = kappa_band(r.kappa);
    return r;
}

// ============================================================================
// rank tests and correlation
// ============================================================================

std::vector<double> average_ranks(std::span<const double> x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(x.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
        i = j + 1;
    }
    return ranks;
}

WilcoxonResult wilcoxon_signed_rank_one_sided(std::span<const double> differences) {
    std::vector<double> d;
    for (double v : differences) {
        if (std::isnan(v)) throw InputError("Wilcoxon: NaN difference");
        if (v != 0.0) d.push_back(v);
    }
    if (d.empty()) throw InputError("Wilcoxon: all differences are zero");
    std::vector<double> mag(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) mag[i] = std::fabs(d[i]);
    const auto ranks = average_ranks(mag);

    WilcoxonResult r;
    r.n_nonzero = d.size();
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d[i] > 0) r.w_plus += ranks[i];
    }
    const std::size_t n = d.size();
    if (n <= kWilcoxonExactMax) {
        // Average ranks are multiples of 1/2, so doubled ranks are integers.
        std::vector<int> r2(n);
        int total = 0;
        for (std::size_t i = 0; i < n; ++i) {
            r2[i] = static_cast<int>(std::lround(2.0 * ranks[i]));
            total += r2[i];
        }
        std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
        count[0] = 1.0;
        for (int w : r2) {
            for (int s = total; s >= w; --s) count[s] += count[s - w];
        }
        const int obs = static_cast<int>(std::lround(2.0 * r.w_plus));
        double upper = 0.0;
        for (int s = obs; s <= total; ++s) upper += count[s];
        r.exact = true;
        r.p = upper / std::ldexp(1.0, static_cast<int>(n));
        return r;
    }
    const double nn = static_cast<double>(n);
    double tie_term = 0.0;
    {
        std::vector<double> sorted = mag;
        std::sort(sorted.begin(), sorted.end());
        std::size_t i = 0;
        while (i < sorted.size()) {
            std::size_t j = i;
            while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
            const double t = static_cast<double>(j - i + 1);
            tie_term += t * t * t - t;
            i = j + 1;
        }
    }
    const double mean = nn * (nn + 1.0) / 4.0;
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    const double z = (r.w_plus - mean - 0.5) / std::sqrt(var);
    r.exact = false;
    r.p = 1.0 - normal_cdf(z);
    return r;
}

namespace {

double pearson_r(std::span<const double> x, std::span<const double> y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw Inestimable("correlation undefined: a variable is constant");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double correlation_p(double r, std::size_t n) {
    if (std::fabs(r) >= 1.0) return 0.0;
    const double df = static_cast<double>(n) - 2.0;
    const double t = r * std::sqrt(df / (1.0 - r * r));
    return student_t_two_sided(t, df);
}

void check_pair(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw InputError("correlation: length mismatch");
    if (x.size() < 3) throw InputError("correlation: need at least 3 observations");
}

}  // namespace

CorrelationResult pearson(std::span<const double> x, std::span<const double> y) {
    check_pair(x, y);
    CorrelationResult c;
    c.n = x.size();
    c.r = pearson_r(x, y);
    c.p = correlation_p(c.r, c.n);
    return c;
}

CorrelationResult spearman(std::span<const double> x, std::span<const double> y) {
    check_pair(x, y);
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    CorrelationResult c;
    c.n = x.size();
    c.r = pearson_r(rx, ry);
    c.p = correlation_p(c.r, c.n);
    return c;
}

BinnedTrend binned_trend(std::span<const double> scores, std::span<const int> truth, std::size_t n_bins) {
    if (n_bins < 2) throw InputError("binned trend: n_bins must be >= 2");
    if (scores.size() != truth.size()) throw InputError("binned trend: length mismatch");
    if (scores.size() < n_bins) throw InputError("binned trend: fewer cases than bins");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Equal-count bins by sorted position; a tie group goes wholly to the bin
    // of its first member, so some bins can end up empty.
    std::vector<double> sum_score(n_bins, 0.0), sum_event(n_bins, 0.0);
    std::vector<std::size_t> count(n_bins, 0);
    std::size_t group_start = 0;
    for (std::size_t pos = 0; pos < n; ++pos) {
        if (pos > 0 && scores[order[pos]] != scores[order[pos - 1]]) group_start = pos;
        const std::size_t bin = group_start * n_bins / n;
        sum_score[bin] += scores[order[pos]];
        sum_event[bin] += truth[order[pos]] ? 1.0 : 0.0;
        count[bin] += 1;
    }
    BinnedTrend out;
    for (std::size_t b = 0; b < n_bins; ++b) {
        if (count[b] == 0) {
            out.warnings.push_back("bin " + std::to_string(b + 1) + " is empty after tie grouping; dropped");
            continue;
        }
        const double c = static_cast<double>(count[b]);
        out.bins.push_back({sum_score[b] / c, sum_event[b] / c, count[b]});
    }
    if (out.bins.size() < 2) throw InputError("binned trend: fewer than two non-empty bins");
    std::vector<double> xs, ys;
    for (const auto& b : out.bins) {
        xs.push_back(b.mean_score);
        ys.push_back(b.event_rate);
    }
    out.correlation.n = out.bins.size();
    out.correlation.r = pearson_r(xs, ys);
    if (out.bins.size() >= 3) {
        out.correlation.p = correlation_p(out.correlation.r, out.bins.size());
    } else {
        out.correlation.p = 1.0;
        out.warnings.push_back("only two bins; correlation p-value not estimable, reported as 1");
    }
    return out;
}

// ============================================================================
// model comparison
// ============================================================================

MeanRankResult model_mean_rank(const MetricTable& table, bool higher_is_better) {
    const std::size_t m = table.models.size();
    if (m < 2) throw InputError("mean rank: need at least two models");
    if (table.value.size() != m) throw InputError("mean rank: value rows do not match model list");
    for (const auto& row : table.value) {
        if (row.size() != table.cohorts.size()) throw InputError("mean rank: ragged metric table");
    }
    MeanRankResult out;
    out.models.resize(m);
    for (std::size_t i = 0; i < m; ++i) out.models[i].model = table.models[i];
    std::vector<double> col(m);
    for (std::size_t c = 0; c < table.cohorts.size(); ++c) {
        bool missing = false;
        for (std::size_t i = 0; i < m; ++i) {
            const double v = table.value[i][c];
            if (std::isnan(v)) missing = true;
            col[i] = higher_is_better ? -v : v;
        }
        if (missing) {
            out.warnings.push_back("cohort '" + table.cohorts[c] + "' has a missing value; skipped");
            continue;
        }
        out.cohorts_used.push_back(table.cohorts[c]);
        const auto ranks = average_ranks(col);
        for (std::size_t i = 0; i < m; ++i) out.models[i].ranks.push_back(ranks[i]);
    }
    if (out.cohorts_used.empty()) throw InputError("mean rank: no cohort has values for every model");
    for (auto& mr : out.models) {
        mr.mean_rank = std::accumulate(mr.ranks.begin(), mr.ranks.end(), 0.0) / static_cast<double>(mr.ranks.size());
    }
    return out;
}

// ============================================================================
// subgroup robustness
// ============================================================================

AucWithCi auc_with_ci(const cohort::Cohort& c, const resample::BootstrapOptions& opts) {
    AucWithCi out;
    try {
        out.auc = metrics::macro_auc_ovr(c).value;
    } catch (const Inestimable&) {
        return out;
    }
    resample::IndexStatistic stat = [&c](std::span<const std::size_t> idx) -> MaybeReal {
        try {
            return metrics::macro_auc_ovr(c, idx).value;
        } catch (const Inestimable&) {
            return std::nullopt;
        }
    };
    try {
        out.ci = resample::bootstrap_ci(stat, c.size(), opts);
    } catch (const Inestimable&) {
        out.ci.reset();
    }
    return out;
}

SubgroupShiftReport subgroup_shift_report(const cohort::Cohort& baseline, const cohort::Cohort& subgroup,
                                          const resample::BootstrapOptions& opts) {
    if (!(baseline.class_map == subgroup.class_map)) {
        throw InputError("subgroup shift: subgroup classes differ from the baseline cohort");
    }
    SubgroupShiftReport out;
    out.baseline_auc = auc_with_ci(baseline, opts);
    out.subgroup_auc = auc_with_ci(subgroup, opts);
    if (!out.subgroup_auc.auc) out.warnings.push_back("subgroup AUC undefined (a class is absent)");

    // Binary tasks compare the positive-class score within each true class;
    // multi-class tasks use each class's own score.
    const std::size_t k = baseline.class_map.size();
    const bool binary = k == 2;
    const std::size_t pos = binary ? baseline.positive_class() : 0;
    auto scores_of = [&](const cohort::Cohort& c, std::size_t cls) {
        std::vector<double> s;
        for (const auto& r : c.records) {
            if (r.true_label == cls) s.push_back(r.scores[binary ? pos : cls]);
        }
        return s;
    };
    for (std::size_t cls = 0; cls < k; ++cls) {
        const auto a = scores_of(baseline, cls);
        const auto b = scores_of(subgroup, cls);
        const auto& name = baseline.class_map.name(cls);
        if (a.empty() || b.empty()) {
            out.warnings.push_back("class '" + name + "' absent from " + (a.empty() ? "baseline" : "subgroup") +
                                   "; KS skipped");
            continue;
        }
        ClassShift cs;
        cs.class_name = name;
        cs.baseline_n = a.size();
        cs.subgroup_n = b.size();
        cs.ks = ks_two_sample(a, b);
        out.classes.push_back(cs);
    }
    return out;
}

}  // namespace triagebench::inference
