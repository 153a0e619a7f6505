#include "triagebench/resample.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <thread>

#include "triagebench/inference.hpp"

namespace triagebench::resample {

std::uint64_t SplitMix64::next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t SplitMix64::below(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
        x = next();
    } while (x >= limit);
    return x % bound;
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t resample_index) {
    SplitMix64 a(seed);
    SplitMix64 b(resample_index ^ 0xD1B54A32D192ED03ULL);
    return a.next() ^ b.next();
}

std::vector<std::size_t> resample_indices(std::size_t n, std::uint64_t seed, std::uint64_t r,
                                          std::span<const int> strata) {
    SplitMix64 rng(stream_seed(seed, r));
    std::vector<std::size_t> idx(n);
    if (strata.empty()) {
        for (auto& i : idx) i = static_cast<std::size_t>(rng.below(n));
        return idx;
    }
    if (strata.size() != n) throw InputError("strata length does not match case count");
    std::map<int, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < n; ++i) members[strata[i]].push_back(i);
    std::size_t k = 0;
    for (const auto& [s, m] : members) {
        for (std::size_t j = 0; j < m.size(); ++j) idx[k++] = m[rng.below(m.size())];
    }
    return idx;
}

namespace {

// Runs fill(r, idx) for every resample index, spread over contiguous chunks.
template <class Fill>
void for_each_resample(std::size_t n, const BootstrapOptions& opts, Fill fill) {
    if (n == 0) throw InputError("bootstrap: empty data");
    if (opts.n_resamples < 1) throw InputError("bootstrap: n_resamples must be >= 1");
    const std::size_t total = static_cast<std::size_t>(opts.n_resamples);
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) fill(r, resample_indices(n, opts.seed, r, opts.strata));
    };
    const std::size_t threads = std::clamp<std::size_t>(opts.threads, 1, total);
    if (threads == 1) {
        work(0, total);
        return;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (total + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
        const std::size_t b = t * chunk;
        const std::size_t e = std::min(total, b + chunk);
        if (b >= e) break;
        pool.emplace_back(work, b, e);
    }
    for (auto& th : pool) th.join();
}

}  // namespace

std::vector<MaybeReal> bootstrap_replicates(const IndexStatistic& stat, std::size_t n,
                                            const BootstrapOptions& opts) {
    std::vector<MaybeReal> out(static_cast<std::size_t>(std::max(opts.n_resamples, 0)));
    for_each_resample(n, opts, [&](std::size_t r, const std::vector<std::size_t>& idx) { out[r] = stat(idx); });
    return out;
}

std::vector<std::vector<MaybeReal>> bootstrap_replicates_multi(const VectorStatistic& stat, std::size_t n,
                                                               const BootstrapOptions& opts) {
    std::vector<std::vector<MaybeReal>> out(static_cast<std::size_t>(std::max(opts.n_resamples, 0)));
    for_each_resample(n, opts, [&](std::size_t r, const std::vector<std::size_t>& idx) { out[r] = stat(idx); });
    return out;
}

double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw InputError("quantile of empty data");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = static_cast<std::size_t>(std::ceil(h));
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

BootstrapResult percentile_interval(double point, std::span<const MaybeReal> replicates, double level) {
    if (!(level > 0.0 && level < 1.0)) throw InputError("bootstrap level must be in (0,1)");
    std::vector<double> vals;
    vals.reserve(replicates.size());
    for (const auto& v : replicates) {
        if (v) vals.push_back(*v);
    }
    if (vals.empty()) throw Inestimable("bootstrap: every resample was degenerate");
    std::sort(vals.begin(), vals.end());
    BootstrapResult r;
    r.point = point;
    r.n_resamples = static_cast<int>(replicates.size());
    r.level = level;
    r.n_degenerate = static_cast<int>(replicates.size() - vals.size());
    const double alpha = 1.0 - level;
    r.lo = quantile_sorted(vals, alpha / 2.0);
    r.hi = quantile_sorted(vals, 1.0 - alpha / 2.0);
    return r;
}

BootstrapResult bootstrap_ci(const IndexStatistic& stat, std::size_t n, const BootstrapOptions& opts) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    const auto point = stat(all);
    if (!point) throw Inestimable("bootstrap: statistic undefined on the full data");
    const auto reps = bootstrap_replicates(stat, n, opts);
    return percentile_interval(*point, reps, opts.level);
}

double zero_crossing_pvalue(std::span<const MaybeReal> replicates, int n_resamples) {
    std::size_t defined = 0, le = 0, ge = 0;
    for (const auto& v : replicates) {
        if (!v) continue;
        ++defined;
        if (*v <= 0.0) ++le;
        if (*v >= 0.0) ++ge;
    }
    if (defined == 0) throw Inestimable("bootstrap p-value: effect degenerate on every resample");
    const double d = static_cast<double>(defined);
    double p = 2.0 * std::min(static_cast<double>(le) / d, static_cast<double>(ge) / d);
    p = std::max(p, 1.0 / static_cast<double>(n_resamples));
    return std::min(p, 1.0);
}

double bootstrap_pvalue_zero_crossing(const IndexStatistic& effect, std::size_t n,
                                      const BootstrapOptions& opts) {
    const auto reps = bootstrap_replicates(effect, n, opts);
    return zero_crossing_pvalue(reps, opts.n_resamples);
}

KappaDifference bootstrap_kappa_difference(const CountMatrix& ratings_a, const CountMatrix& ratings_b,
                                           const BootstrapOptions& opts) {
    if (ratings_a.size() != ratings_b.size()) {
        throw InputError("kappa difference: both conditions must rate the same cases");
    }
    const std::size_t n = ratings_a.size();
    auto kappa_on = [](const CountMatrix& m, std::span<const std::size_t> idx) -> MaybeReal {
        CountMatrix sub;
        sub.reserve(idx.size());
        for (auto i : idx) sub.push_back(m[i]);
        try {
            return inference::fleiss_kappa(sub).kappa;
        } catch (const Inestimable&) {
            return std::nullopt;
        }
    };

    KappaDifference out;
    out.kappa_a = inference::fleiss_kappa(ratings_a).kappa;
    out.kappa_b = inference::fleiss_kappa(ratings_b).kappa;
    out.delta_kappa = out.kappa_b - out.kappa_a;

    // One pass of resamples yields all three replicate series.
    VectorStatistic joint = [&](std::span<const std::size_t> idx) -> std::vector<MaybeReal> {
        auto a = kappa_on(ratings_a, idx);
        auto b = kappa_on(ratings_b, idx);
        MaybeReal d;
        if (a && b) d = *b - *a;
        return {a, b, d};
    };
    const auto reps = bootstrap_replicates_multi(joint, n, opts);
    std::vector<MaybeReal> ra, rb, delta;
    for (const auto& r : reps) {
        ra.push_back(r[0]);
        rb.push_back(r[1]);
        delta.push_back(r[2]);
    }

    out.ci_a = percentile_interval(out.kappa_a, ra, opts.level);
    out.ci_b = percentile_interval(out.kappa_b, rb, opts.level);
    out.ci_delta = percentile_interval(out.delta_kappa, delta, opts.level);
    out.p = zero_crossing_pvalue(delta, opts.n_resamples);
    return out;
}

}  // namespace triagebench::resample
