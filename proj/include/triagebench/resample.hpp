#pragma once

// Deterministic non-parametric bootstrap.
//
// Resample r draws its case indices from a private stream seeded by
// (seed, r), so replicate values do not depend on how resamples are spread
// over threads. Replicates are reduced in index order; percentile bounds use
// linear interpolation between order statistics.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "triagebench/common.hpp"

namespace triagebench::resample {

// Statistic over a multiset of case indices; empty optional = degenerate.
using IndexStatistic = std::function<MaybeReal(std::span<const std::size_t>)>;

struct BootstrapOptions {
    int n_resamples = kDefaultResamples;
    std::uint64_t seed = kDefaultSeed;
    double level = 0.95;
    unsigned threads = 1;
    // Optional stratum per case; when non-empty, each stratum is resampled
    // separately and keeps its size.
    std::vector<int> strata;
};

struct BootstrapResult {
    double point = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    int n_resamples = 0;
    double level = 0.95;
    int n_degenerate = 0;
};

// splitmix64 stream; the documented generator behind every resample.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t state) : state_(state) {}
    std::uint64_t next();
    // Uniform integer in [0, bound) by rejection.
    std::uint64_t below(std::uint64_t bound);

private:
    std::uint64_t state_;
};

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t resample_index);

// Case indices of resample r (size n, or stratum-preserving when strata given).
std::vector<std::size_t> resample_indices(std::size_t n, std::uint64_t seed, std::uint64_t r,
                                          std::span<const int> strata = {});

// All replicate values in resample-index order.
std::vector<MaybeReal> bootstrap_replicates(const IndexStatistic& stat, std::size_t n,
                                            const BootstrapOptions& opts);

// Several statistics evaluated on the same resample; out[r][k].
using VectorStatistic = std::function<std::vector<MaybeReal>(std::span<const std::size_t>)>;
std::vector<std::vector<MaybeReal>> bootstrap_replicates_multi(const VectorStatistic& stat, std::size_t n,
                                                               const BootstrapOptions& opts);

// Linear-interpolation quantile of sorted data, q in [0,1].
double quantile_sorted(std::span<const double> sorted, double q);

BootstrapResult bootstrap_ci(const IndexStatistic& stat, std::size_t n, const BootstrapOptions& opts);

// Percentile interval from precomputed replicates (used when replicates from
// several folds are pooled).
BootstrapResult percentile_interval(double point, std::span<const MaybeReal> replicates, double level);

// p = 2 * min(frac(effect* <= 0), frac(effect* >= 0)), floored at
// 1/n_resamples and capped at 1.
double zero_crossing_pvalue(std::span<const MaybeReal> replicates, int n_resamples);
double bootstrap_pvalue_zero_crossing(const IndexStatistic& effect, std::size_t n,
                                      const BootstrapOptions& opts);

// case x category count matrix, as consumed by Fleiss' kappa
using CountMatrix = std::vector<std::vector<int>>;

struct KappaDifference {
    double kappa_a = 0.0;
    double kappa_b = 0.0;
    double delta_kappa = 0.0;  // kappa_b - kappa_a
    BootstrapResult ci_a, ci_b, ci_delta;
    double p = 1.0;
};

// Cases are resampled jointly across the two rating matrices.
KappaDifference bootstrap_kappa_difference(const CountMatrix& ratings_a, const CountMatrix& ratings_b,
                                           const BootstrapOptions& opts);

}  // namespace triagebench::resample
