#pragma once

// JSON building blocks shared by every command. Objects are key-sorted
// (nlohmann::json default), so a dump is canonical for fixed inputs.

#include <optional>
#include <string>

#include "json.hpp"
#include "triagebench/common.hpp"
#include "triagebench/inference.hpp"
#include "triagebench/metrics.hpp"
#include "triagebench/regression.hpp"
#include "triagebench/resample.hpp"

namespace triagebench::report {

using nlohmann::json;

inline constexpr double kSmallP = 0.001;

// null for undefined values and non-finite numbers
json number(MaybeReal v);

// {"value": p, "display": "P<0.001" | "0.109"}
json pvalue(double p);
std::string format_p(double p);

// Fixed-point with the given digits, e.g. fixed(0.93, 3) == "0.930".
std::string fixed(double v, int digits);
// "0.930 (0.910-0.993)"
std::string format_ci(double point, double lo, double hi, int digits = 3);
// one-decimal percent, e.g. 67.3%
std::string percent(double fraction);

json bootstrap(const resample::BootstrapResult& r);
json counts(const metrics::ConfusionCounts& c);
json operating_point(const metrics::OperatingPoint& op);
json coefficient(const regression::Coefficient& c, const std::string& effect_name);
json ks(const inference::KsResult& k);
json kappa(const inference::KappaResult& k);

std::string dump(const json& j);

}  // namespace triagebench::report
