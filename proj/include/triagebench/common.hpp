#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

namespace triagebench {

inline constexpr const char* kVersion = "0.3.0";
inline constexpr std::uint64_t kDefaultSeed = 20240212;
inline constexpr int kDefaultResamples = 1000;

// A statistic whose defining denominator is zero (e.g. NPV of an empty
// rule-out set) is carried as an empty optional, never as a silent zero.
using MaybeReal = std::optional<double>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Malformed input or violated precondition. Messages name the offending row
// or argument.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The requested quantity cannot be estimated from the data at hand
// (single-class AUC, kappa with p_e = 1, zero events, ...).
class Inestimable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline MaybeReal safe_ratio(double num, double den) {
    if (den == 0.0) return std::nullopt;
    return num / den;
}

}  // namespace triagebench
