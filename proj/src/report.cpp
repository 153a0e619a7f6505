#include "triagebench/report.hpp"

#include <cmath>
#include <cstdio>

namespace triagebench::report {

json number(MaybeReal v) {
    if (!v || !std::isfinite(*v)) return nullptr;
    return *v;
}

std::string fixed(double v, int digits) {
    if (std::isnan(v)) return "NaN";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    std::string s = buf;
    // avoid "-0.000"
    if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
    return s;
}

std::string format_p(double p) {
    if (p < kSmallP) return "P<0.001";
    return fixed(p, 3);
}

json pvalue(double p) { return json{{"value", number(p)}, {"display", format_p(p)}}; }

std::string format_ci(double point, double lo, double hi, int digits) {
    return fixed(point, digits) + " (" + fixed(lo, digits) + "-" + fixed(hi, digits) + ")";
}

std::string percent(double fraction) { return fixed(100.0 * fraction, 1) + "%"; }

json bootstrap(const resample::BootstrapResult& r) {
    return json{{"point", number(r.point)},
                {"lo", number(r.lo)},
                {"hi", number(r.hi)},
                {"level", r.level},
                {"n_resamples", r.n_resamples},
                {"n_degenerate", r.n_degenerate},
                {"method", "percentile"},
                {"display", format_ci(r.point, r.lo, r.hi)}};
}

json counts(const metrics::ConfusionCounts& c) {
    return json{{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
}

json operating_point(const metrics::OperatingPoint& op) {
    return json{{"threshold", number(op.threshold)},
                {"counts", counts(op.counts)},
                {"sensitivity", number(op.sensitivity)},
                {"specificity", number(op.specificity)},
                {"ppv", number(op.ppv)},
                {"npv", number(op.npv)},
                {"youden", number(op.youden)}};
}

json coefficient(const regression::Coefficient& c, const std::string& effect_name) {
    if (c.aliased) return json{{"name", c.name}, {"aliased", true}};
    return json{{"name", c.name},
                {"estimate", number(c.estimate)},
                {"se", number(c.se)},
                {"ci", {number(c.lo), number(c.hi)}},
                {"p", pvalue(c.p)},
                {effect_name, number(c.effect)},
                {effect_name + "_ci", {number(c.effect_lo), number(c.effect_hi)}},
                {"display", format_ci(c.effect, c.effect_lo, c.effect_hi)}};
}

json ks(const inference::KsResult& k) {
    return json{{"d", k.d},
                {"p", pvalue(k.p)},
                {"n1", k.n1},
                {"n2", k.n2},
                {"method", k.method == inference::KsMethod::exact ? "exact" : "asymptotic"}};
}

json kappa(const inference::KappaResult& k) {
    json j{{"kappa", number(k.kappa)},
           {"observed_agreement", number(k.observed_agreement)},
           {"expected_agreement", number(k.expected_agreement)},
           {"n", k.n},
           {"interpretation", k.interpretation}};
    if (k.concordance) {
        j["concordance"] = json{{"estimate", k.concordance->estimate},
                                {"lo", k.concordance->lo},
                                {"hi", k.concordance->hi},
                                {"method", "wilson"},
                                {"display", percent(k.concordance->estimate)}};
    }
    return j;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace triagebench::report
