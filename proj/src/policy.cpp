#include "triagebench/policy.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace triagebench::policy {

using nlohmann::json;

namespace {

// Constraint checks tolerate representation error in fractions like 0.4.
constexpr double kEps = 1e-12;

bool at_least(const MaybeReal& v, double bound) { return v && *v >= bound - kEps; }

}  // namespace

std::string to_string(Semantics s) { return s == Semantics::ruleout ? "ruleout" : "rulein"; }

double reported_threshold(const std::vector<double>& u, std::size_t k) {
    if (u.empty()) throw InputError("reported_threshold: no scores");
    if (k == 0) return u[0];
    if (k >= u.size()) {
        const double top = u.back();
        return top < 1.0 ? (top + 1.0) / 2.0 : std::nextafter(top, kInf);
    }
    const double mid = u[k - 1] + (u[k] - u[k - 1]) / 2.0;
    return mid > u[k - 1] ? mid : u[k];
}

Sweep sweep(std::span<const double> scores, std::span<const int> labels, Semantics semantics) {
    if (scores.size() != labels.size()) throw InputError("sweep: scores and labels differ in length");
    if (scores.empty()) throw InputError("sweep: empty input");
    Sweep sw;
    sw.semantics = semantics;
    for (int l : labels) {
        if (l != 0 && l != 1) throw InputError("sweep: labels must be binary");
        (l ? sw.n_pos : sw.n_neg) += 1;
    }
    if (sw.n_pos == 0 || sw.n_neg == 0) throw InputError("sweep: both classes must be present");

    const auto u = metrics::unique_sorted(scores);
    // positives / negatives at each unique score, to walk thresholds upward
    std::vector<std::size_t> pos(u.size(), 0), neg(u.size(), 0);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const auto k = static_cast<std::size_t>(std::lower_bound(u.begin(), u.end(), scores[i]) - u.begin());
        (labels[i] ? pos : neg)[k] += 1;
    }
    const double n = static_cast<double>(scores.size());
    metrics::ConfusionCounts c{sw.n_pos, sw.n_neg, 0, 0};
    for (std::size_t k = 0; k <= u.size(); ++k) {
        if (k > 0) {
            c.tp -= pos[k - 1];
            c.fn += pos[k - 1];
            c.fp -= neg[k - 1];
            c.tn += neg[k - 1];
        }
        SweepRow r;
        r.threshold = k < u.size() ? u[k] : kInf;
        r.reported_threshold = reported_threshold(u, k);
        r.counts = c;
        r.sensitivity = c.sensitivity();
        r.specificity = c.specificity();
        r.ppv = c.ppv();
        r.npv = c.npv();
        r.ruleout_coverage = static_cast<double>(c.tn + c.fn) / n;
        r.rulein_coverage = static_cast<double>(c.tp + c.fp) / n;
        sw.rows.push_back(r);
    }
    return sw;
}

// ---------------------------------------------------------------------------
// policy plumbing

std::string policy_name(const ThresholdPolicy& p) {
    struct V {
        std::string operator()(const RuleOutNpv&) const { return "rule_out_npv"; }
        std::string operator()(const RuleInPpv&) const { return "rule_in_ppv"; }
        std::string operator()(const RescueBurden&) const { return "rescue_burden"; }
        std::string operator()(const SensitivityFloor&) const { return "sensitivity_floor"; }
    };
    return std::visit(V{}, p);
}

Semantics band_of(const ThresholdPolicy& p) {
    return std::holds_alternative<RuleOutNpv>(p) ? Semantics::ruleout : Semantics::rulein;
}

void validate(const ThresholdPolicy& p) {
    auto unit = [](double v, const char* what) {
        if (!(v >= 0.0 && v <= 1.0)) throw InputError(std::string("policy: ") + what + " must lie in [0,1]");
    };
    if (auto* a = std::get_if<RuleOutNpv>(&p)) unit(a->min_npv, "min_npv");
    if (auto* a = std::get_if<RuleInPpv>(&p)) unit(a->min_ppv, "min_ppv");
    if (auto* a = std::get_if<RescueBurden>(&p)) {
        unit(a->min_rescue_rate, "min_rescue_rate");
        unit(a->max_review_burden, "max_review_burden");
    }
    if (auto* a = std::get_if<SensitivityFloor>(&p)) unit(a->min_sensitivity, "min_sensitivity");
}

namespace {

json policy_json(const ThresholdPolicy& p) {
    json j;
    j["type"] = policy_name(p);
    if (auto* a = std::get_if<RuleOutNpv>(&p)) j["min_npv"] = a->min_npv;
    if (auto* a = std::get_if<RuleInPpv>(&p)) {
        j["min_ppv"] = a->min_ppv;
        j["pick"] = a->pick == Pick::largest ? "largest" : "smallest";
    }
    if (auto* a = std::get_if<RescueBurden>(&p)) {
        j["min_rescue_rate"] = a->min_rescue_rate;
        j["max_review_burden"] = a->max_review_burden;
    }
    if (auto* a = std::get_if<SensitivityFloor>(&p)) j["min_sensitivity"] = a->min_sensitivity;
    return j;
}

double number_field(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_number()) {
        throw InputError(std::string("policy: missing numeric field '") + key + "'");
    }
    return j[key].get<double>();
}

ThresholdPolicy policy_from(const json& j) {
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
        throw InputError("policy: expected an object with a 'type' string");
    }
    const auto type = j["type"].get<std::string>();
    ThresholdPolicy p;
    if (type == "rule_out_npv") {
        p = RuleOutNpv{number_field(j, "min_npv")};
    } else if (type == "rule_in_ppv") {
        RuleInPpv r{number_field(j, "min_ppv"), Pick::largest};
        if (j.contains("pick")) {
            const auto pick = j["pick"].get<std::string>();
            if (pick == "smallest") {
                r.pick = Pick::smallest;
            } else if (pick != "largest") {
                throw InputError("policy: pick must be 'largest' or 'smallest'");
            }
        }
        p = r;
    } else if (type == "rescue_burden") {
        p = RescueBurden{number_field(j, "min_rescue_rate"), number_field(j, "max_review_burden")};
    } else if (type == "sensitivity_floor") {
        p = SensitivityFloor{number_field(j, "min_sensitivity")};
    } else {
        throw InputError("policy: unknown type '" + type + "'");
    }
    validate(p);
    return p;
}

}  // namespace

ThresholdPolicy parse_policy_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw InputError(std::string("policy: invalid JSON: ") + e.what());
    }
    return policy_from(j);
}

std::string policy_to_json(const ThresholdPolicy& p) { return policy_json(p).dump(); }

// ---------------------------------------------------------------------------
// selection

namespace {

double nnr_of(const SweepRow& r) {
    if (r.counts.tp == 0) return kInf;
    return static_cast<double>(r.counts.tp + r.counts.fp) / static_cast<double>(r.counts.tp);
}

}  // namespace

bool satisfies(const SweepRow& row, const ThresholdPolicy& policy) {
    if (auto* a = std::get_if<RuleOutNpv>(&policy)) return at_least(row.npv, a->min_npv);
    if (auto* a = std::get_if<RuleInPpv>(&policy)) return at_least(row.ppv, a->min_ppv);
    if (auto* a = std::get_if<SensitivityFloor>(&policy)) return at_least(row.sensitivity, a->min_sensitivity);
    const auto& rb = std::get<RescueBurden>(policy);
    return at_least(row.sensitivity, rb.min_rescue_rate) && row.rulein_coverage <= rb.max_review_burden + kEps;
}

Selection select_threshold(const Sweep& sw, const ThresholdPolicy& policy) {
    if (sw.rows.empty()) throw InputError("select_threshold: empty sweep");
    validate(policy);
    Selection out;
    const SweepRow* best = nullptr;

    const bool prefer_small = std::holds_alternative<RuleInPpv>(policy) &&
                              std::get<RuleInPpv>(policy).pick == Pick::smallest;
    if (const auto* rb = std::get_if<RescueBurden>(&policy); rb) {
        (void)rb;
        for (const auto& r : sw.rows) {
            if (!satisfies(r, policy)) continue;
            if (!best) {
                best = &r;
                continue;
            }
            const double rs = *r.sensitivity, bs = *best->sensitivity;
            if (rs != bs) {
                if (rs > bs) best = &r;
                continue;
            }
            if (r.rulein_coverage != best->rulein_coverage) {
                if (r.rulein_coverage < best->rulein_coverage) best = &r;
                continue;
            }
            if (nnr_of(r) != nnr_of(*best)) {
                if (nnr_of(r) < nnr_of(*best)) best = &r;
                continue;
            }
            if (r.threshold > best->threshold) best = &r;
        }
    } else {
        for (const auto& r : sw.rows) {
            if (!satisfies(r, policy)) continue;
            if (!best) {
                best = &r;
            } else if (prefer_small ? r.threshold < best->threshold : r.threshold > best->threshold) {
                best = &r;
            }
        }
    }

    if (best) {
        out.feasible = true;
        out.row = *best;
        return out;
    }
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, RuleOutNpv>) {
                out.binding_constraint = "npv >= " + std::to_string(p.min_npv);
            } else if constexpr (std::is_same_v<T, RuleInPpv>) {
                out.binding_constraint = "ppv >= " + std::to_string(p.min_ppv);
            } else if constexpr (std::is_same_v<T, SensitivityFloor>) {
                out.binding_constraint = "sensitivity >= " + std::to_string(p.min_sensitivity);
            } else {
                // report whichever half of the pair fails on its own
                bool rescue_ok = false, burden_ok = false;
                for (const auto& r : sw.rows) {
                    rescue_ok = rescue_ok || at_least(r.sensitivity, p.min_rescue_rate);
                    burden_ok = burden_ok || r.rulein_coverage <= p.max_review_burden + kEps;
                }
                if (!rescue_ok) {
                    out.binding_constraint = "rescue_rate >= " + std::to_string(p.min_rescue_rate);
                } else if (!burden_ok) {
                    out.binding_constraint = "review_burden <= " + std::to_string(p.max_review_burden);
                } else {
                    out.binding_constraint = "rescue_rate >= " + std::to_string(p.min_rescue_rate) +
                                             " jointly with review_burden <= " + std::to_string(p.max_review_burden);
                }
            }
        },
        policy);
    return out;
}

// ---------------------------------------------------------------------------
// registry

namespace {

json locked_json(const LockedThreshold& t) {
    return json{{"task", t.task},
                {"band", to_string(t.band)},
                {"value", t.value},
                {"policy", policy_json(t.policy)},
                {"source_cohort", t.source_cohort},
                {"locked_at", t.locked_at}};
}

LockedThreshold locked_from(const json& j, std::size_t index) {
    const std::string where = "registry entry " + std::to_string(index);
    try {
        LockedThreshold t;
        t.task = j.at("task").get<std::string>();
        const auto band = j.at("band").get<std::string>();
        if (band == "ruleout") {
            t.band = Semantics::ruleout;
        } else if (band == "rulein") {
            t.band = Semantics::rulein;
        } else {
            throw InputError(where + ": unknown band '" + band + "'");
        }
        t.value = j.at("value").get<double>();
        t.policy = policy_from(j.at("policy"));
        t.source_cohort = j.value("source_cohort", "");
        t.locked_at = j.value("locked_at", "");
        return t;
    } catch (const json::exception& e) {
        throw InputError(where + ": " + e.what());
    }
}

}  // namespace

Registry Registry::parse(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw InputError(std::string("registry: invalid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("entries") || !j["entries"].is_array()) {
        throw InputError("registry: expected {\"entries\": [...]}");
    }
    Registry r;
    std::size_t i = 0;
    for (const auto& e : j["entries"]) r.entries_.push_back(locked_from(e, i++));
    return r;
}

Registry Registry::load(const std::string& path) {
    if (!std::filesystem::exists(path)) return {};
    return parse(cohort::read_text(path));
}

std::string Registry::to_json() const {
    json arr = json::array();
    for (const auto& e : entries_) arr.push_back(locked_json(e));
    return json{{"entries", arr}}.dump(2) + "\n";
}

void Registry::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("registry: cannot write " + path);
    out << to_json();
}

void Registry::append(const LockedThreshold& t, bool relock) {
    if (t.task.empty()) throw InputError("registry: locked threshold needs a task");
    if (!relock && latest(t.task, t.band)) {
        throw InputError("registry: task '" + t.task + "' already has a locked " + to_string(t.band) +
                         " threshold; pass --relock to supersede it");
    }
    entries_.push_back(t);
}

std::optional<LockedThreshold> Registry::latest(const std::string& task, Semantics band) const {
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
        if (it->task == task && it->band == band) return *it;
    }
    return std::nullopt;
}

std::string utc_timestamp_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// ---------------------------------------------------------------------------
// applying locked thresholds

std::string to_string(Assignment a) {
    switch (a) {
        case Assignment::ruled_out: return "ruled_out";
        case Assignment::gray_zone: return "gray_zone";
        case Assignment::ruled_in: return "ruled_in";
    }
    return "?";
}

std::vector<CaseAssignment> apply_locked(const std::optional<LockedThreshold>& low,
                                         const std::optional<LockedThreshold>& high, const cohort::Cohort& c) {
    auto check = [&](const LockedThreshold& t, Semantics want) {
        if (t.task != c.task) {
            throw InputError("apply_locked: threshold locked for task '" + t.task + "' but cohort task is '" +
                             c.task + "'");
        }
        if (t.band != want) throw InputError("apply_locked: threshold band does not match its role");
    };
    if (low) check(*low, Semantics::ruleout);
    if (high) check(*high, Semantics::rulein);
    if (low && high && low->value > high->value) {
        throw InputError("apply_locked: T_low exceeds T_high; bands would overlap");
    }
    const auto scores = c.positive_scores();
    std::vector<CaseAssignment> out;
    out.reserve(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
        CaseAssignment a;
        a.case_id = c.records[i].case_id;
        a.score = scores[i];
        if (low && scores[i] < low->value) {
            a.assignment = Assignment::ruled_out;
        } else if (high && scores[i] >= high->value) {
            a.assignment = Assignment::ruled_in;
        }
        out.push_back(a);
    }
    return out;
}

}  // namespace triagebench::policy
