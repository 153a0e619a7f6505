#include "triagebench/cohort.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

#include "triagebench/csv.hpp"

namespace triagebench::cohort {

namespace {

std::string at_line(std::size_t line) { return "line " + std::to_string(line) + ": "; }

std::optional<double> try_parse_double(const std::string& s) {
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    if (*b == '+') ++b;
    auto res = std::from_chars(b, e, v);
    if (res.ec != std::errc() || res.ptr != e) return std::nullopt;
    return v;
}

double parse_double(const std::string& s, std::size_t line, const std::string& what) {
    auto v = try_parse_double(s);
    if (!v || !std::isfinite(*v)) {
        throw InputError(at_line(line) + what + " '" + s + "' is not a finite number");
    }
    return *v;
}

bool parse_bool(const std::string& s, std::size_t line, const std::string& what) {
    std::string l = s;
    std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return std::tolower(c); });
    if (l == "1" || l == "true" || l == "yes" || l == "y") return true;
    if (l == "0" || l == "false" || l == "no" || l == "n") return false;
    throw InputError(at_line(line) + what + " '" + s + "' is not a boolean");
}

std::set<std::string> split_tags(const std::string& s) {
    std::set<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ';')) {
        auto t = csv::trim(item);
        if (!t.empty()) out.insert(t);
    }
    return out;
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

csv::Table parse_table(const std::string& text) {
    std::istringstream in(text);
    return csv::parse(in);
}

}  // namespace

// --- ClassMap ---------------------------------------------------------------

ClassMap::ClassMap(std::vector<std::string> names, std::optional<std::size_t> positive_index)
    : names_(std::move(names)), positive_(positive_index) {
    if (names_.empty()) throw InputError("class map must name at least one class");
    std::set<std::string> seen(names_.begin(), names_.end());
    if (seen.size() != names_.size()) throw InputError("class names must be unique");
    if (positive_ && *positive_ >= names_.size()) {
        throw InputError("positive_index out of range");
    }
}

std::optional<std::size_t> ClassMap::index_of(const std::string& label) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (names_[i] == label) return i;
    }
    return std::nullopt;
}

std::string to_string(Stage s) {
    switch (s) {
        case Stage::pre: return "pre";
        case Stage::intra: return "intra";
        case Stage::post: return "post";
        case Stage::unspecified: break;
    }
    return "";
}

std::string to_string(CohortRole r) {
    switch (r) {
        case CohortRole::train: return "train";
        case CohortRole::val: return "val";
        case CohortRole::internal_test: return "internal_test";
        case CohortRole::retrospective_external: return "retrospective_external";
        case CohortRole::prospective: return "prospective";
    }
    return "";
}

Stage parse_stage(const std::string& s) {
    auto l = lower(s);
    if (l.empty()) return Stage::unspecified;
    if (l == "pre") return Stage::pre;
    if (l == "intra") return Stage::intra;
    if (l == "post") return Stage::post;
    throw InputError("unknown stage '" + s + "'");
}

CohortRole parse_role(const std::string& s) {
    auto l = lower(s);
    if (l == "train") return CohortRole::train;
    if (l == "val") return CohortRole::val;
    if (l == "internal_test") return CohortRole::internal_test;
    if (l == "retrospective_external") return CohortRole::retrospective_external;
    if (l == "prospective") return CohortRole::prospective;
    throw InputError("unknown cohort role '" + s + "'");
}

// --- Cohort accessors --------------------------------------------------------

std::size_t Cohort::positive_class() const {
    if (auto p = class_map.positive_index()) return *p;
    if (class_map.size() == 2) return 1;
    throw InputError("cohort '" + name + "' has no positive class for a binary analysis");
}

std::vector<double> Cohort::positive_scores() const {
    const std::size_t p = positive_class();
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.scores[p]);
    return out;
}

std::vector<int> Cohort::binary_labels() const {
    const std::size_t p = positive_class();
    std::vector<int> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.true_label == p ? 1 : 0);
    return out;
}

std::vector<int> Cohort::labels() const {
    std::vector<int> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(static_cast<int>(r.true_label));
    return out;
}

// --- schema ------------------------------------------------------------------

CohortSchema parse_schema_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("schema is not valid JSON: ") + e.what());
    }
    if (!j.contains("classes") || !j["classes"].is_array()) {
        throw InputError("schema requires a 'classes' array");
    }
    std::vector<std::string> names = j["classes"].get<std::vector<std::string>>();
    std::optional<std::size_t> pos;
    if (j.contains("positive") && !j["positive"].is_null()) {
        auto p = j["positive"].get<std::string>();
        auto it = std::find(names.begin(), names.end(), p);
        if (it == names.end()) throw InputError("schema positive class '" + p + "' is not a class");
        pos = static_cast<std::size_t>(it - names.begin());
    }
    CohortSchema s;
    s.class_map = ClassMap(std::move(names), pos);
    s.name = j.value("name", std::string("cohort"));
    s.task = j.value("task", s.name);
    if (j.contains("role")) s.role = parse_role(j["role"].get<std::string>());
    s.normalized = j.value("normalized", false);
    return s;
}

CohortSchema load_schema(const std::string& path) { return parse_schema_json(read_text(path)); }

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// --- cohort CSV --------------------------------------------------------------

Cohort parse_cohort(const std::string& csv_text, const CohortSchema& schema) {
    const auto table = parse_table(csv_text);
    const auto& cm = schema.class_map;
    const std::size_t k = cm.size();

    const std::size_t c_id = table.require_column("case_id");
    const std::size_t c_label = table.require_column("label");
    const auto c_tags = table.column("tags");
    const auto c_center = table.column("center");
    const auto c_stage = table.column("stage");

    std::vector<std::size_t> score_cols;
    bool single = false;
    for (const auto& n : cm.names()) {
        if (auto c = table.column("score_" + n)) score_cols.push_back(*c);
    }
    if (score_cols.empty()) {
        auto c = table.column("score");
        if (!c) throw InputError("missing score columns (score_<class>... or score)");
        if (k != 2) throw InputError("single 'score' column requires a binary class map");
        single = true;
        score_cols.push_back(*c);
    } else if (score_cols.size() != k) {
        throw InputError("missing column: expected one score_<class> column per class");
    }

    Cohort cohort;
    cohort.name = schema.name;
    cohort.task = schema.task;
    cohort.class_map = cm;
    cohort.role = schema.role;
    cohort.single_score_column = single;
    const std::size_t pos = single ? cohort.positive_class() : 0;

    std::unordered_set<std::string> ids;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t line = table.line_numbers[r];
        CaseRecord rec;
        rec.case_id = row[c_id];
        if (rec.case_id.empty()) throw InputError(at_line(line) + "empty case_id");
        if (!ids.insert(rec.case_id).second) {
            throw InputError(at_line(line) + "duplicate case_id '" + rec.case_id + "'");
        }
        auto li = cm.index_of(row[c_label]);
        if (!li) throw InputError(at_line(line) + "unknown class label '" + row[c_label] + "'");
        rec.true_label = *li;

        auto check_score = [&](double v) {
            if (v < 0.0 || v > 1.0) {
                throw InputError(at_line(line) + "score " + csv::format_double(v) + " out of [0,1]");
            }
        };
        if (single) {
            double s = parse_double(row[score_cols[0]], line, "score");
            check_score(s);
            rec.scores.assign(2, 0.0);
            rec.scores[pos] = s;
            rec.scores[1 - pos] = 1.0 - s;
        } else {
            double sum = 0.0;
            for (std::size_t c = 0; c < k; ++c) {
                double s = parse_double(row[score_cols[c]], line, "score_" + cm.name(c));
                check_score(s);
                rec.scores.push_back(s);
                sum += s;
            }
            if (schema.normalized && std::abs(sum - 1.0) > schema.normalization_tolerance) {
                throw InputError(at_line(line) + "scores sum to " + csv::format_double(sum) +
                                 " but the schema declares them normalized");
            }
        }
        if (c_tags) rec.subgroup_tags = split_tags(row[*c_tags]);
        if (c_center) rec.center = row[*c_center];
        if (c_stage) {
            try {
                rec.stage = parse_stage(row[*c_stage]);
            } catch (const InputError& e) {
                throw InputError(at_line(line) + e.what());
            }
        }
        cohort.records.push_back(std::move(rec));
    }
    if (cohort.records.empty()) throw InputError("no records");
    return cohort;
}

Cohort load_cohort(const std::string& path, const CohortSchema& schema) {
    try {
        return parse_cohort(read_text(path), schema);
    } catch (const InputError& e) {
        throw InputError(path + ": " + e.what());
    }
}

std::string write_cohort(const Cohort& c) {
    std::ostringstream out;
    std::vector<std::string> header{"case_id", "label"};
    if (c.single_score_column) {
        header.push_back("score");
    } else {
        for (const auto& n : c.class_map.names()) header.push_back("score_" + n);
    }
    header.insert(header.end(), {"tags", "center", "stage"});
    csv::write_row(out, header);
    const std::size_t pos = c.single_score_column ? c.positive_class() : 0;
    for (const auto& r : c.records) {
        std::vector<std::string> f{r.case_id, c.class_map.name(r.true_label)};
        if (c.single_score_column) {
            f.push_back(csv::format_double(r.scores[pos]));
        } else {
            for (double s : r.scores) f.push_back(csv::format_double(s));
        }
        std::string tags;
        for (const auto& t : r.subgroup_tags) {
            if (!tags.empty()) tags += ';';
            tags += t;
        }
        f.push_back(tags);
        f.push_back(r.center);
        f.push_back(to_string(r.stage));
        csv::write_row(out, f);
    }
    return out.str();
}

std::map<std::string, std::size_t> class_distribution(const Cohort& c) {
    std::map<std::string, std::size_t> out;
    for (const auto& r : c.records) ++out[c.class_map.name(r.true_label)];
    return out;
}

FilterResult subgroup_filter(const Cohort& c, const std::string& tag) {
    if (tag.empty()) throw InputError("subgroup tag must be non-empty");
    FilterResult res;
    res.cohort = c;
    res.cohort.records.clear();
    res.cohort.name = c.name + "[" + tag + "]";
    for (const auto& r : c.records) {
        if (r.has_tag(tag)) res.cohort.records.push_back(r);
    }
    if (res.cohort.records.empty()) {
        res.warnings.push_back("subgroup '" + tag + "' is empty in cohort '" + c.name + "'");
        return res;
    }
    const auto dist = class_distribution(res.cohort);
    for (std::size_t k = 0; k < c.class_map.size(); ++k) {
        const auto& name = c.class_map.name(k);
        if (!dist.contains(name) || dist.at(name) == 0) {
            res.warnings.push_back("subgroup '" + tag + "' has no '" + name + "' cases");
        }
    }
    return res;
}

// --- paired ------------------------------------------------------------------

namespace {
bool parse_binary_label(const std::string& s, std::size_t line) {
    auto l = lower(s);
    if (l == "positive" || l == "pos" || l == "1" || l == "+") return true;
    if (l == "negative" || l == "neg" || l == "0" || l == "-") return false;
    throw InputError(at_line(line) + "label '" + s + "' is not positive/negative");
}
}  // namespace

std::vector<PairedLabelRecord> parse_paired(const std::string& csv_text) {
    const auto t = parse_table(csv_text);
    const auto c_id = t.require_column("case_id");
    const auto c_bm = t.require_column("biomarker");
    const auto c_pre = t.require_column("pre_label");
    const auto c_post = t.require_column("post_label");
    std::vector<PairedLabelRecord> out;
    std::set<std::pair<std::string, std::string>> seen;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const auto line = t.line_numbers[r];
        if (row[c_pre].empty() || row[c_post].empty()) {
            throw InputError(at_line(line) + "paired record requires both labels");
        }
        PairedLabelRecord p{row[c_id], row[c_bm], parse_binary_label(row[c_pre], line),
                            parse_binary_label(row[c_post], line)};
        if (!seen.insert({p.case_id, p.biomarker}).second) {
            throw InputError(at_line(line) + "duplicate case_id '" + p.case_id + "' for biomarker '" +
                             p.biomarker + "'");
        }
        out.push_back(std::move(p));
    }
    if (out.empty()) throw InputError("no records");
    return out;
}

std::vector<PairedLabelRecord> load_paired(const std::string& path) {
    try {
        return parse_paired(read_text(path));
    } catch (const InputError& e) {
        throw InputError(path + ": " + e.what());
    }
}

// --- survival ----------------------------------------------------------------

std::vector<SurvivalRecord> parse_survival(const std::string& csv_text) {
    const auto t = parse_table(csv_text);
    const auto c_id = t.require_column("case_id");
    const auto c_time = t.require_column("time_months");
    const auto c_event = t.require_column("event");
    const auto c_risk = t.column("risk_score");
    const auto c_fold = t.column("fold");

    std::vector<std::pair<std::string, std::size_t>> cov_cols;
    std::vector<std::size_t> fold_score_cols;
    for (std::size_t i = 0; i < t.header.size(); ++i) {
        const auto& h = t.header[i];
        if (h.rfind("cov_", 0) == 0 && h.size() > 4) cov_cols.emplace_back(h.substr(4), i);
        if (h.rfind("risk_score_fold", 0) == 0) fold_score_cols.push_back(i);
    }
    // A covariate column is categorical when any of its values is non-numeric.
    std::vector<bool> categorical(cov_cols.size(), false);
    for (std::size_t k = 0; k < cov_cols.size(); ++k) {
        for (const auto& row : t.rows) {
            const auto& v = row[cov_cols[k].second];
            if (!v.empty() && !try_parse_double(v)) {
                categorical[k] = true;
                break;
            }
        }
    }

    std::vector<SurvivalRecord> out;
    std::unordered_set<std::string> ids;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const auto line = t.line_numbers[r];
        SurvivalRecord s;
        s.case_id = row[c_id];
        if (!ids.insert(s.case_id).second) {
            throw InputError(at_line(line) + "duplicate case_id '" + s.case_id + "'");
        }
        s.time = parse_double(row[c_time], line, "time_months");
        if (s.time <= 0.0) throw InputError(at_line(line) + "time_months must be positive");
        double ev = parse_double(row[c_event], line, "event");
        if (ev != 0.0 && ev != 1.0) throw InputError(at_line(line) + "event must be 0 or 1");
        s.event = static_cast<int>(ev);
        if (c_risk && !row[*c_risk].empty()) s.risk_score = parse_double(row[*c_risk], line, "risk_score");
        if (c_fold && !row[*c_fold].empty()) {
            s.fold = static_cast<int>(parse_double(row[*c_fold], line, "fold"));
        }
        for (std::size_t k = 0; k < cov_cols.size(); ++k) {
            const auto& v = row[cov_cols[k].second];
            if (v.empty()) {
                throw InputError(at_line(line) + "missing value for covariate '" + cov_cols[k].first + "'");
            }
            if (categorical[k]) {
                s.covariates[cov_cols[k].first] = v;
            } else {
                s.covariates[cov_cols[k].first] = parse_double(v, line, "cov_" + cov_cols[k].first);
            }
        }
        for (auto c : fold_score_cols) {
            s.fold_model_scores.push_back(parse_double(row[c], line, t.header[c]));
        }
        out.push_back(std::move(s));
    }
    if (out.empty()) throw InputError("no records");
    return out;
}

std::vector<SurvivalRecord> load_survival(const std::string& path) {
    try {
        return parse_survival(read_text(path));
    } catch (const InputError& e) {
        throw InputError(path + ": " + e.what());
    }
}

// --- reader study ------------------------------------------------------------

std::vector<ReaderObservation> parse_reader(const std::string& csv_text) {
    const auto t = parse_table(csv_text);
    const auto c_reader = t.require_column("reader_id");
    const auto c_exp = t.require_column("experience");
    const auto c_case = t.require_column("case_id");
    const auto c_task = t.require_column("task");
    const auto c_cond = t.require_column("condition");
    const auto c_period = t.require_column("period");
    const auto c_first = t.require_column("with_ai_first");
    const auto c_resp = t.require_column("response");
    const auto c_correct = t.require_column("correct");
    const auto c_conf = t.require_column("confidence");
    const auto c_time = t.require_column("time_s");
    const auto c_to = t.require_column("timed_out");
    const auto c_truth = t.column("truth");

    std::vector<ReaderObservation> out;
    std::set<std::tuple<std::string, std::string, std::string, int>> seen;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const auto line = t.line_numbers[r];
        ReaderObservation o;
        o.reader_id = row[c_reader];
        auto e = lower(row[c_exp]);
        if (e == "junior") o.experience = Experience::junior;
        else if (e == "senior") o.experience = Experience::senior;
        else throw InputError(at_line(line) + "experience must be junior or senior");
        o.case_id = row[c_case];
        o.task = row[c_task];
        auto cond = lower(row[c_cond]);
        if (cond == "without_ai") o.condition = ReadingCondition::without_ai;
        else if (cond == "with_ai") o.condition = ReadingCondition::with_ai;
        else throw InputError(at_line(line) + "condition must be without_ai or with_ai");
        double per = parse_double(row[c_period], line, "period");
        if (per != 1.0 && per != 2.0) throw InputError(at_line(line) + "period must be 1 or 2");
        o.period = static_cast<int>(per);
        o.with_ai_first = parse_bool(row[c_first], line, "with_ai_first");
        o.response = row[c_resp];
        if (c_truth && !row[*c_truth].empty()) o.truth = row[*c_truth];
        o.correct = parse_bool(row[c_correct], line, "correct");
        o.timed_out = parse_bool(row[c_to], line, "timed_out");
        o.time_s = parse_double(row[c_time], line, "time_s");
        if (o.time_s <= 0.0) throw InputError(at_line(line) + "time_s must be positive");
        if (!row[c_conf].empty()) {
            double cf = parse_double(row[c_conf], line, "confidence");
            if (cf < 1.0 || cf > 10.0 || cf != std::floor(cf)) {
                throw InputError(at_line(line) + "confidence must be an integer in 1..10");
            }
            o.confidence = static_cast<int>(cf);
        }
        if (o.timed_out) {
            if (o.correct) throw InputError(at_line(line) + "timed-out read cannot be correct");
            if (o.response != kTimeoutLabel) {
                throw InputError(at_line(line) + "timed-out read must have response TIMEOUT");
            }
            if (o.confidence) throw InputError(at_line(line) + "timed-out read cannot carry a confidence");
        } else {
            if (!o.confidence) throw InputError(at_line(line) + "completed read requires a confidence");
            if (o.response == kTimeoutLabel) {
                throw InputError(at_line(line) + "response TIMEOUT requires timed_out=1");
            }
        }
        if (!seen.insert({o.reader_id, o.case_id, o.task, static_cast<int>(o.condition)}).second) {
            throw InputError(at_line(line) + "duplicate read for reader '" + o.reader_id + "' case '" +
                             o.case_id + "'");
        }
        out.push_back(std::move(o));
    }
    if (out.empty()) throw InputError("no records");
    return out;
}

std::vector<ReaderObservation> load_reader(const std::string& path) {
    try {
        return parse_reader(read_text(path));
    } catch (const InputError& e) {
        throw InputError(path + ": " + e.what());
    }
}

}  // namespace triagebench::cohort
