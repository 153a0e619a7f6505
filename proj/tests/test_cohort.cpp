#include "doctest.h"
#include "triagebench/cohort.hpp"
#include "triagebench/csv.hpp"

#include <sstream>

using namespace triagebench;
using namespace triagebench::cohort;

namespace {

CohortSchema binary_schema() {
    return parse_schema_json(R"({"name": "er_internal", "task": "ER", "classes": ["neg", "pos"], "positive": "pos"})");
}

CohortSchema three_class_schema() {
    return parse_schema_json(R"({"name": "subtype", "task": "subtype", "classes": ["A", "B", "C"], "normalized": true})");
}

}  // namespace

TEST_CASE("csv quoting round-trips") {
    std::ostringstream os;
    csv::write_row(os, {"plain", "with,comma", "with \"quote\"", ""});
    std::istringstream is("a,b,c,d\n" + os.str());
    auto t = csv::parse(is);
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0][1] == "with,comma");
    CHECK(t.rows[0][2] == "with \"quote\"");
    CHECK(t.rows[0][3] == "");
    CHECK(t.line_numbers[0] == 2);
}

TEST_CASE("format_double is round-trip exact") {
    for (double v : {0.1, 1.0 / 3.0, 1e-17, 123456.789, -2.5}) {
        CHECK(std::stod(csv::format_double(v)) == v);
    }
}

TEST_CASE("binary cohort with a single score column fills the complement") {
    auto c = parse_cohort("case_id,label,score,tags\nc1,pos,0.9,Defer;TCGA\nc2,neg,0.2,\n", binary_schema());
    REQUIRE(c.size() == 2);
    CHECK(c.single_score_column);
    CHECK(c.task == "ER");
    CHECK(c.records[0].scores[1] == doctest::Approx(0.9));
    CHECK(c.records[0].scores[0] == doctest::Approx(0.1));
    CHECK(c.records[0].has_tag("Defer"));
    CHECK(c.records[0].has_tag("TCGA"));
    CHECK(c.positive_scores() == std::vector<double>{0.9, 0.2});
    CHECK(c.binary_labels() == std::vector<int>{1, 0});
}

TEST_CASE("cohort write then parse is the identity") {
    auto c = parse_cohort(
        "case_id,label,score_A,score_B,score_C,tags,center,stage\n"
        "x1,A,0.7,0.2,0.1,Defer,site1,pre\n"
        "x2,C,0.1,0.1,0.8,,site2,post\n",
        three_class_schema());
    auto back = parse_cohort(write_cohort(c), three_class_schema());
    CHECK(back == c);
}

TEST_CASE("cohort loader rejects bad rows with line numbers") {
    CHECK_THROWS_WITH_AS(parse_cohort("case_id,label,score\nc1,pos,0.5\nc1,neg,0.4\n", binary_schema()),
                         doctest::Contains("line 3"), InputError);
    CHECK_THROWS_AS(parse_cohort("case_id,label,score\nc1,maybe,0.5\n", binary_schema()), InputError);
    CHECK_THROWS_AS(parse_cohort("case_id,label,score\nc1,pos,abc\n", binary_schema()), InputError);
    CHECK_THROWS_AS(parse_cohort("case_id,label\nc1,pos\n", binary_schema()), InputError);
    // normalized multi-class scores must sum to one
    CHECK_THROWS_AS(parse_cohort("case_id,label,score_A,score_B,score_C\nx,A,0.5,0.5,0.5\n", three_class_schema()),
                    InputError);
    CHECK_THROWS_AS(parse_cohort("case_id,label,score\n", binary_schema()), InputError);
}

TEST_CASE("subgroup filter keeps tagged cases and warns about missing classes") {
    auto c = parse_cohort("case_id,label,score,tags\na,pos,0.9,Defer\nb,pos,0.8,\nc,neg,0.1,\n", binary_schema());
    auto f = subgroup_filter(c, "Defer");
    CHECK(f.cohort.size() == 1);
    CHECK_FALSE(f.warnings.empty());
    auto dist = class_distribution(c);
    CHECK(dist["pos"] == 2);
    CHECK(dist["neg"] == 1);
}

TEST_CASE("paired labels") {
    auto p = parse_paired("case_id,biomarker,pre_label,post_label\n1,ER,positive,negative\n2,ER,neg,neg\n");
    REQUIRE(p.size() == 2);
    CHECK(p[0].pre_positive);
    CHECK_FALSE(p[0].post_positive);
    CHECK_THROWS_AS(parse_paired("case_id,biomarker,pre_label,post_label\n1,ER,weak,neg\n"), InputError);
}

TEST_CASE("survival records parse covariates and fold scores") {
    auto s = parse_survival(
        "case_id,time_months,event,risk_score,fold,cov_age,cov_stage,risk_score_fold1,risk_score_fold2\n"
        "a,12.5,1,0.3,0,61,II,0.2,0.4\n"
        "b,30,0,0.1,1,55,I,0.1,0.1\n");
    REQUIRE(s.size() == 2);
    CHECK(s[0].event == 1);
    CHECK(std::get<double>(s[0].covariates.at("age")) == 61.0);
    CHECK(std::get<std::string>(s[0].covariates.at("stage")) == "II");
    CHECK(s[0].fold_model_scores.size() == 2);
    CHECK_THROWS_AS(parse_survival("case_id,time_months,event\na,-1,1\n"), InputError);
    CHECK_THROWS_AS(parse_survival("case_id,time_months,event\na,3,2\n"), InputError);
}

TEST_CASE("reader records enforce timeout consistency") {
    const std::string header =
        "reader_id,experience,case_id,task,condition,period,with_ai_first,response,truth,correct,confidence,time_s,"
        "timed_out\n";
    auto ok = parse_reader(header + "r1,junior,c1,ER,with_ai,1,1,pos,pos,1,7,30,0\n" +
                           "r1,junior,c2,ER,with_ai,1,1,TIMEOUT,neg,0,,120,1\n");
    CHECK(ok.size() == 2);
    CHECK(ok[1].timed_out);
    CHECK_FALSE(ok[1].confidence.has_value());
    CHECK_THROWS_AS(parse_reader(header + "r1,junior,c1,ER,with_ai,1,1,TIMEOUT,neg,1,,120,1\n"), InputError);
    CHECK_THROWS_AS(parse_reader(header + "r1,junior,c1,ER,with_ai,1,1,pos,pos,1,,30,0\n"), InputError);
    CHECK_THROWS_AS(parse_reader(header + "r1,junior,c1,ER,with_ai,3,1,pos,pos,1,5,30,0\n"), InputError);
    CHECK_THROWS_AS(parse_reader(header + "r1,junior,c1,ER,with_ai,1,1,pos,pos,1,11,30,0\n"), InputError);
}
