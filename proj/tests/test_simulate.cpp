#include "doctest.h"
#include "triagebench/simulate.hpp"

#include <random>

using namespace triagebench;
using namespace triagebench::simulate;

namespace {

struct PublishedRow {
    double t;
    std::size_t rescued, reviews;
    double rescue_rate, nnr;
};

// ER second-review table, total false negatives 50
const std::vector<PublishedRow> kErRescue{
    {0.1, 47, 189, 0.94, 4.02}, {0.2, 38, 147, 0.76, 3.87}, {0.3, 30, 109, 0.60, 3.63},
    {0.4, 25, 90, 0.50, 3.60},  {0.5, 20, 71, 0.40, 3.55},  {0.6, 11, 50, 0.22, 4.55},
    {0.7, 10, 36, 0.20, 3.60},  {0.8, 10, 32, 0.20, 3.20},  {0.9, 9, 20, 0.18, 2.22},
};

}  // namespace

TEST_CASE("second-review identities reproduce the ER rescue table") {
    for (const auto& r : kErRescue) {
        auto o = SecondReviewOutcome::from_counts(r.t, 50, r.rescued, r.reviews);
        CHECK(*o.rescue_rate == doctest::Approx(r.rescue_rate).epsilon(0.005));
        CHECK(*o.nnr == doctest::Approx(r.nnr).epsilon(0.003));
        CHECK(o.false_alarm_reviews == r.reviews - r.rescued);
        CHECK_FALSE(o.review_burden.has_value());
    }
}

TEST_CASE("rescue-burden selection over published rows picks T = 0.479") {
    std::vector<SecondReviewOutcome> rows;
    for (const auto& r : kErRescue) rows.push_back(SecondReviewOutcome::from_counts(r.t, 50, r.rescued, r.reviews, 207));
    rows.push_back(SecondReviewOutcome::from_counts(0.479, 50, 22, 74, 207));
    auto sel = select_second_review(rows, {0.4, 0.4});
    REQUIRE(sel.selected.has_value());
    const auto& best = sel.rows[*sel.selected];
    CHECK(best.threshold == 0.479);
    CHECK(*best.rescue_rate == doctest::Approx(0.44));
    CHECK(*best.review_burden == doctest::Approx(0.357).epsilon(0.002));
    CHECK(*best.nnr == doctest::Approx(3.4).epsilon(0.01));

    auto none = select_second_review(rows, {0.99, 0.01});
    CHECK_FALSE(none.selected.has_value());
    CHECK_FALSE(none.binding_constraint.empty());
}

TEST_CASE("rescue counts cannot exceed their totals") {
    CHECK_THROWS_AS(SecondReviewOutcome::from_counts(0.5, 10, 11, 20), InputError);
    CHECK_THROWS_AS(SecondReviewOutcome::from_counts(0.5, 10, 5, 4), InputError);
    auto zero = SecondReviewOutcome::from_counts(0.5, 0, 0, 3);
    CHECK_FALSE(zero.rescue_rate.has_value());
    CHECK_FALSE(zero.nnr.has_value());
}

TEST_CASE("case-level second review counts flagged cases") {
    std::vector<double> s{0.9, 0.7, 0.4, 0.2, 0.6};
    std::vector<int> y{1, 0, 1, 0, 0};
    auto o = second_review(s, y, 0.5);
    CHECK(o.total_fn == 2);
    CHECK(o.rescued_fn == 1);
    CHECK(o.review_cases == 3);
    CHECK(*o.doctor_negative_cases == 5);
    CHECK(*o.review_burden == doctest::Approx(0.6));
    auto sw = second_review_sweep(s, y, {0.5, 0.7});
    REQUIRE(sw.selected.has_value());
    const auto& sel = sw.rows[*sw.selected];
    CHECK(*sel.rescue_rate >= 0.5);
    CHECK(*sel.review_burden <= 0.7);
}

TEST_CASE("rule-out triage from published counts") {
    auto internal = ruleout_from_counts(101, 68, 68);
    CHECK(internal.ruleout_coverage == doctest::Approx(0.673).epsilon(0.001));
    CHECK(*internal.npv_at_ruleout == 1.0);
    auto external = ruleout_from_counts(1994, 1062, 1050);
    CHECK(external.ruleout_coverage == doctest::Approx(0.533).epsilon(0.001));
    CHECK(*external.npv_at_ruleout == doctest::Approx(0.989).epsilon(0.0005));
    CHECK_THROWS_AS(ruleout_from_counts(10, 11, 0), InputError);
}

TEST_CASE("triage partitions every case into exactly one zone") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u;
    std::vector<double> s(200);
    std::vector<int> y(200);
    for (std::size_t i = 0; i < s.size(); ++i) {
        s[i] = u(rng);
        y[i] = int(u(rng) < s[i]);
    }
    auto o = triage(s, y, 0.2, 0.8);
    CHECK(o.ruleout_cases + o.rulein_cases + o.gray_cases == o.total_cases);
    std::size_t out = 0, tn = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] < 0.2) {
            ++out;
            tn += std::size_t(y[i] == 0);
        }
    }
    CHECK(o.ruleout_cases == out);
    CHECK(o.ruleout_true_negatives == tn);

    // coverage grows with the rule-out threshold
    double prev = -1;
    for (double t = 0.0; t <= 1.0; t += 0.05) {
        const double cov = triage(s, y, t, std::nullopt).ruleout_coverage;
        CHECK(cov >= prev);
        prev = cov;
    }
    CHECK_THROWS_AS(triage(s, y, 0.9, 0.1), InputError);
}

TEST_CASE("empty rule-out zone leaves NPV undefined with a warning") {
    std::vector<double> s{0.5, 0.6};
    std::vector<int> y{0, 1};
    resample::BootstrapOptions o;
    o.n_resamples = 50;
    auto out = triage(s, y, 0.1, std::nullopt, &o);
    CHECK_FALSE(out.npv_at_ruleout.has_value());
    CHECK_FALSE(out.npv_ci.has_value());
}

TEST_CASE("prioritisation at 100% testing equals prevalence") {
    // 85 positives among 235 cases
    auto o = prioritization_from_counts(Strategy::model_only, 1.0, 235, 85, 235, 85);
    CHECK(*o.ppv == doctest::Approx(85.0 / 235.0));
    CHECK(o.prevalence == doctest::Approx(0.362).epsilon(0.001));
    CHECK(*o.enrichment == doctest::Approx(1.0));
    CHECK(*o.tests_per_mutation == doctest::Approx(2.8).epsilon(0.02));
    CHECK(*o.sensitivity == 1.0);
}

TEST_CASE("external prioritisation row: enrichment times prevalence equals PPV") {
    // CPTAC 20% row as published: PPV 63.6%, enrichment 1.76, prevalence 36/99
    const double prevalence = 36.0 / 99.0;
    CHECK(1.76 * prevalence == doctest::Approx(0.636).epsilon(0.01));
    // and the identity holds exactly for any computed row
    auto o = prioritization_from_counts(Strategy::model_only, 0.2, 99, 36, 22, 14, 0.656);
    CHECK(*o.enrichment * o.prevalence == doctest::Approx(*o.ppv));
    CHECK(*o.sensitivity == doctest::Approx(14.0 / 36.0));
    CHECK(*o.tests_per_mutation == doctest::Approx(22.0 / 14.0));
}

TEST_CASE("internal prioritisation includes boundary ties") {
    std::vector<RankedCase> cases{{"a", 0.9, 1}, {"b", 0.8, 0}, {"c", 0.8, 1}, {"d", 0.1, 0}, {"e", 0.05, 0}};
    auto out = prioritize_internal(Strategy::model_only, cases, {0.0, 0.2, 0.4, 1.0});
    CHECK(out[0].selected == 0);
    CHECK(*out[0].sensitivity == 0.0);
    CHECK(out[1].selected == 1);
    CHECK(out[2].selected == 3);  // ceil(2) = 2, widened to the tie at 0.8
    CHECK(out[2].true_positives == 2);
    CHECK(*out[2].ppv == doctest::Approx(2.0 / 3.0));
    CHECK(out[3].selected == 5);
    CHECK(*out[3].enrichment == doctest::Approx(1.0));

    std::vector<double> internal{0.9, 0.8, 0.8, 0.1, 0.05};
    CHECK(transfer_threshold(internal, 0.4) == 0.8);
    auto ext = prioritize_external(Strategy::model_only, cases, 0.8, 0.4);
    CHECK(ext.selected == 3);
    std::vector<double> flat{0.5, 0.5};
    CHECK_THROWS_AS(transfer_threshold(flat, 0.5), InputError);
}

TEST_CASE("strategy names round-trip") {
    for (auto s : {Strategy::clinical, Strategy::model_only, Strategy::clinical_plus_model}) {
        CHECK(parse_strategy(to_string(s)) == s);
    }
    CHECK_THROWS_AS(parse_strategy("oracle"), InputError);
}

TEST_CASE("deferral analysis partitions deferred cases") {
    std::vector<double> s{0.05, 0.1, 0.5, 0.02, 0.9};
    std::vector<int> y{0, 1, 1, 0, 0};
    std::vector<int> deferred{1, 1, 1, 0, 0};
    auto d = deferral_analysis(s, y, deferred, 0.2);
    CHECK(d.non_deferred == 2);
    CHECK(d.safe_rescues == 1);
    CHECK(d.unsafe_rescues == 1);
    CHECK(d.still_deferred == 1);
}
