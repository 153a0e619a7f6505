#include "doctest.h"
#include "oracles.hpp"
#include "triagebench/cohort.hpp"
#include "triagebench/inference.hpp"

#include <random>

using namespace triagebench;
using namespace triagebench::inference;

// ---- Kolmogorov-Smirnov ------------------------------------------------------

TEST_CASE("KS statistic equals the CDF-gap scan") {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> z;
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t m = 1 + rng() % 15, n = 1 + rng() % 15;
        std::vector<double> a(m), b(n);
        for (auto& v : a) v = std::round(z(rng) * 4) / 4;  // ties across samples
        for (auto& v : b) v = std::round((z(rng) + 0.3) * 4) / 4;
        CHECK(ks_two_sample(a, b).d == doctest::Approx(oracle::ks_d(a, b)).epsilon(1e-12));
    }
}

TEST_CASE("exact KS p-value equals enumeration over all labellings") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u;
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t m = 1 + rng() % 6, n = 1 + rng() % 6;
        std::vector<double> a(m), b(n);
        for (auto& v : a) v = u(rng);
        for (auto& v : b) v = u(rng) + 0.2;
        const auto r = ks_two_sample(a, b, KsMethod::exact);
        CHECK(r.p == doctest::Approx(oracle::ks_enum_p(m, n, r.d)).epsilon(1e-10));
    }
}

TEST_CASE("exact KS reference values") {
    // cross-checked against an independent exact implementation
    CHECK(ks_exact_sf(168, 23, 575) == doctest::Approx(0.70157).epsilon(1e-4));
    std::vector<double> a{0.1, 0.4, 0.7, 1.2, 1.5};
    std::vector<double> b{0.3, 0.9, 1.1, 2.0, 2.2, 2.5, 3.0};
    auto r = ks_two_sample(a, b);
    CHECK(r.method == KsMethod::exact);
    CHECK(r.d == doctest::Approx(4.0 / 7.0));
    CHECK(r.p == doctest::Approx(0.2373737).epsilon(1e-6));
    CHECK(ks_exact_sf(5, 7, 0) == 1.0);
}

TEST_CASE("asymptotic KS uses the Kolmogorov limit with effective n") {
    std::vector<double> a(60), b(80);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = double(i) / 59.0;
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = 0.2 + 1.1 * double(i) / 79.0;
    auto r = ks_two_sample(a, b, KsMethod::asymptotic);
    CHECK(r.d == doctest::Approx(0.275));
    CHECK(r.p == doctest::Approx(0.0111919).epsilon(1e-4));
    CHECK(kolmogorov_sf(0.0) == 1.0);
    CHECK(kolmogorov_sf(3.0) < 1e-7);
}

TEST_CASE("KS is invariant under strictly increasing transforms") {
    std::vector<double> a{0.1, 0.5, 0.9, 1.3}, b{0.2, 0.3, 1.7, 2.2, 2.9};
    std::vector<double> ta, tb;
    for (double v : a) ta.push_back(std::log(v) * 2 + 7);
    for (double v : b) tb.push_back(std::log(v) * 2 + 7);
    auto r1 = ks_two_sample(a, b), r2 = ks_two_sample(ta, tb);
    CHECK(r1.d == r2.d);
    CHECK(r1.p == r2.p);
}

// ---- McNemar ---------------------------------------------------------------

TEST_CASE("McNemar exact binomial") {
    CHECK(mcnemar(2, 8).p == doctest::Approx(0.109375).epsilon(1e-12));
    CHECK(mcnemar(1, 1).p == 1.0);
    CHECK(mcnemar(0, 5).p == doctest::Approx(2.0 / 32.0));
    CHECK(mcnemar(2, 8).mode == McNemarMode::exact);
    CHECK_FALSE(mcnemar(2, 8).statistic.has_value());
    CHECK_THROWS_AS(mcnemar(0, 0), InputError);
    CHECK_THROWS_AS(mcnemar(-1, 2), InputError);
}

TEST_CASE("McNemar chi-square with continuity correction") {
    auto r = mcnemar(20, 40);
    CHECK(r.mode == McNemarMode::chi2);
    CHECK(*r.statistic == doctest::Approx(19.0 * 19.0 / 60.0));
    CHECK(r.p == doctest::Approx(chi2_sf(19.0 * 19.0 / 60.0, 1)));
}

// ---- agreement ---------------------------------------------------------------

TEST_CASE("Cohen kappa on the ER and KI67 concordance fixtures") {
    auto er = cohen_kappa_2x2(57, 1, 1, 18);
    CHECK(er.kappa == doctest::Approx(0.930).epsilon(0.001));
    CHECK(er.concordance->estimate == doctest::Approx(0.974).epsilon(0.001));
    CHECK(er.concordance->lo == doctest::Approx(0.910).epsilon(0.002));
    CHECK(er.concordance->hi == doctest::Approx(0.993).epsilon(0.002));
    CHECK(er.interpretation == "almost perfect");

    auto ki = cohen_kappa_2x2(63, 2, 8, 8);
    CHECK(ki.kappa == doctest::Approx(0.546).epsilon(0.001));
    CHECK(ki.observed_agreement == doctest::Approx(0.877).epsilon(0.001));
    CHECK(ki.interpretation == "moderate");

    CHECK_THROWS_AS(cohen_kappa_2x2(10, 0, 0, 0), Inestimable);
}

TEST_CASE("Cohen kappa from label pairs matches the 2x2 form") {
    std::vector<std::pair<std::string, std::string>> pairs;
    for (int i = 0; i < 5; ++i) pairs.emplace_back("pos", "pos");
    for (int i = 0; i < 2; ++i) pairs.emplace_back("pos", "neg");
    for (int i = 0; i < 1; ++i) pairs.emplace_back("neg", "pos");
    for (int i = 0; i < 4; ++i) pairs.emplace_back("neg", "neg");
    CHECK(cohen_kappa(pairs).kappa == doctest::Approx(cohen_kappa_2x2(5, 2, 1, 4).kappa));
}

TEST_CASE("kappa interpretation bands") {
    CHECK(kappa_band(0.20) == "poor");
    CHECK(kappa_band(0.21) == "fair");
    CHECK(kappa_band(0.40) == "fair");
    CHECK(kappa_band(0.55) == "moderate");
    CHECK(kappa_band(0.80) == "substantial");
    CHECK(kappa_band(0.81) == "almost perfect");
    CHECK(kappa_band(-0.1) == "poor");
}

TEST_CASE("Fleiss kappa on the classic 10 x 5 example") {
    CountMatrix m{{0, 0, 0, 0, 14}, {0, 2, 6, 4, 2}, {0, 0, 3, 5, 6}, {0, 3, 9, 2, 0}, {2, 2, 8, 1, 1},
                  {7, 7, 0, 0, 0},  {3, 2, 6, 3, 0}, {2, 5, 3, 2, 2}, {6, 5, 2, 1, 0}, {0, 2, 2, 3, 7}};
    auto k = fleiss_kappa(m);
    CHECK(k.kappa == doctest::Approx(0.210).epsilon(0.001));
    CHECK(k.n == 10);
    CountMatrix uneven{{2, 0}, {1, 2}};
    CHECK_THROWS_AS(fleiss_kappa(uneven), InputError);
}

TEST_CASE("Wilson interval reference values") {
    auto w = wilson_interval(75, 77);
    CHECK(w.lo == doctest::Approx(0.910).epsilon(0.002));
    auto all = wilson_interval(28, 28);
    CHECK(all.hi == 1.0);
    CHECK(all.lo == doctest::Approx(0.879).epsilon(0.002));
}

// ---- rank tests and correlation -------------------------------------------------

TEST_CASE("exact Wilcoxon p equals 2^n sign enumeration") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 1 + rng() % 12;
        std::vector<double> d(n);
        for (auto& v : d) v = double(int(rng() % 9) - 3) / 2.0;  // ties and zeros
        if (std::all_of(d.begin(), d.end(), [](double v) { return v == 0.0; })) continue;
        auto r = wilcoxon_signed_rank_one_sided(d);
        CHECK(r.exact);
        CHECK(r.p == doctest::Approx(oracle::wilcoxon_enum_p(d)).epsilon(1e-12));
    }
}

TEST_CASE("large-sample Wilcoxon uses the corrected normal approximation") {
    std::vector<double> d{1.5, -0.5, 2.0, 3.1, 0.7, -1.2, 2.2, 0.9, 1.1, -0.3, 2.5, 1.8, 0.4,
                          -0.8, 1.6, 2.7, 0.2, 1.3, -0.1, 0.6, 1.9, 2.4, -0.6, 1.0, 0.8};
    auto r = wilcoxon_signed_rank_one_sided(d);
    CHECK_FALSE(r.exact);
    CHECK(r.w_plus == 286.0);
    CHECK(r.p == doctest::Approx(0.00046673).epsilon(1e-4));
}

TEST_CASE("average ranks share ties") {
    std::vector<double> x{3, 1, 3, 2};
    CHECK(average_ranks(x) == std::vector<double>{3.5, 1, 3.5, 2});
}

TEST_CASE("Pearson and Spearman reference values") {
    std::vector<double> x{1, 2, 3, 4, 5}, y{2, 4, 5, 4, 5};
    auto p = pearson(x, y);
    CHECK(p.r == doctest::Approx(0.7745967));
    CHECK(p.p == doctest::Approx(0.1240271).epsilon(1e-6));
    std::vector<double> a{1, 2, 3, 4, 5, 6}, b{2, 1, 4, 3, 6, 5};
    auto s = spearman(a, b);
    CHECK(s.r == doctest::Approx(0.8285714));
    CHECK(s.p == doctest::Approx(0.0415627).epsilon(1e-6));
    std::vector<double> flat{1, 1, 1, 1};
    std::vector<double> four{1, 2, 3, 4};
    CHECK_THROWS_AS(pearson(flat, four), Inestimable);
    std::vector<double> two{1, 2};
    CHECK_THROWS_AS(pearson(two, two), InputError);
}

TEST_CASE("binned trend groups equal-frequency bins") {
    std::vector<double> s;
    std::vector<int> t;
    for (int i = 0; i < 100; ++i) {
        s.push_back(i / 100.0);
        t.push_back(i % 10 < i / 10 ? 1 : 0);
    }
    auto bt = binned_trend(s, t, 10);
    REQUIRE(bt.bins.size() == 10);
    for (const auto& b : bt.bins) CHECK(b.n == 10);
    CHECK(bt.correlation.r > 0.95);
    CHECK(bt.bins.front().event_rate == 0.0);
}

// ---- model comparison ---------------------------------------------------------------

TEST_CASE("mean ranks handle ties and drop incomplete cohorts") {
    MetricTable t{{"A", "B", "C"}, {"c1", "c2", "c3"}, {{0.9, 0.8, 0.95}, {0.7, 0.8, 0.6}, {0.5, 0.6, std::nan("")}}};
    auto r = model_mean_rank(t);
    CHECK(r.models[0].mean_rank == 1.25);
    CHECK(r.cohorts_used.size() == 2);
    CHECK_FALSE(r.warnings.empty());
    // tie in c2 between A and B
    CHECK(r.models[1].ranks[1] == 1.5);
    auto low = model_mean_rank(t, false);
    CHECK(low.models[2].mean_rank == 1.0);
}

// ---- subgroup shift ----------------------------------------------------------------

TEST_CASE("subgroup shift report compares class-wise score distributions") {
    std::string text = "case_id,label,score,tags\n";
    for (int i = 0; i < 40; ++i) {
        const bool pos = i % 2 == 0;
        text += "c" + std::to_string(i) + "," + (pos ? "pos" : "neg") + "," +
                std::to_string(pos ? 0.5 + i / 100.0 : 0.1 + i / 100.0) + "," + (i < 16 ? "hard" : "") + "\n";
    }
    auto schema = cohort::parse_schema_json(R"({"name": "x", "classes": ["neg", "pos"], "positive": "pos"})");
    auto c = cohort::parse_cohort(text, schema);
    auto sub = cohort::subgroup_filter(c, "hard").cohort;
    resample::BootstrapOptions o;
    o.n_resamples = 100;
    auto rep = subgroup_shift_report(c, sub, o);
    REQUIRE(rep.classes.size() == 2);
    CHECK(rep.classes[1].subgroup_n == 8);
    CHECK(*rep.baseline_auc.auc == 1.0);
    std::vector<double> base_pos, sub_pos;
    for (const auto& r : c.records) {
        if (r.true_label == 1) base_pos.push_back(r.scores[1]);
    }
    for (const auto& r : sub.records) {
        if (r.true_label == 1) sub_pos.push_back(r.scores[1]);
    }
    CHECK(rep.classes[1].ks.d == doctest::Approx(oracle::ks_d(base_pos, sub_pos)));
}
