#include "doctest.h"
#include "oracles.hpp"
#include "triagebench/cohort.hpp"
#include "triagebench/survival.hpp"

#include <random>

using namespace triagebench;
using namespace triagebench::survival;

namespace {

const std::vector<double> kTime{5, 8, 8, 12, 15, 20, 22, 30, 31, 40, 44, 50};
const std::vector<int> kEvent{1, 1, 0, 1, 1, 0, 1, 1, 0, 1, 0, 0};
const std::vector<int> kGroup{1, 1, 1, 1, 0, 1, 0, 0, 1, 0, 0, 0};
const std::vector<double> kX{2.1, 1.5, 0.3, 1.8, 0.2, 0.9, 1.1, 0.1, 1.4, 0.5, 0.7, 0.2};

regression::DesignMatrix one_column(const std::string& name, const std::vector<double>& x) {
    regression::DesignMatrix d;
    d.names = {name};
    d.X = Eigen::Map<const Eigen::VectorXd>(x.data(), Eigen::Index(x.size()));
    return d;
}

struct Synthetic {
    std::vector<double> time, x, risk;
    std::vector<int> event;
};

Synthetic synthetic(std::uint64_t seed, std::size_t n) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    std::exponential_distribution<double> ex(1.0);
    Synthetic s;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = z(rng);
        const double t = ex(rng) / std::exp(0.7 * x) * 20.0;
        const double c = ex(rng) * 30.0;
        s.x.push_back(x);
        s.time.push_back(std::round(std::min(t, c) * 2) / 2 + 0.5);  // coarse grid gives tied times
        s.event.push_back(t <= c ? 1 : 0);
        s.risk.push_back(std::round(x * 3) / 3);  // tied risks
    }
    return s;
}

}  // namespace

TEST_CASE("Kaplan-Meier on a hand-worked example") {
    std::vector<double> t;
    std::vector<int> e;
    for (std::size_t i = 0; i < kTime.size(); ++i) {
        if (kGroup[i]) {
            t.push_back(kTime[i]);
            e.push_back(kEvent[i]);
        }
    }
    auto km = kaplan_meier(t, e);
    REQUIRE(km.time == std::vector<double>{5, 8, 12});
    CHECK(km.survival[0] == doctest::Approx(5.0 / 6.0));
    CHECK(km.survival[1] == doctest::Approx(2.0 / 3.0));
    CHECK(km.survival[2] == doctest::Approx(4.0 / 9.0));
    CHECK(km.at_risk[1] == 5);
    CHECK(km.at(4.9) == 1.0);
    CHECK(km.at(10) == doctest::Approx(2.0 / 3.0));
    CHECK(km.at(100) == doctest::Approx(4.0 / 9.0));
}

TEST_CASE("log-rank reference value") {
    auto lr = logrank_test(kTime, kEvent, kGroup);
    CHECK(lr.chi2 == doctest::Approx(0.9945925).epsilon(1e-6));
    CHECK(lr.p == doctest::Approx(0.3186225).epsilon(1e-6));
}

TEST_CASE("Cox fit matches a reference Breslow fit") {
    auto fit = cox_fit(kTime, kEvent, one_column("x", kX));
    CHECK(fit.converged);
    CHECK(fit.beta[0] == doctest::Approx(1.41205933).epsilon(1e-6));
    CHECK(fit.coefficients[0].se == doctest::Approx(0.7936044).epsilon(1e-5));
    CHECK(fit.log_partial_likelihood == doctest::Approx(-11.923006085).epsilon(1e-8));
    CHECK(fit.coef("x").effect == doctest::Approx(std::exp(fit.beta[0])));
}

TEST_CASE("Cox MLE matches grid maximisation of the partial likelihood") {
    for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
        auto s = synthetic(seed, 60);
        auto fit = cox_fit(s.time, s.event, one_column("x", s.x));
        REQUIRE(fit.converged);
        auto best = oracle::grid_argmax(
            [&](const std::vector<double>& b) { return oracle::cox_loglik(s.time, s.event, s.x, b[0]); }, {-5}, {5});
        CHECK(std::fabs(fit.beta[0] - best[0]) < 1e-4);
        // library and oracle agree on the likelihood itself
        Eigen::VectorXd b(1);
        b << 0.37;
        CHECK(cox_log_partial_likelihood(s.time, s.event, one_column("x", s.x).X, b) ==
              doctest::Approx(oracle::cox_loglik(s.time, s.event, s.x, 0.37)));
    }
}

TEST_CASE("Cox input checks and monotone likelihood") {
    std::vector<double> flat(kTime.size(), 1.0);
    CHECK_THROWS_AS(cox_fit(kTime, kEvent, one_column("c", flat)), InputError);
    std::vector<int> none(kTime.size(), 0);
    CHECK_THROWS_AS(cox_fit(kTime, none, one_column("x", kX)), Inestimable);
    // perfectly separated: every event has x = 1 and all of them happen first
    std::vector<double> t{1, 2, 3, 4, 5, 6}, x{1, 1, 1, 0, 0, 0};
    std::vector<int> e{1, 1, 1, 0, 0, 0};
    auto fit = cox_fit(t, e, one_column("x", x));
    CHECK(fit.monotone_likelihood);
    CHECK_FALSE(fit.warnings.empty());
}

TEST_CASE("C-index equals pair enumeration") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        auto s = synthetic(seed, 5 + seed);
        if (std::count(s.event.begin(), s.event.end(), 1) == 0) continue;
        auto ref = oracle::cindex(s.risk, s.time, s.event);
        if (ref.comparable == 0) continue;
        auto c = concordance_index(s.risk, s.time, s.event);
        CHECK(c.comparable == ref.comparable);
        CHECK(c.concordant == ref.concordant);
        CHECK(c.value == doctest::Approx(ref.concordant / double(ref.comparable)));
    }
}

TEST_CASE("C-index is invariant under strictly increasing risk transforms") {
    auto s = synthetic(77, 80);
    std::vector<double> tr;
    for (double r : s.risk) tr.push_back(std::exp(2 * r) - 4);
    CHECK(concordance_index(s.risk, s.time, s.event).value == concordance_index(tr, s.time, s.event).value);
}

TEST_CASE("fold bootstrap pools replicates and averages fold C-indices") {
    auto s = synthetic(5, 90);
    std::vector<int> fold;
    for (std::size_t i = 0; i < s.time.size(); ++i) fold.push_back(int(i % 3));
    resample::BootstrapOptions o;
    o.n_resamples = 100;
    auto r = fold_cindex_bootstrap(s.risk, s.time, s.event, fold, o);
    CHECK(r.n_resamples == 300);
    double mean = 0;
    for (int f = 0; f < 3; ++f) {
        std::vector<double> rr, tt;
        std::vector<int> ee;
        for (std::size_t i = 0; i < fold.size(); ++i) {
            if (fold[i] == f) {
                rr.push_back(s.risk[i]);
                tt.push_back(s.time[i]);
                ee.push_back(s.event[i]);
            }
        }
        mean += concordance_index(rr, tt, ee).value / 3.0;
    }
    CHECK(r.point == doctest::Approx(mean));
    CHECK(r.lo <= r.hi);
}

TEST_CASE("median risk split sends ties to the low group") {
    std::vector<double> risk{0.1, 0.5, 0.5, 0.5, 0.9};
    auto g = risk_dichotomize(risk);
    CHECK(g.cut == 0.5);
    CHECK(g.high == std::vector<int>{0, 0, 0, 0, 1});
    auto g2 = risk_dichotomize(risk, 0.05);
    CHECK(g2.high == std::vector<int>{1, 1, 1, 1, 1});
}

TEST_CASE("adjusted curves average the covariate-specific survival") {
    auto s = synthetic(9, 70);
    std::vector<double> grp;
    for (double x : s.x) grp.push_back(x > 0 ? 1.0 : 0.0);
    regression::DesignMatrix X;
    X.names = {"group", "x"};
    X.X.resize(Eigen::Index(s.x.size()), 2);
    for (std::size_t i = 0; i < s.x.size(); ++i) {
        X.X(Eigen::Index(i), 0) = grp[i];
        X.X(Eigen::Index(i), 1) = s.x[i];
    }
    auto fit = cox_fit(s.time, s.event, X);
    auto curves = adjusted_curves(fit, X, "group", {0.0, 1.0});
    REQUIRE(curves.size() == 2);
    const std::size_t k = curves[0].time.size() / 2;
    const double t = curves[0].time[k];
    double manual = 0;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
        const double lp = fit.beta[0] * 1.0 + fit.beta[1] * s.x[i];
        manual += std::exp(-fit.cumhaz_at(t) * std::exp(lp));
    }
    CHECK(curves[1].survival[k] == doctest::Approx(manual / double(s.x.size())));
    for (std::size_t j = 1; j < curves[0].survival.size(); ++j) CHECK(curves[0].survival[j] <= curves[0].survival[j - 1]);
    CHECK_THROWS_AS(adjusted_curves(fit, X, "missing", {0.0}), InputError);
}

TEST_CASE("Cox bootstrap reports one interval per coefficient") {
    auto s = synthetic(11, 60);
    resample::BootstrapOptions o;
    o.n_resamples = 60;
    auto b = cox_bootstrap(s.time, s.event, one_column("x", s.x), o);
    REQUIRE(b.size() == 1);
    CHECK(b[0].hr.lo <= b[0].hr.point);
    CHECK(b[0].hr.point <= b[0].hr.hi);
    CHECK(b[0].p > 0.0);
}

TEST_CASE("covariate design and fold-score averaging") {
    auto recs = cohort::parse_survival(
        "case_id,time_months,event,cov_age,cov_grade,risk_score_fold1,risk_score_fold2\n"
        "a,10,1,50,G2,0.2,0.4\n"
        "b,20,0,60,G1,0.1,0.3\n"
        "c,30,1,70,G3,0.5,0.7\n");
    auto d = covariate_design(recs, {"age", "grade"});
    CHECK(d.names == std::vector<std::string>{"age", "grade=G2", "grade=G3"});
    CHECK(d.X(0, 1) == 1.0);
    CHECK(d.X(1, 1) == 0.0);
    CHECK(d.X(1, 2) == 0.0);
    auto avg = average_fold_scores(recs);
    CHECK(avg[0] == doctest::Approx(0.3));
    auto sd = survival_data(recs);
    CHECK(sd.risk[2] == doctest::Approx(0.6));
    CHECK_THROWS_AS(covariate_design(recs, {"nope"}), InputError);
}
