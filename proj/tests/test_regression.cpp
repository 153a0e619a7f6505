#include "doctest.h"
#include "oracles.hpp"
#include "triagebench/regression.hpp"

#include <random>

using namespace triagebench;
using namespace triagebench::regression;

namespace {

struct Clustered {
    std::vector<double> y;
    std::vector<int> yi;
    std::vector<double> x1, x2;
    std::vector<std::string> cluster;
};

Clustered clustered_data(std::uint64_t seed, int n_clusters, int per_cluster) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> u;
    Clustered d;
    for (int c = 0; c < n_clusters; ++c) {
        const double frailty = 0.8 * z(rng);
        for (int k = 0; k < per_cluster; ++k) {
            const double x1 = double(k % 2);
            const double x2 = z(rng);
            const double eta = -0.3 + 0.9 * x1 + 0.5 * x2 + frailty;
            const int y = u(rng) < 1.0 / (1.0 + std::exp(-eta)) ? 1 : 0;
            d.y.push_back(y);
            d.yi.push_back(y);
            d.x1.push_back(x1);
            d.x2.push_back(x2);
            d.cluster.push_back("r" + std::to_string(c));
        }
    }
    return d;
}

}  // namespace

TEST_CASE("logistic MLE matches a fine grid maximisation") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> u;
    for (int trial = 0; trial < 3; ++trial) {
        std::vector<double> x;
        std::vector<int> y;
        for (int i = 0; i < 80; ++i) {
            x.push_back(z(rng));
            y.push_back(u(rng) < 1.0 / (1.0 + std::exp(-(0.4 + 1.1 * x.back()))) ? 1 : 0);
        }
        auto fit = logistic_fit(y, with_intercept({"x"}, {x}));
        REQUIRE(fit.converged);
        auto best = oracle::grid_argmax(
            [&](const std::vector<double>& b) { return oracle::logistic_loglik(y, x, b[0], b[1]); }, {-5, -5}, {5, 5});
        CHECK(fit.coefficients[0].estimate == doctest::Approx(best[0]).epsilon(1e-4).scale(1));
        CHECK(std::fabs(fit.coefficients[1].estimate - best[1]) < 1e-4);
        CHECK(std::fabs(fit.coefficients[0].estimate - best[0]) < 1e-4);
        CHECK(fit.log_likelihood == doctest::Approx(oracle::logistic_loglik(y, x, best[0], best[1])));
        CHECK(fit.coef("x").effect == doctest::Approx(std::exp(fit.coef("x").estimate)));
    }
}

TEST_CASE("logistic standard errors come from the observed information") {
    // balanced 2x2 table: SE of log OR = sqrt(1/a + 1/b + 1/c + 1/d)
    std::vector<int> y;
    std::vector<double> x;
    auto add = [&](int xv, int yv, int k) {
        for (int i = 0; i < k; ++i) {
            x.push_back(xv);
            y.push_back(yv);
        }
    };
    add(0, 0, 30);
    add(0, 1, 10);
    add(1, 0, 15);
    add(1, 1, 25);
    auto fit = logistic_fit(y, with_intercept({"x"}, {x}));
    CHECK(fit.coef("x").estimate == doctest::Approx(std::log(25.0 * 30.0 / (10.0 * 15.0))));
    CHECK(fit.coef("x").se == doctest::Approx(std::sqrt(1 / 30.0 + 1 / 10.0 + 1 / 15.0 + 1 / 25.0)));
}

TEST_CASE("likelihood-ratio test for a nested logistic model") {
    auto d = clustered_data(3, 40, 5);
    auto full = logistic_fit(d.yi, with_intercept({"x1", "x2"}, {d.x1, d.x2}));
    auto reduced = logistic_fit(d.yi, with_intercept({"x1"}, {d.x1}));
    auto lr = lr_test(full, reduced);
    CHECK(lr.df == 1);
    CHECK(lr.chi2 == doctest::Approx(2.0 * (full.log_likelihood - reduced.log_likelihood)));
    CHECK(lr.chi2 >= 0.0);
    CHECK(lr.delta_auroc.has_value());
    CHECK_THROWS_AS(lr_test(reduced, full), InputError);
}

TEST_CASE("aliased columns are flagged and dropped") {
    std::vector<double> a{1, 2, 3, 4, 5, 6}, b{2, 4, 6, 8, 10, 12}, c{0, 1, 0, 1, 1, 0};
    auto design = with_intercept({"a", "b", "c"}, {a, b, c});
    auto flags = aliased_columns(design.X);
    CHECK(flags == std::vector<bool>{false, false, true, false});
    std::vector<int> y{0, 0, 1, 0, 1, 1};
    auto fit = logistic_fit(y, design);
    CHECK(fit.coef("b").aliased);
    CHECK_FALSE(fit.warnings.empty());
    CHECK(fit.n_params == 3);
}

TEST_CASE("GEE with singleton clusters reproduces the GLM estimates") {
    auto d = clustered_data(8, 1, 150);
    for (auto& c : d.cluster) c += "_" + std::to_string(&c - &d.cluster[0]);
    auto design = with_intercept({"x1", "x2"}, {d.x1, d.x2});
    auto gee = gee_fit(d.y, design, d.cluster);
    auto glm = logistic_fit(d.yi, design);
    CHECK(gee.alpha == 0.0);
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(std::fabs(gee.coefficients[j].estimate - glm.coefficients[j].estimate) < 1e-6);
    }
}

TEST_CASE("identity-link GEE with alpha fixed at zero is ordinary least squares") {
    auto d = clustered_data(12, 20, 4);
    std::vector<double> y;
    for (std::size_t i = 0; i < d.x1.size(); ++i) y.push_back(2.0 + 0.5 * d.x1[i] - 1.5 * d.x2[i] + 0.1 * double(i % 7));
    auto design = with_intercept({"x1", "x2"}, {d.x1, d.x2});
    GeeOptions o;
    o.link = Link::identity;
    o.variance = VarianceFunction::constant;
    o.fixed_alpha = 0.0;
    auto gee = gee_fit(y, design, d.cluster, o);
    const Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), Eigen::Index(y.size()));
    const Eigen::VectorXd ols = design.X.colPivHouseholderQr().solve(yv);
    for (Eigen::Index j = 0; j < 3; ++j) CHECK(std::fabs(gee.coefficients[std::size_t(j)].estimate - ols(j)) < 1e-8);
}

TEST_CASE("exchangeable logit GEE matches the dense estimating-equation oracle") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        auto d = clustered_data(seed, 12, 8);
        auto design = with_intercept({"x1", "x2"}, {d.x1, d.x2});
        GeeOptions o;
        o.tol = 1e-12;
        auto gee = gee_fit(d.y, design, d.cluster, o);
        REQUIRE(gee.converged);
        auto ref = oracle::gee_logit_exchangeable(d.y, design.X, d.cluster);
        CHECK(std::fabs(gee.alpha - ref.alpha) < 1e-6);
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(std::fabs(gee.coefficients[j].estimate - ref.beta(Eigen::Index(j))) < 1e-6);
            CHECK(std::fabs(gee.coefficients[j].se - ref.robust_se(Eigen::Index(j))) < 1e-6);
        }
        CHECK(gee.coef("x1").effect == doctest::Approx(std::exp(gee.coef("x1").estimate)));
    }
}

TEST_CASE("GEE needs at least two clusters") {
    std::vector<double> y{0, 1, 1, 0};
    std::vector<std::string> one(4, "r1");
    auto design = with_intercept({"x"}, {{0, 1, 0, 1}});
    CHECK_THROWS_AS(gee_fit(y, design, one), Inestimable);
}

TEST_CASE("log-link GEE recovers a multiplicative effect") {
    std::vector<double> y, x;
    std::vector<std::string> cl;
    for (int c = 0; c < 10; ++c) {
        for (int k = 0; k < 6; ++k) {
            x.push_back(k % 2);
            y.push_back((k % 2 ? 60.0 : 40.0) * (1.0 + 0.05 * ((c + k) % 3 - 1)));
            cl.push_back("r" + std::to_string(c));
        }
    }
    GeeOptions o;
    o.link = Link::log;
    o.variance = VarianceFunction::constant;
    auto fit = gee_fit(y, with_intercept({"x"}, {x}), cl, o);
    CHECK(fit.coef("x").effect == doctest::Approx(1.5).epsilon(0.01));
}
