#include <catch2/catch_amalgamated.hpp>

#include "pinlab/numeric.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>

using namespace pinlab;

TEST_CASE("compensated sum survives catastrophic cancellation", "[numeric]") {
    KahanSum k;
    k.add(1.0);
    k.add(1e100);
    k.add(1.0);
    k.add(-1e100);
    CHECK(k.value() == 2.0);

    KahanSum tenth;
    for (int i = 0; i < 1000000; ++i) tenth.add(0.1);
    CHECK(std::abs(tenth.value() - 100000.0) < 1e-9);
}

TEST_CASE("streaming log-sum-exp", "[numeric]") {
    LogSumExp l;
    CHECK(l.empty());
    l.add(std::log(1.0));
    l.add(std::log(2.0));
    l.add(std::log(3.0));
    CHECK_THAT(l.value(), Catch::Matchers::WithinAbs(std::log(6.0), 1e-14));

    LogSumExp h; // far outside linear-domain range
    h.add(1000.0);
    h.add(1000.0 + std::log(2.0));
    CHECK_THAT(h.value(), Catch::Matchers::WithinAbs(1000.0 + std::log(3.0), 1e-12));

    LogSumExp inf;
    inf.add(-std::numeric_limits<double>::infinity());
    CHECK(inf.empty());
    inf.add(2.5);
    CHECK_THAT(inf.value(), Catch::Matchers::WithinAbs(2.5, 1e-15));
}

TEST_CASE("online mean and standard error", "[numeric]") {
    MeanAccumulator acc;
    for (double x : {2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0}) acc.add(x);
    CHECK_THAT(acc.mean(), Catch::Matchers::WithinAbs(5.0, 1e-14));
    CHECK_THAT(acc.variance(), Catch::Matchers::WithinAbs(32.0 / 7.0, 1e-12));

    MeanAccumulator constant;
    for (int i = 0; i < 10; ++i) constant.add(3.25);
    CHECK(constant.stderror() == 0.0);
}

TEST_CASE("least squares slope on an exact line", "[numeric]") {
    std::vector<double> x{1, 2, 3, 4, 5}, y;
    for (double xi : x) y.push_back(3.0 * xi + 1.0);
    CHECK_THAT(ols_slope(x, y), Catch::Matchers::WithinAbs(3.0, 1e-13));
    CHECK_THROWS_AS(ols_slope({1.0}, {2.0}), std::invalid_argument);
    CHECK_THROWS_AS(ols_slope({1.0, 1.0}, {2.0, 3.0}), std::invalid_argument);
}

TEST_CASE("upper incomplete gamma with negative parameter vs quadrature", "[numeric]") {
    boost::math::quadrature::tanh_sinh<double> integrator;
    for (double a : {0.3, 0.5, 0.7}) {
        for (double z : {0.01, 1.0, 10.0}) {
            auto f = [&](double t) { return std::pow(t, -a - 1.0) * std::exp(-t); };
            double oracle = integrator.integrate(f, z, z + 300.0, 1e-13);
            double got = upper_gamma_neg(a, z);
            CHECK_THAT(got, Catch::Matchers::WithinRel(oracle, 1e-10));
        }
    }
    CHECK_THROWS_AS(upper_gamma_neg(1.5, 1.0), std::domain_error);
    CHECK_THROWS_AS(upper_gamma_neg(0.5, 0.0), std::domain_error);
}

TEST_CASE("Euler-Maclaurin tail agrees with dense summation", "[numeric]") {
    const double a = 0.5;
    const std::uint64_t n_max = 10000000;
    for (double x : {1e-6, 1e-4, 1e-2}) {
        double dense = exp_power_sum(a, x, n_max, n_max); // pure brute force
        double em = exp_power_sum(a, x, n_max, 100000);   // brute to 1e5 + tail
        CHECK_THAT(em, Catch::Matchers::WithinRel(dense, 1e-12));
    }
    // x = 0 reduces to a truncated zeta sum
    double dense0 = exp_power_sum(a, 0.0, 1000000, 1000000);
    double em0 = exp_power_sum(a, 0.0, 1000000, 10000);
    CHECK_THAT(em0, Catch::Matchers::WithinRel(dense0, 1e-12));
}
