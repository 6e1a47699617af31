#include <doctest.h>

#include <cmath>

#include "cesmark/optim.hpp"
#include "cesmark/stats.hpp"

using namespace cesmark;

TEST_CASE("chi-squared survival function against known values") {
    // Reference values from standard tables.
    CHECK(chi2_sf(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(chi2_sf(18.307038053275146, 10) == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(chi2_sf(3.20, 8) == doctest::Approx(0.921).epsilon(2e-3));
    CHECK(chi2_sf(0.0, 4) == doctest::Approx(1.0));
}

TEST_CASE("summary statistics") {
    std::vector<double> v = {1, 2, 3, 4, 100};
    const SummaryStats s = summarize(v);
    CHECK(s.median == doctest::Approx(3.0));
    CHECK(s.mean == doctest::Approx(22.0));
    CHECK(s.max == doctest::Approx(100.0));
    CHECK(s.min == doctest::Approx(1.0));
    CHECK(s.n == 5);
}

TEST_CASE("weighted mean") {
    const WeightedMean wm = weighted_mean({1.0, 3.0}, {1.0, 1.0});
    CHECK(wm.mean == doctest::Approx(2.0));
    const WeightedMean wm2 = weighted_mean({1.0, 3.0}, {3.0, 1.0});
    CHECK(wm2.mean == doctest::Approx(1.5));
}

TEST_CASE("correlation") {
    std::vector<double> a = {1, 2, 3, 4};
    std::vector<double> b = {2, 4, 6, 8};
    CHECK(correlation(a, b) == doctest::Approx(1.0));
    std::vector<double> c = {8, 6, 4, 2};
    CHECK(correlation(a, c) == doctest::Approx(-1.0));
}

TEST_CASE("multistart bounded minimization finds a sharp interior optimum") {
    // Quartic bowl with the minimum at (0.501, 0.773, 0.222).
    auto f = [](const std::vector<double>& x) {
        const double a = x[0] - 0.501, b = x[1] - 0.773, c = x[2] - 0.222;
        return a * a + 2.0 * b * b + 0.5 * c * c + 10.0 * a * a * b * b;
    };
    Bounds bounds = {{0.01, 0.99}, {0.01, 0.99}, {0.01, 0.99}};
    OptimOptions opts;
    opts.multistarts = 6;
    const OptimResult res = minimize_multistart(f, bounds, opts);
    CHECK(res.x[0] == doctest::Approx(0.501).epsilon(1e-6));
    CHECK(res.x[1] == doctest::Approx(0.773).epsilon(1e-6));
    CHECK(res.x[2] == doctest::Approx(0.222).epsilon(1e-6));
}

TEST_CASE("scalar minimization") {
    auto f = [](double x) { return (x - 0.526) * (x - 0.526) + 1.0; };
    CHECK(minimize_scalar(f, 0.0, 10.0, 1e-12) == doctest::Approx(0.526).epsilon(1e-7));
}

TEST_CASE("kahan sum is exact where naive summation drifts") {
    KahanSum s;
    for (int i = 0; i < 1000000; ++i) s.add(0.1);
    CHECK(s.value() == doctest::Approx(100000.0).epsilon(1e-12));
}
