#include <doctest.h>

#include <cmath>
#include <vector>

#include "elltest/ci_inversion.hpp"
#include "elltest/errors.hpp"
#include "oracles.hpp"

using namespace elltest;

namespace {

// Upper-alpha quantile of t_m by bisection on the integrated density.
double t_upper_quantile(double alpha, double m)
{
    auto sf = [m](double x) { return 0.5 - oracle::simpson([m](double s) { return oracle::t_density(s, m); }, 0.0, x, 4000); };
    double lo = 0.0, hi = 50.0;
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        (sf(mid) > alpha ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

LinearModelData instance(Index n, Index d, double bj, std::uint64_t seed, Index j = 0)
{
    Rng rng(seed);
    const MatrixXd X = oracle::gaussian_matrix(n, d, rng);
    VectorXd beta = VectorXd::Zero(d);
    beta[j] = bj;
    if (d > 3) beta[d - 1] = 2.0;
    return LinearModelData(X * beta + rng.normal_vector(n), X);
}

} // namespace

TEST_CASE("t interval: symmetric with the textbook width")
{
    const LinearModelData data = instance(30, 5, 0.4, 1, 2);
    const oracle::Ols o = oracle::ols(data.y(), data.X(), 2);
    const ConfidenceInterval ci = t_ci(data, 2, 0.05);
    CHECK(0.5 * (ci.lower + ci.upper) == doctest::Approx(o.beta[2]).epsilon(1e-10));
    CHECK(ci.length() == doctest::Approx(2.0 * t_upper_quantile(0.025, 25.0) * o.se_j).epsilon(1e-7));
    CHECK(ci.contains(o.beta[2]));
    CHECK_THROWS_AS(t_ci(data, 2, 1.5), InputError);
}

TEST_CASE("t interval coverage")
{
    int covered = 0;
    const int reps = 2000;
    for (int r = 0; r < reps; ++r) {
        const LinearModelData data = instance(30, 5, 0.7, 1000 + r, 1);
        if (t_ci(data, 1, 0.05).contains(0.7)) ++covered;
    }
    const double cov = static_cast<double>(covered) / reps;
    CHECK(std::fabs(cov - 0.95) < 3.0 * std::sqrt(0.05 * 0.95 / reps));
}

TEST_CASE("t interval equals grid inversion of the two-sided t-test")
{
    const LinearModelData data = instance(40, 6, 0.3, 2, 3);
    const ConfidenceInterval exact = t_ci(data, 3, 0.05);
    GridSpec g;
    g.lower = exact.lower - 0.5;
    g.upper = exact.upper + 0.5;
    g.points = 500;
    const ConfidenceInterval grid =
        invert_on_grid([&](double gamma) { return t_test(data, 3, gamma).p_two; }, g, 0.05, "t-grid");
    CHECK(std::fabs(grid.lower - exact.lower) <= grid.grid_resolution + 1e-12);
    CHECK(std::fabs(grid.upper - exact.upper) <= grid.grid_resolution + 1e-12);
    CHECK(grid.contains(exact.lower));
    CHECK(grid.contains(exact.upper));
}

TEST_CASE("oracle one-sided interval: the three cases")
{
    const LinearModelData data = instance(30, 5, 0.4, 3, 0);
    const oracle::Ols o = oracle::ols(data.y(), data.X(), 0);
    const double q = t_upper_quantile(0.05, 25.0);
    const double lo = o.beta[0] - q * o.se_j, hi = o.beta[0] + q * o.se_j;

    const ConfidenceInterval mid = oracle_one_sided_ci(data, 0, 0.05, o.beta[0]);
    CHECK(mid.length() == doctest::Approx(2.0 * q * o.se_j).epsilon(1e-7));
    CHECK_FALSE(mid.lower_open);
    CHECK_FALSE(mid.upper_open);

    const double below = lo - 1.0;
    const ConfidenceInterval left = oracle_one_sided_ci(data, 0, 0.05, below);
    CHECK(left.lower == below);
    CHECK(left.upper == doctest::Approx(hi).epsilon(1e-7));
    CHECK(left.upper_open);
    CHECK(left.contains(below));
    CHECK_FALSE(left.contains(left.upper));

    const double above = hi + 1.0;
    const ConfidenceInterval right = oracle_one_sided_ci(data, 0, 0.05, above);
    CHECK(right.lower == doctest::Approx(lo).epsilon(1e-7));
    CHECK(right.upper == above);
    CHECK_FALSE(right.contains(above));
}

TEST_CASE("oracle one-sided interval coverage")
{
    int covered = 0;
    const int reps = 2000;
    for (int r = 0; r < reps; ++r) {
        const LinearModelData data = instance(30, 5, -0.5, 5000 + r, 2);
        if (oracle_one_sided_ci(data, 2, 0.05, -0.5).contains(-0.5)) ++covered;
    }
    const double cov = static_cast<double>(covered) / reps;
    CHECK(std::fabs(cov - 0.95) < 3.0 * std::sqrt(0.05 * 0.95 / reps));
}

TEST_CASE("grid inversion on synthetic p-value curves")
{
    GridSpec g;
    g.lower = -2.0;
    g.upper = 2.0;
    g.points = 41;

    SUBCASE("plateau: hull widened by one step")
    {
        const ConfidenceInterval ci =
            invert_on_grid([](double x) { return std::fabs(x) < 0.95 ? 0.5 : 0.01; }, g, 0.05, "x");
        CHECK(ci.lower == doctest::Approx(-1.0));
        CHECK(ci.upper == doctest::Approx(1.0));
        CHECK_FALSE(ci.gaps);
        CHECK_FALSE(ci.empty);
        CHECK(ci.grid_resolution == doctest::Approx(0.1));
    }
    SUBCASE("gaps are convex-hulled and flagged")
    {
        const ConfidenceInterval ci = invert_on_grid(
            [](double x) { return (std::fabs(x) < 0.95 && std::fabs(x - 0.3) > 0.15) ? 0.5 : 0.01; }, g, 0.05, "x");
        CHECK(ci.gaps);
        CHECK(ci.contains(0.3));
        CHECK(ci.lower == doctest::Approx(-1.0));
    }
    SUBCASE("nothing accepted")
    {
        const ConfidenceInterval ci =
            invert_on_grid([](double x) { return 0.04 * std::exp(-x * x); }, g, 0.05, "x");
        CHECK(ci.empty);
        CHECK(ci.best_gamma == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(ci.length() == 0.0);
        CHECK_FALSE(ci.contains(0.0));
    }
    SUBCASE("accepted boundary extends the grid")
    {
        const ConfidenceInterval ci =
            invert_on_grid([](double x) { return (x > -0.5 && x < 7.03) ? 0.5 : 0.0; }, g, 0.05, "x");
        CHECK(ci.upper == doctest::Approx(7.1));
        CHECK(ci.lower == doctest::Approx(-0.5));
        for (const auto& [gamma, p] : ci.evaluations)
            if (gamma < ci.lower || gamma > ci.upper) CHECK(p <= 0.05);
    }
    SUBCASE("never rejected: unbounded")
    {
        const ConfidenceInterval ci = invert_on_grid([](double) { return 0.9; }, g, 0.05, "x");
        CHECK(std::isinf(ci.lower));
        CHECK(std::isinf(ci.upper));
    }
    CHECK_THROWS_AS(invert_on_grid([](double) { return 0.5; }, g, 0.0, "x"), InputError);
}

TEST_CASE("ell interval: duality and nesting on shared seeds")
{
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        const LinearModelData data = instance(60, 15, 0.6, 40 + seed, 0);
        Rng rng(seed);
        const ExogenousDraw draw = draw_exogenous(60 - 15 + 1, 60, 10, rng);
        const EllTestContext ctx(data, 0, draw);
        const GridSpec g = default_grid(data, 0, 0.05, 80);
        const ConfidenceInterval c05 = ell_ci(ctx, data, 0.05, g);
        const ConfidenceInterval c01 = ell_ci(ctx, data, 0.01, g);
        REQUIRE_FALSE(c05.empty);
        const double step = c05.grid_resolution;
        for (const auto& [gamma, p] : c05.evaluations) {
            if (gamma < c05.lower - 1e-9 * step || gamma > c05.upper + 1e-9 * step) CHECK(p <= 0.05);
            if (std::fabs(gamma - c05.lower) < 1e-9 * step || std::fabs(gamma - c05.upper) < 1e-9 * step)
                CHECK(p <= 0.05);
            if (!c05.gaps && gamma > c05.lower + 0.5 * step && gamma < c05.upper - 0.5 * step) CHECK(p > 0.05);
        }
        CHECK(c01.lower <= c05.lower);
        CHECK(c01.upper >= c05.upper);
        // p at a grid point equals a direct shifted test with the same draw
        const auto& probe = c05.evaluations[c05.evaluations.size() / 2];
        CHECK(ell_test_at(data, 0, probe.first, draw).p == probe.second);
    }
}

TEST_CASE("ell interval contains the OLS estimate under a strong signal")
{
    const LinearModelData data = instance(80, 20, 3.0, 11, 0);
    Rng rng(2);
    const ConfidenceInterval ci = ell_ci(data, 0, 0.05, rng, default_grid(data, 0, 0.05, 100));
    const oracle::Ols o = oracle::ols(data.y(), data.X(), 0);
    CHECK(ci.contains(o.beta[0]));
    CHECK_FALSE(ci.contains(0.0));
}
