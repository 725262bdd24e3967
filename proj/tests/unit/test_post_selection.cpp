#include <doctest.h>

#include <cmath>
#include <memory>
#include <vector>

#include "elltest/ell_dist.hpp"
#include "elltest/ell_test.hpp"
#include "elltest/errors.hpp"
#include "elltest/post_selection.hpp"
#include "oracles.hpp"

using namespace elltest;

namespace {

LinearModelData make_data(Index n, Index d, double bj, std::uint64_t seed, double rho = 0.0)
{
    Rng rng(seed);
    MatrixXd X = oracle::gaussian_matrix(n, d, rng);
    for (Index k = 1; k < d; ++k) X.col(k) = rho * X.col(k - 1) + std::sqrt(1 - rho * rho) * X.col(k);
    VectorXd beta = VectorXd::Zero(d);
    beta[0] = bj;
    beta[1] = 1.5;
    beta[2] = -1.0;
    return LinearModelData(X * beta + rng.normal_vector(n), X);
}

bool selected(const LinearModelData& data, Index j, double lambda)
{
    return oracle::ista(data.y(), data.X(), lambda)[j] != 0.0 && solve(data.y(), data.X(), lambda).beta[j] != 0.0;
}

} // namespace

TEST_CASE("conditional p is the ell p divided by the selection probability")
{
    int checked = 0;
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        const LinearModelData data = make_data(40, 8, 0.3, seed);
        const double lambda = 0.05;
        if (solve(data.y(), data.X(), lambda).beta[0] == 0.0) {
            CHECK_THROWS_AS(conditional_p(data, 0, lambda), NotSelectedError);
            continue;
        }
        const NullDecomposition dec = decompose(data, 0);
        const EllDistribution dist(dec, lambda);
        const double bj = fit_shifted(dec, lambda).beta[0];
        const double p = p_value(dist, dec.u1(), bj);
        const double r = selection_prob(dist);
        const double pc = conditional_p(data, 0, lambda);
        CHECK(p <= r * (1 + 1e-12));
        CHECK(pc * r == doctest::Approx(p).epsilon(1e-10));
        CHECK(pc == doctest::Approx(conditional_p_general(data, 0, 0.0, lambda, lambda)).epsilon(1e-9));
        ++checked;
    }
    CHECK(checked > 10);
}

TEST_CASE("not selected is an error")
{
    const LinearModelData data = make_data(40, 8, 0.0, 3);
    CHECK_THROWS_AS(conditional_p(data, 0, 1e3), NotSelectedError);
    CHECK_THROWS_AS(conditional_p_general(data, 0, 0.0, 0.1, 1e3), NotSelectedError);
    Rng rng(1);
    CHECK_THROWS_AS(conditional_ci(data, 0, 1e3, 0.05, false, rng), NotSelectedError);
}

TEST_CASE("sure selection: no adjustment")
{
    // X_j close to a sum of active columns with equal-sign coefficients: the
    // KKT correlations of X_{-j} add up in X_j and both bounds leave [-1, 1].
    int found = 0;
    for (std::uint64_t seed = 1; seed <= 50 && found < 5; ++seed) {
        Rng rng(seed);
        const Index n = 30, d = 6;
        MatrixXd X = oracle::gaussian_matrix(n, d, rng);
        X.col(0) = X.col(1) + X.col(2) + X.col(3) + 0.3 * rng.normal_vector(n);
        VectorXd beta = VectorXd::Zero(d);
        beta << 0.5, 2.0, 2.0, 2.0, 0.0, 0.0;
        const LinearModelData data(X * beta + 0.5 * rng.normal_vector(n), X);
        const double lambda = 0.3;
        if (solve(data.y(), data.X(), lambda).beta[0] == 0.0) continue;
        const NullDecomposition dec = decompose(data, 0);
        const EllDistribution dist(dec, lambda);
        if (selection_prob(dist) < 1.0) continue;
        ++found;
        const double p = p_value(dist, dec.u1(), fit_shifted(dec, lambda).beta[0]);
        CHECK(conditional_p(data, 0, lambda) == doctest::Approx(p).epsilon(1e-12));

        // Vacuous truncation: the general form is the unconditional
        // shifted test at fixed lambda.
        auto basis = std::make_shared<const DesignBasis>(data.X(), 0);
        const ConditionalContext ctx(basis, data.y(), lambda);
        for (double gamma : {0.0, 0.1, -0.1}) {
            if (ctx.selection_bounds(decompose(basis, data.y(), gamma)).mass < 1.0) continue;
            EllTestOptions opts;
            opts.lambda_override = 0.2;
            Rng draw_rng(9);
            const ExogenousDraw draw = draw_exogenous(n - d + 1, n, 10, draw_rng);
            CHECK(ctx.p_value(gamma, 0.2) == doctest::Approx(ell_test_at(data, 0, gamma, draw, opts).p).epsilon(1e-10));
        }
    }
    CHECK(found > 0);
}

TEST_CASE("truncated law matches conditional Monte Carlo with fixed sufficient statistic")
{
    const Index n = 30, d = 8, j = 0;
    const LinearModelData data = make_data(n, d, 0.6, 17, 0.3);
    const double lambda_s = 0.05, lambda_l = 0.02;
    REQUIRE(selected(data, j, lambda_s));
    auto basis = std::make_shared<const DesignBasis>(data.X(), j);
    const ConditionalContext ctx(basis, data.y(), lambda_s);

    for (double gamma : {0.0, 0.4}) {
        const NullDecomposition dec = decompose(basis, data.y(), gamma);
        const VectorXd y_shift = data.y() - gamma * data.X().col(j);
        const double observed = std::abs(solve(y_shift, data.X(), lambda_l).beta[j]);
        REQUIRE(observed > 0.0);
        const double p = ctx.p_value(gamma, lambda_l);

        Rng rng(1234);
        int kept = 0, extreme = 0;
        while (kept < 20000) {
            const VectorXd u = sample_null_direction(dec, rng);
            const VectorXd y_new = reconstruct(dec, u);
            if (solve(y_new, data.X(), lambda_s).beta[j] == 0.0) continue;
            ++kept;
            const double b = solve(y_new - gamma * data.X().col(j), data.X(), lambda_l).beta[j];
            if (std::abs(b) >= observed) ++extreme;
        }
        const double mc = static_cast<double>(extreme) / kept;
        MESSAGE("gamma " << gamma << ": p " << p << " mc " << mc);
        CHECK(std::fabs(mc - p) < 4.0 * std::sqrt(p * (1 - p) / kept) + 1e-3);
    }
}

TEST_CASE("truncated CDF is proper")
{
    const LinearModelData data = make_data(40, 10, 0.4, 21, 0.2);
    const double lambda_s = 0.04, lambda_l = 0.06;
    REQUIRE(solve(data.y(), data.X(), lambda_s).beta[0] != 0.0);
    auto basis = std::make_shared<const DesignBasis>(data.X(), 0);
    const ConditionalContext ctx(basis, data.y(), lambda_s);
    const NullDecomposition dec = decompose(basis, data.y(), 0.2);
    const auto sb = ctx.selection_bounds(dec);
    const EllDistribution stat(dec, lambda_l);
    REQUIRE(sb.mass > 0.0);
    // P(beta <= b, u outside [L, U]) / mass via the u-scale inverse map.
    auto trunc_cdf = [&](double b) {
        const double x = b < 0 ? stat.lambda_fn(b, -1) : stat.lambda_fn(b, +1);
        const double in_left = stat.cdf(std::min(x, sb.lower));
        const double in_right = std::max(0.0, stat.cdf(x) - stat.cdf(sb.upper));
        return (in_left + in_right) / sb.mass;
    };
    double prev = -1.0;
    for (double b = -3.0; b <= 3.0; b += 0.01) {
        const double F = trunc_cdf(b);
        CHECK(F >= prev - 1e-12);
        CHECK(F >= -1e-12);
        CHECK(F <= 1.0 + 1e-12);
        prev = F;
    }
    CHECK(trunc_cdf(-1e3) < 1e-9);
    CHECK(trunc_cdf(1e3) > 1.0 - 1e-9);
}

TEST_CASE("conditional p is uniform at the truth given selection")
{
    const Index n = 50, d = 10;
    std::vector<double> simple, shifted;
    for (int r = 0; simple.size() < 300 && r < 5000; ++r) {
        Rng rng = Rng::substream(8080, r);
        const MatrixXd X = oracle::gaussian_matrix(n, d, rng);
        VectorXd beta = VectorXd::Zero(d);
        beta[1] = 1.0;
        const VectorXd y = X * beta + rng.normal_vector(n);
        const LinearModelData data(y, X);
        if (solve(y, X, 0.05).beta[0] != 0.0) simple.push_back(conditional_p(data, 0, 0.05));
        if (solve(y, X, 0.05).beta[1] != 0.0 && shifted.size() < 300)
            shifted.push_back(conditional_p_general(data, 1, 1.0, 0.03, 0.05));
    }
    REQUIRE(simple.size() == 300);
    REQUIRE(shifted.size() == 300);
    // 99.9% KS band for 300 draws
    CHECK(oracle::ks_uniform(simple) < 0.113);
    CHECK(oracle::ks_uniform(shifted) < 0.113);
}

TEST_CASE("conditional intervals")
{
    const LinearModelData data = make_data(60, 12, 2.0, 5);
    const double lambda = 0.05;
    REQUIRE(solve(data.y(), data.X(), lambda).beta[0] != 0.0);
    Rng rng(3);
    const GridSpec g = default_grid(data, 0, 0.05, 60);
    const ConfidenceInterval fixed = conditional_ci(data, 0, lambda, 0.05, false, rng, g);
    const ConfidenceInterval cv = conditional_ci(data, 0, lambda, 0.05, true, rng, g);
    const oracle::Ols o = oracle::ols(data.y(), data.X(), 0);
    CHECK(fixed.contains(o.beta[0]));
    CHECK(cv.contains(o.beta[0]));
    CHECK_FALSE(fixed.contains(0.0));
    CHECK(fixed.method == "conditional");
    CHECK(cv.method == "conditional_cv");
    for (const auto& [gamma, p] : fixed.evaluations)
        if (gamma < fixed.lower || gamma > fixed.upper) CHECK(p <= 0.05);
}
