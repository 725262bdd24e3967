#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "elltest/cross_validation.hpp"
#include "elltest/errors.hpp"
#include "elltest/lasso.hpp"
#include "elltest/model_core.hpp"
#include "elltest/path_in_b.hpp"
#include "oracles.hpp"

using namespace elltest;

namespace {

double lambda_max(const VectorXd& y, const MatrixXd& X)
{
    return (X.transpose() * y).cwiseAbs().maxCoeff() / static_cast<double>(X.rows());
}

double shrink(double x, double w) { return x > w ? x - w : (x < -w ? x + w : 0.0); }

} // namespace

TEST_CASE("zero solution above lambda_max")
{
    Rng rng(1);
    const MatrixXd X = oracle::gaussian_matrix(30, 6, rng);
    const VectorXd y = rng.normal_vector(30);
    const double lmax = lambda_max(y, X);
    CHECK(solve(y, X, lmax).beta.isZero(0.0));
    CHECK(solve(y, X, 1.5 * lmax).beta.isZero(0.0));
    CHECK(!solve(y, X, 0.9 * lmax).beta.isZero(0.0));
}

TEST_CASE("one-dimensional stationarity")
{
    MatrixXd X(2, 1);
    X << 1, 1;
    const VectorXd y = VectorXd::Ones(2);
    const LassoFit fit = solve(y, X, 0.25);
    CHECK(std::fabs(fit.beta[0] - 0.75) < 1e-12);
    CHECK(fit.active_set == std::vector<Index>{0});
    CHECK(std::fabs(fit.objective - (0.25 * 0.25 / 2.0 + 0.25 * 0.75)) < 1e-12);
}

TEST_CASE("orthogonal design gives componentwise soft thresholding")
{
    Rng rng(2);
    const Index n = 40, d = 8;
    const MatrixXd Q = Eigen::HouseholderQR<MatrixXd>(oracle::gaussian_matrix(n, d, rng)).householderQ() *
                       MatrixXd::Identity(n, d);
    const MatrixXd X = std::sqrt(static_cast<double>(n)) * Q;
    const VectorXd y = X * VectorXd::LinSpaced(d, -2, 2) + rng.normal_vector(n);
    const double lambda = 0.4;
    const LassoFit fit = solve(y, X, lambda);
    const VectorXd c = X.transpose() * y / static_cast<double>(n);
    for (Index k = 0; k < d; ++k) CHECK(std::fabs(fit.beta[k] - shrink(c[k], lambda)) < 1e-10);
}

TEST_CASE("solutions agree with proximal gradient and certify")
{
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Rng rng(seed);
        const MatrixXd X = oracle::gaussian_matrix(25, 8, rng);
        const VectorXd y = X.col(0) * 2.0 - X.col(3) + rng.normal_vector(25);
        const double lambda = 0.05 + 0.02 * static_cast<double>(seed);
        const LassoFit fit = solve(y, X, lambda);
        const VectorXd ref = oracle::ista(y, X, lambda);
        CHECK((fit.beta - ref).cwiseAbs().maxCoeff() < 1e-8);
        CHECK(kkt_check(fit, y, X, lambda, 1e-7 * 25 * lambda).pass);
        CHECK(std::fabs(fit.objective - oracle::lasso_objective(y, X, fit.beta, lambda)) < 1e-12);

        // objective optimality against random perturbations
        for (int t = 0; t < 100; ++t) {
            const VectorXd pert = fit.beta + 1e-3 * rng.normal_vector(8);
            CHECK(oracle::lasso_objective(y, X, pert, lambda) >= fit.objective);
        }
        // scale equivariance
        const LassoFit scaled = solve(3.0 * y, X, 3.0 * lambda);
        CHECK((scaled.beta - 3.0 * fit.beta).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("wide designs at tiny lambda certify")
{
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Rng rng(seed);
        MatrixXd X = oracle::gaussian_matrix(18, 19, rng);
        for (Index k = 1; k < 19; ++k) X.col(k) += 0.5 * X.col(k - 1);
        const VectorXd y = rng.normal_vector(18);
        const double lam = 1e-4 * lambda_max(y, X);
        const LassoFit fit = solve(y, X, lam);
        const KktReport rep = kkt_check(fit, y, X, lam, 1e-6 * 18 * lam);
        CHECK(rep.pass);
        CHECK(static_cast<Index>(fit.active_set.size()) <= 18);
        // no perturbation of a coordinate improves the objective
        for (Index k = 0; k < 19; ++k)
            for (double eps : {1e-6, -1e-6}) {
                VectorXd b = fit.beta;
                b[k] += eps;
                CHECK(oracle::lasso_objective(y, X, b, lam) >= fit.objective - 1e-14);
            }
    }
}

TEST_CASE("kkt_check detects perturbations and the zero-vector boundary")
{
    Rng rng(3);
    const MatrixXd X = oracle::gaussian_matrix(30, 5, rng);
    const VectorXd y = X.col(1) + rng.normal_vector(30);
    const double lambda = 0.1;
    LassoFit fit = solve(y, X, lambda);
    const double tol = 1e-7 * 30 * lambda;
    CHECK(kkt_check(fit, y, X, lambda, tol).pass);
    LassoFit bad = fit;
    bad.beta[fit.active_set.front()] += 1e-3;
    CHECK(!kkt_check(bad, y, X, lambda, tol).pass);

    const double lmax = lambda_max(y, X);
    LassoFit zero;
    zero.beta = VectorXd::Zero(5);
    CHECK(kkt_check(zero, y, X, lmax * 1.01, tol).pass);
    CHECK(!kkt_check(zero, y, X, lmax * 0.99, tol).pass);
}

TEST_CASE("offset solves")
{
    Rng rng(4);
    const MatrixXd X = oracle::gaussian_matrix(30, 6, rng);
    const VectorXd y = 1.5 * X.col(2) + X.col(4) + rng.normal_vector(30);
    const double lambda = 0.08;
    const LassoFit full = solve(y, X, lambda);
    const LassoFit off = solve_offset(y, X, 2, full.beta[2], lambda);
    VectorXd rest(5);
    rest << full.beta[0], full.beta[1], full.beta[3], full.beta[4], full.beta[5];
    CHECK((off.beta - rest).cwiseAbs().maxCoeff() < 1e-8);

    const LassoFit zero_b = solve_offset(y, X, 2, 0.0, lambda);
    const LassoFit direct = solve(y, oracle::drop(X, 2), lambda);
    CHECK((zero_b.beta - direct.beta).cwiseAbs().maxCoeff() < 1e-12);

    const MatrixXd x1 = X.leftCols(1);
    const LassoFit empty = solve_offset(y, x1, 0, 0.7, lambda);
    CHECK(empty.beta.size() == 0);
    CHECK(std::fabs(empty.objective - (y - 0.7 * x1.col(0)).squaredNorm() / 60.0) < 1e-12);
}

TEST_CASE("lambda grid")
{
    Rng rng(5);
    const MatrixXd X = oracle::gaussian_matrix(20, 4, rng);
    const VectorXd y = rng.normal_vector(20);
    const double lmax = lambda_max(y, X);
    const auto two = lambda_grid(y, X, 2);
    REQUIRE(two.size() == 2);
    CHECK(std::fabs(two[0] - lmax) < 1e-15 * lmax);
    CHECK(std::fabs(two[1] - 1e-4 * lmax) < 1e-15 * lmax);
    const auto grid = lambda_grid(y, X);
    CHECK(grid.size() == 100);
    for (std::size_t i = 1; i < grid.size(); ++i) CHECK(grid[i] < grid[i - 1]);
    CHECK(solve(y, X, grid[0]).beta.isZero(0.0));
    CHECK_THROWS_AS(lambda_grid(VectorXd::Zero(20), X), InputError);
    CHECK_THROWS_AS(lambda_grid(y, X, 1), InputError);
}

TEST_CASE("cross-validation basics")
{
    Rng rng(6);
    const MatrixXd X = oracle::gaussian_matrix(60, 10, rng);
    const VectorXd y = rng.normal_vector(60);
    Rng r1(42), r2(42);
    const CvResult a = cross_validate(y, X, r1);
    const CvResult b = cross_validate(y, X, r2);
    CHECK(a.lambda_min == b.lambda_min);
    CHECK(a.cv_error == b.cv_error);
    CHECK(a.partition == b.partition);
    CHECK(a.lambda_1se >= a.lambda_min);
    CHECK(a.lambda_min <= a.lambda_grid.front());
    CHECK(a.lambda_min >= a.lambda_grid.back());
    // all-zero fit at the top of the grid: error is the mean square of y
    CHECK(std::fabs(a.cv_error.front() - y.squaredNorm() / 60.0) < 0.25 * y.squaredNorm() / 60.0);
    for (double e : a.cv_error) CHECK(std::isfinite(e));

    // partition: near-equal blocks
    std::vector<int> sizes(10, 0);
    for (int f : a.partition) ++sizes[static_cast<std::size_t>(f)];
    for (int s : sizes) CHECK(s == 6);
    Rng r3(1);
    CHECK_THROWS_AS(cross_validate(y.head(5), X.topRows(5), r3, 10), InputError);
}

TEST_CASE("lambda_1se is never below lambda_min")
{
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(seed);
        const MatrixXd X = oracle::gaussian_matrix(40, 8, rng);
        const VectorXd y = X.col(0) * rng.uniform() + rng.normal_vector(40);
        const CvResult cv = cross_validate(y, X, rng, 5);
        CHECK(cv.lambda_1se >= cv.lambda_min);
        CHECK(cv.select(CvRule::one_se) == cv.lambda_1se);
    }
}

TEST_CASE("cross-validation keeps a strong signal")
{
    int hits = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        Rng rng(500 + seed);
        const MatrixXd X = oracle::gaussian_matrix(100, 20, rng);
        const VectorXd y = 5.0 * X.col(0) + rng.normal_vector(100);
        const CvResult cv = cross_validate(y, X, rng);
        if (solve(y, X, cv.lambda_min).beta[0] != 0.0) ++hits;
    }
    CHECK(hits >= 95);
}

TEST_CASE("randomized lambda choice ignores the observed direction")
{
    Rng rng(7);
    const MatrixXd X = oracle::gaussian_matrix(40, 8, rng);
    const VectorXd y = X.col(1) + rng.normal_vector(40);
    const LinearModelData data(y, X);
    const NullDecomposition dec = decompose(data, 3);
    const NullDecomposition flipped = decompose(LinearModelData(reconstruct(dec, -dec.u), X), 3);
    Rng a(99), b(99);
    CHECK(choose_lambda_hat(dec, a) == doctest::Approx(choose_lambda_hat(flipped, b)).epsilon(1e-10));

    Rng c(1), d(2);
    const double l1 = choose_lambda_hat(dec, c), l2 = choose_lambda_hat(dec, d);
    CHECK(l1 != l2);
    const auto grid = lambda_grid(dec.y_hat_j + dec.sigma_hat_j * dec.basis->apply_V(dec.u), oracle::drop(X, 3));
    for (double l : {l1, l2}) {
        CHECK(l > 0.0);
        CHECK(std::isfinite(l));
    }
    (void)grid;
}

TEST_CASE("path in b: offset invisible to Z")
{
    Rng rng(8);
    const MatrixXd Z = oracle::gaussian_matrix(20, 3, rng);
    VectorXd v = rng.normal_vector(20);
    v -= oracle::projection(Z) * v;
    const VectorXd y = Z.col(0) + rng.normal_vector(20);
    const PathInB path = path_in_b(y, v, Z, 0.05);
    CHECK(path.knots.empty());
    REQUIRE(path.segments.size() == 1);
    CHECK(path.segments[0].slope.cwiseAbs().maxCoeff() < 1e-12);
    CHECK((eval_path(path, -50.0) - eval_path(path, 50.0)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("path in b: single column soft-threshold path")
{
    const Index n = 16;
    Rng rng(9);
    VectorXd z = rng.normal_vector(n);
    z *= std::sqrt(static_cast<double>(n)) / z.norm();
    const VectorXd y = 0.8 * z + rng.normal_vector(n);
    const double lambda = 0.3;
    const PathInB path = path_in_b(y, z, z, lambda);
    const double c = z.dot(y) / static_cast<double>(n);
    REQUIRE(path.knots.size() == 2);
    CHECK(std::fabs(path.knots[0] - (c - lambda)) < 1e-10);
    CHECK(std::fabs(path.knots[1] - (c + lambda)) < 1e-10);
    for (double b : {-3.0, c - lambda - 0.1, c, c + lambda + 0.05, 4.0})
        CHECK(std::fabs(eval_path(path, b)[0] - shrink(c - b, lambda)) < 1e-10);
}

TEST_CASE("path in b agrees with direct offset solves")
{
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Rng rng(100 + seed);
        const MatrixXd X = oracle::gaussian_matrix(30, 6, rng);
        const VectorXd y = X * VectorXd::LinSpaced(6, -1, 1) + rng.normal_vector(30);
        const Index j = static_cast<Index>(seed % 6);
        const double lambda = 0.05 + 0.01 * static_cast<double>(seed);
        const PathInB path = path_in_b(y, X.col(j), oracle::drop(X, j), lambda);
        for (std::size_t k = 1; k < path.knots.size(); ++k) CHECK(path.knots[k] > path.knots[k - 1]);
        // continuity at knots
        for (std::size_t k = 0; k < path.knots.size(); ++k) {
            const double b = path.knots[k];
            CHECK((path.segments[k].at(b) - path.segments[k + 1].at(b)).cwiseAbs().maxCoeff() < 1e-9);
        }
        double worst = 0.0;
        for (int t = 0; t < 50; ++t) {
            const double b = 4.0 * rng.normal();
            const LassoFit direct = solve_offset(y, X, j, b, lambda);
            worst = std::max(worst, (eval_path(path, b) - direct.beta).cwiseAbs().maxCoeff());
        }
        CHECK(worst < 1e-6);
    }
}
