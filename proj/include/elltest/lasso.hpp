#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace elltest {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Objective: (1/2n)||y - X beta||^2 + lambda ||beta||_1.
struct LassoOptions {
    double tol = 1e-10;        // max absolute coefficient change per sweep
    long max_sweeps = 100000;
    double kkt_factor = 1e-7;  // certification threshold, relative to n*lambda
};

struct LassoFit {
    VectorXd beta;
    double lambda = 0.0;
    std::vector<Index> active_set;
    double kkt_residual = 0.0; // max stationarity violation, in units of |X_k^T r|
    double objective = std::numeric_limits<double>::quiet_NaN();
    long sweeps = 0;
};

// Cached Cholesky factor of the active block, reused while the support is
// unchanged (typical along a warm-started grid). Not thread-safe; one per
// thread.
class PolishCache {
public:
    const Eigen::LLT<MatrixXd>* lookup(const std::vector<Index>& active) const;
    const Eigen::LLT<MatrixXd>* store(const std::vector<Index>& active, const MatrixXd& block);

private:
    std::vector<Index> active_;
    Eigen::LLT<MatrixXd> llt_;
    bool valid_ = false;
};

// LASSO in covariance form: with G = X^T X / n and c = X^T y / n every
// coordinate update costs O(p), independent of n.
class GramLasso {
public:
    GramLasso() = default;
    GramLasso(MatrixXd gram, double n_rows);
    static GramLasso from_design(const MatrixXd& X);

    Index p() const { return gram_.rows(); }
    double n_rows() const { return n_rows_; }
    const MatrixXd& gram() const { return gram_; }

    // yty_over_n = y^T y / n enables the objective value; pass NaN to skip it.
    LassoFit solve(const VectorXd& c, double lambda, const VectorXd* warm = nullptr,
                   PolishCache* cache = nullptr, const LassoOptions& opts = {},
                   double yty_over_n = std::numeric_limits<double>::quiet_NaN()) const;

private:
    MatrixXd gram_;
    double n_rows_ = 0.0;
};

LassoFit solve(const VectorXd& y, const MatrixXd& X, double lambda, const VectorXd* warm = nullptr,
               const LassoOptions& opts = {});

// Minimizes over beta_{-j} with beta_j held at b (coefficients in the order
// of X with column j removed).
LassoFit solve_offset(const VectorXd& y, const MatrixXd& X, Index j, double b, double lambda,
                      const LassoOptions& opts = {});

struct KktReport {
    bool pass = false;
    double max_violation = 0.0;
};

KktReport kkt_check(const LassoFit& fit, const VectorXd& y, const MatrixXd& X, double lambda, double tol);

std::vector<double> lambda_grid(const VectorXd& y, const MatrixXd& X, int count = 100, double ratio = 1e-4);
std::vector<double> lambda_grid_from_max(double lambda_max, int count = 100, double ratio = 1e-4);

MatrixXd drop_column(const MatrixXd& X, Index j);

double soft_threshold(double x, double omega);

// Process-wide solve counters used by the certification suites.
struct LassoStatistics {
    std::uint64_t solves = 0;
    double max_relative_kkt = 0.0; // max kkt_residual / (n lambda) over all solves
};
LassoStatistics lasso_statistics();
void reset_lasso_statistics();

} // namespace elltest
