#pragma once

#include <vector>

#include <Eigen/Dense>

#include "elltest/lasso.hpp"

namespace elltest {

// One affine piece of b -> beta(b): beta(b) = anchor_beta + (b - anchor_b) * slope.
struct PathSegment {
    double anchor_b = 0.0;
    VectorXd anchor_beta;
    VectorXd slope;
    std::vector<Index> active;
    std::vector<int> signs;

    VectorXd at(double b) const { return anchor_beta + (b - anchor_b) * slope; }
};

// Minimizer of (1/2n)||y - v b - Z beta||^2 + lambda ||beta||_1 as a
// function of b. segments.size() == knots.size() + 1; the first and last
// segments extend to -inf and +inf.
struct PathInB {
    double lambda = 0.0;
    double start = 0.0; // differentiability point the trace started from
    std::vector<double> knots;
    std::vector<PathSegment> segments;

    const VectorXd& terminal_slope_left() const { return segments.front().slope; }
    const VectorXd& terminal_slope_right() const { return segments.back().slope; }
};

PathInB path_in_b(const VectorXd& y, const VectorXd& v, const MatrixXd& Z, double lambda,
                  const LassoOptions& opts = {});

VectorXd eval_path(const PathInB& path, double b);

} // namespace elltest
