#pragma once

#include <Eigen/Dense>

namespace elltest {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Response y (length n) and design X (n x d). No intercept is added.
// Construction checks shapes and finiteness only; the rank condition is
// verified when a column is decomposed.
class LinearModelData {
public:
    LinearModelData() = default;
    LinearModelData(VectorXd y, MatrixXd X);

    const VectorXd& y() const { return y_; }
    const MatrixXd& X() const { return X_; }
    Index n() const { return X_.rows(); }
    Index d() const { return X_.cols(); }

    // Residual degrees of freedom n - d.
    Index df() const { return n() - d(); }

    void require_unknown_sigma() const; // n >= d + 1
    void require_known_sigma() const;   // n >= d

private:
    VectorXd y_;
    MatrixXd X_;
};

// Divides every column by its Euclidean norm.
MatrixXd normalize_columns(const MatrixXd& X);

} // namespace elltest
