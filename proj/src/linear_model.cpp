#include "elltest/linear_model.hpp"

#include <string>

#include "elltest/errors.hpp"

namespace elltest {

LinearModelData::LinearModelData(VectorXd y, MatrixXd X) : y_(std::move(y)), X_(std::move(X))
{
    if (X_.rows() == 0 || X_.cols() == 0) throw InputError("empty design matrix");
    if (y_.size() != X_.rows())
        throw InputError("response length " + std::to_string(y_.size()) + " does not match " +
                         std::to_string(X_.rows()) + " design rows");
    if (!y_.allFinite()) throw InputError("response contains non-finite values");
    if (!X_.allFinite()) throw InputError("design contains non-finite values");
}

void LinearModelData::require_unknown_sigma() const
{
    if (n() < d() + 1)
        throw InputError("need n >= d + 1 (got n=" + std::to_string(n()) + ", d=" + std::to_string(d()) + ")");
}

void LinearModelData::require_known_sigma() const
{
    if (n() < d())
        throw InputError("need n >= d (got n=" + std::to_string(n()) + ", d=" + std::to_string(d()) + ")");
}

MatrixXd normalize_columns(const MatrixXd& X)
{
    MatrixXd out = X;
    for (Index k = 0; k < X.cols(); ++k) {
        const double norm = X.col(k).norm();
        if (norm == 0.0) throw DegenerateDesignError("column " + std::to_string(k) + " is identically zero");
        out.col(k) /= norm;
    }
    return out;
}

} // namespace elltest
