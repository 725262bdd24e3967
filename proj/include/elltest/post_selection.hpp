#pragma once

#include <memory>
#include <optional>

#include "elltest/ci_inversion.hpp"
#include "elltest/cross_validation.hpp"
#include "elltest/ell_dist.hpp"
#include "elltest/model_core.hpp"

namespace elltest {

// p-value of the ell-test divided by the selection probability; requires
// that the LASSO at `lambda` selected column j.
double conditional_p(const LinearModelData& data, Index j, double lambda, const LassoOptions& opts = {});

// Inference on beta_j = gamma given that the LASSO with penalty lambda_s
// selected column j, using the LASSO coefficient at lambda_l as statistic.
class ConditionalContext {
public:
    ConditionalContext(std::shared_ptr<const DesignBasis> basis, VectorXd y, double lambda_s,
                       const LassoOptions& opts = {});

    double lambda_s() const { return lambda_s_; }
    const std::shared_ptr<const DesignBasis>& basis() const { return basis_; }
    const VectorXd& y() const { return y_; }

    // Selection bounds on the u_1^gamma scale; the conditioning event is
    // u_1^gamma outside [lower, upper].
    struct Bounds {
        double lower = 0.0, upper = 0.0, mass = 0.0;
    };
    Bounds selection_bounds(const NullDecomposition& dec_gamma) const;

    double p_value(double gamma, double lambda_l, bool tie_break = true) const;

private:
    std::shared_ptr<const DesignBasis> basis_;
    VectorXd y_;
    double lambda_s_;
    LassoOptions opts_;
};

double conditional_p_general(const LinearModelData& data, Index j, double gamma, double lambda_l, double lambda_s,
                             bool tie_break = true, const LassoOptions& opts = {});

// Inverts the conditional test over gamma with lambda_s = lambda. lambda_l
// is lambda itself or, with use_cv_lambda_l, cross-validated per gamma on
// the shifted decomposition with one shared exogenous draw.
ConfidenceInterval conditional_ci(const LinearModelData& data, Index j, double lambda, double alpha,
                                  bool use_cv_lambda_l, Rng& rng, const std::optional<GridSpec>& grid = std::nullopt,
                                  int folds = 10, const LassoOptions& opts = {});

} // namespace elltest
