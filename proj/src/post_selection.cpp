#include "elltest/post_selection.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "elltest/errors.hpp"

namespace elltest {

double conditional_p(const LinearModelData& data, Index j, double lambda, const LassoOptions& opts)
{
    data.require_unknown_sigma();
    const NullDecomposition dec = decompose(data, j, 0.0);
    const LassoFit fit = fit_shifted(dec, lambda, opts);
    const double bj = fit.beta[j];
    if (bj == 0.0) throw NotSelectedError("the LASSO did not select the tested column");
    const EllDistribution dist(dec, lambda, opts);
    const double r = selection_prob(dist);
    if (!(r > 0.0)) throw EmptySupportError("selection probability is zero");
    return std::clamp(p_value(dist, dec.u1(), bj) / r, 0.0, 1.0);
}

ConditionalContext::ConditionalContext(std::shared_ptr<const DesignBasis> basis, VectorXd y, double lambda_s,
                                       const LassoOptions& opts)
    : basis_(std::move(basis)), y_(std::move(y)), lambda_s_(lambda_s), opts_(opts)
{
    if (basis_->n() < basis_->d() + 1) throw InputError("conditional inference needs n >= d + 1");
    const NullDecomposition dec = decompose(basis_, y_, 0.0);
    if (fit_shifted(dec, lambda_s_, opts_).beta[basis_->j()] == 0.0)
        throw NotSelectedError("the LASSO did not select the tested column");
}

ConditionalContext::Bounds ConditionalContext::selection_bounds(const NullDecomposition& dec_gamma) const
{
    // The selection LASSO runs on the unshifted y, i.e. at offset b = -gamma
    // of the shifted problem.
    const EllDistribution sel(dec_gamma, lambda_s_, opts_);
    Bounds b;
    b.lower = sel.lambda_fn(-dec_gamma.gamma_shift, -1);
    b.upper = sel.lambda_fn(-dec_gamma.gamma_shift, +1);
    b.mass = sel.cdf(b.lower) + sel.sf(b.upper);
    return b;
}

double ConditionalContext::p_value(double gamma, double lambda_l, bool tie_break) const
{
    const NullDecomposition dec = decompose(basis_, y_, gamma);
    const Bounds sb = selection_bounds(dec);
    if (!(sb.mass > 1e-300)) throw EmptySupportError("selection event has zero conditional probability");
    const double u1 = dec.u1();
    if (u1 > sb.lower + kConsistencyTol && u1 < sb.upper - kConsistencyTol) {
        std::ostringstream msg;
        msg << "selected column but u1=" << u1 << " lies inside the selection bounds [" << sb.lower << ", "
            << sb.upper << "]";
        throw ConsistencyError(msg.str());
    }

    const EllDistribution stat(dec, lambda_l, opts_);
    // Truncated measure of (-inf, x] and (x, inf).
    auto below = [&](double x) {
        return stat.cdf(std::min(x, sb.lower)) + std::max(0.0, stat.cdf(x) - stat.cdf(sb.upper));
    };
    auto above = [&](double x) {
        return stat.sf(std::max(x, sb.upper)) + std::max(0.0, stat.cdf(sb.lower) - stat.cdf(x));
    };

    const double bj = fit_shifted(dec, lambda_l, opts_).beta[basis_->j()];
    double tail;
    if (bj != 0.0) {
        const double t = std::abs(bj);
        tail = above(stat.lambda_fn(t, +1)) + below(stat.lambda_fn(-t, -1));
    } else if (tie_break) {
        const double s = std::abs(u1 - stat.m_hat());
        tail = below(stat.m_hat() - s) + above(stat.m_hat() + s);
    } else {
        return 1.0;
    }
    return std::clamp(tail / sb.mass, 0.0, 1.0);
}

double conditional_p_general(const LinearModelData& data, Index j, double gamma, double lambda_l, double lambda_s,
                             bool tie_break, const LassoOptions& opts)
{
    data.require_unknown_sigma();
    const ConditionalContext ctx(std::make_shared<const DesignBasis>(data.X(), j), data.y(), lambda_s, opts);
    return ctx.p_value(gamma, lambda_l, tie_break);
}

ConfidenceInterval conditional_ci(const LinearModelData& data, Index j, double lambda, double alpha,
                                  bool use_cv_lambda_l, Rng& rng, const std::optional<GridSpec>& grid, int folds,
                                  const LassoOptions& opts)
{
    data.require_unknown_sigma();
    auto basis = std::make_shared<const DesignBasis>(data.X(), j);
    const ConditionalContext ctx(basis, data.y(), lambda, opts);
    const GridSpec g = grid ? *grid : default_grid(data, j, alpha);

    if (!use_cv_lambda_l)
        return invert_on_grid([&](double gamma) { return ctx.p_value(gamma, lambda); }, g, alpha, "conditional");

    const ExogenousDraw draw = draw_exogenous(basis->null_dim(), basis->n(), folds, rng);
    const CvPlan plan(basis->X_mj(), draw.partition, folds);
    auto p_of = [&](double gamma) {
        const NullDecomposition dec = decompose(basis, data.y(), gamma);
        return ctx.p_value(gamma, choose_lambda_hat(dec, draw, plan));
    };
    return invert_on_grid(p_of, g, alpha, "conditional_cv");
}

} // namespace elltest
