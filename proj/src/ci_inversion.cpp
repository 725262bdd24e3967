#include "elltest/ci_inversion.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "elltest/errors.hpp"
#include "elltest/special_fn.hpp"

namespace elltest {

bool ConfidenceInterval::contains(double x) const
{
    if (empty) return false;
    const bool above = lower_open ? x > lower : x >= lower;
    const bool below = upper_open ? x < upper : x <= upper;
    return above && below;
}

ConfidenceInterval invert_on_grid(const std::function<double(double)>& p_of_gamma, const GridSpec& grid, double alpha,
                                  std::string method)
{
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
    if (grid.points < 2 || !(grid.upper > grid.lower)) throw InputError("invalid gamma grid");
    const double step = (grid.upper - grid.lower) / (grid.points - 1);

    // Points are indexed by integer offsets from grid.lower so that
    // extensions land exactly on the same lattice.
    std::map<long, double> pvals;
    auto gamma_at = [&](long k) { return grid.lower + static_cast<double>(k) * step; };
    auto eval = [&](long k) {
        if (!pvals.count(k)) pvals[k] = p_of_gamma(gamma_at(k));
    };
    for (long k = 0; k < grid.points; ++k) eval(k);

    bool lower_unbounded = false, upper_unbounded = false;
    long lo = 0, hi = grid.points - 1;
    for (int t = 0; pvals[lo] > alpha; ++t) {
        if (t == grid.max_doublings) {
            lower_unbounded = true;
            break;
        }
        const long span = hi - lo;
        for (long k = lo - 1; k >= lo - span; --k) eval(k);
        lo -= span;
    }
    for (int t = 0; pvals[hi] > alpha; ++t) {
        if (t == grid.max_doublings) {
            upper_unbounded = true;
            break;
        }
        const long span = hi - lo;
        for (long k = hi + 1; k <= hi + span; ++k) eval(k);
        hi += span;
    }

    ConfidenceInterval ci;
    ci.alpha = alpha;
    ci.grid_resolution = step;
    ci.method = std::move(method);
    long first = 0, last = -1;
    bool any = false;
    double best = -1.0;
    for (const auto& [k, p] : pvals) {
        ci.evaluations.emplace_back(gamma_at(k), p);
        if (p > best) {
            best = p;
            ci.best_gamma = gamma_at(k);
            ci.best_p = p;
        }
        if (p > alpha) {
            if (!any) first = k;
            last = k;
            any = true;
        }
    }
    if (!any) {
        ci.empty = true;
        ci.lower = ci.upper = ci.best_gamma;
        return ci;
    }
    for (const auto& [k, p] : pvals)
        if (k > first && k < last && p <= alpha) ci.gaps = true;
    ci.lower = lower_unbounded ? -std::numeric_limits<double>::infinity() : gamma_at(first - 1);
    ci.upper = upper_unbounded ? std::numeric_limits<double>::infinity() : gamma_at(last + 1);
    return ci;
}

GridSpec default_grid(const LinearModelData& data, Index j, double alpha, int points)
{
    const TTestResult tt = t_test(data, j, 0.0);
    const double hw = t_quantile(1.0 - alpha / 2.0, tt.df) * tt.se;
    GridSpec g;
    g.lower = tt.beta_ols - 3.0 * hw;
    g.upper = tt.beta_ols + 3.0 * hw;
    g.points = points;
    return g;
}

ConfidenceInterval ell_ci(const EllTestContext& ctx, const LinearModelData& data, double alpha,
                          const std::optional<GridSpec>& grid)
{
    const GridSpec g = grid ? *grid : default_grid(data, ctx.basis()->j(), alpha);
    return invert_on_grid([&](double gamma) { return ctx.run(gamma).p; }, g, alpha, "ell");
}

ConfidenceInterval ell_ci(const LinearModelData& data, Index j, double alpha, Rng& rng,
                          const std::optional<GridSpec>& grid, const EllTestOptions& opts)
{
    data.require_unknown_sigma();
    ExogenousDraw draw = draw_exogenous(data.n() - data.d() + 1, data.n(), opts.folds, rng);
    const EllTestContext ctx(data, j, std::move(draw), opts);
    return ell_ci(ctx, data, alpha, grid);
}

ConfidenceInterval t_ci(const LinearModelData& data, Index j, double alpha)
{
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
    const TTestResult tt = t_test(data, j, 0.0);
    const double hw = t_quantile(1.0 - alpha / 2.0, tt.df) * tt.se;
    ConfidenceInterval ci;
    ci.alpha = alpha;
    ci.method = "t";
    ci.lower = tt.beta_ols - hw;
    ci.upper = tt.beta_ols + hw;
    return ci;
}

ConfidenceInterval oracle_one_sided_ci(const LinearModelData& data, Index j, double alpha, double true_beta_j)
{
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
    const TTestResult tt = t_test(data, j, 0.0);
    const double hw = t_quantile(1.0 - alpha, tt.df) * tt.se;
    const double lo = tt.beta_ols - hw, hi = tt.beta_ols + hw;
    ConfidenceInterval ci;
    ci.alpha = alpha;
    ci.method = "oracle_one_sided_t";
    if (true_beta_j >= lo && true_beta_j <= hi) {
        ci.lower = lo;
        ci.upper = hi;
    } else if (true_beta_j < lo) {
        ci.lower = true_beta_j;
        ci.upper = hi;
        ci.upper_open = true;
    } else {
        // Surely misses the truth.
        ci.lower = lo;
        ci.upper = true_beta_j;
        ci.lower_open = true;
        ci.upper_open = true;
    }
    return ci;
}

} // namespace elltest
