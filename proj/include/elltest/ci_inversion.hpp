#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "elltest/ell_test.hpp"
#include "elltest/linear_model.hpp"

namespace elltest {

struct ConfidenceInterval {
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    bool lower_open = false;
    bool upper_open = false;
    double alpha = 0.05;
    double grid_resolution = 0.0; // 0 for closed-form intervals
    std::string method;

    bool empty = false;     // nothing accepted on the grid
    bool gaps = false;      // rejected grid points inside the hull
    double best_gamma = std::numeric_limits<double>::quiet_NaN();
    double best_p = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::pair<double, double>> evaluations; // (gamma, p) sorted by gamma

    double length() const { return empty ? 0.0 : upper - lower; }
    bool contains(double x) const;
};

struct GridSpec {
    double lower = 0.0;
    double upper = 0.0;
    int points = 400;
    int max_doublings = 8;
};

// Inverts p(gamma) > alpha on an equally spaced grid. While an end point is
// accepted the grid is extended on that side, doubling its span. Returns
// the hull of accepted points widened by one step per side.
ConfidenceInterval invert_on_grid(const std::function<double(double)>& p_of_gamma, const GridSpec& grid,
                                  double alpha, std::string method);

// Default grid: OLS estimate +- 3 t-interval half-widths, 400 points.
GridSpec default_grid(const LinearModelData& data, Index j, double alpha, int points = 400);

ConfidenceInterval ell_ci(const LinearModelData& data, Index j, double alpha, Rng& rng,
                          const std::optional<GridSpec>& grid = std::nullopt, const EllTestOptions& opts = {});
ConfidenceInterval ell_ci(const EllTestContext& ctx, const LinearModelData& data, double alpha,
                          const std::optional<GridSpec>& grid = std::nullopt);

ConfidenceInterval t_ci(const LinearModelData& data, Index j, double alpha);

// Inversion of the one-sided t-test pointed in the direction of the true
// coefficient; needs the simulation truth.
ConfidenceInterval oracle_one_sided_ci(const LinearModelData& data, Index j, double alpha, double true_beta_j);

} // namespace elltest
