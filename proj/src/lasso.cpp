#include "elltest/lasso.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>

#include "elltest/errors.hpp"

namespace elltest {

namespace {

std::atomic<std::uint64_t> g_solves{0};
std::atomic<double> g_max_relative_kkt{0.0};

void record_solve(double relative_kkt)
{
    g_solves.fetch_add(1, std::memory_order_relaxed);
    double cur = g_max_relative_kkt.load(std::memory_order_relaxed);
    while (relative_kkt > cur && !g_max_relative_kkt.compare_exchange_weak(cur, relative_kkt)) {
    }
}

std::vector<Index> support_of(const VectorXd& beta)
{
    std::vector<Index> s;
    for (Index k = 0; k < beta.size(); ++k)
        if (beta[k] != 0.0) s.push_back(k);
    return s;
}

// max_k violation of the stationarity conditions given grad = c - G beta.
double kkt_violation(const VectorXd& beta, const VectorXd& grad, double lambda)
{
    double worst = 0.0;
    for (Index k = 0; k < beta.size(); ++k) {
        double v;
        if (beta[k] != 0.0)
            v = std::abs(grad[k] - (beta[k] > 0 ? lambda : -lambda));
        else
            v = std::max(0.0, std::abs(grad[k]) - lambda);
        worst = std::max(worst, v);
    }
    return worst;
}

// Exact homotopy in lambda from lambda_max down to the target: the solution
// is piecewise linear between knots where a coordinate enters or leaves the
// support. Used when coordinate descent crawls (nearly interpolating fits
// with more columns than rows). The state is just the signed active set, so
// whenever rounding lets it drift out of KKT consistency at a knot the set
// is repaired in place before moving on.
//
// With `start`, its signed support is taken as the active set at the target
// itself and only repairs are run (a primal active-set method); callers
// retry from lambda_max if that fails.
bool homotopy(const MatrixXd& G, const VectorXd& c, double lambda, double n_rows, VectorXd& beta,
              const VectorXd* start = nullptr)
{
    const Index p = G.rows();
    beta = VectorXd::Zero(p);
    Index first;
    double cur = c.cwiseAbs().maxCoeff(&first);
    if (lambda >= cur) return true;
    std::vector<Index> act;
    std::vector<double> sgn;
    std::vector<char> in_act(static_cast<std::size_t>(p), 0);
    if (start != nullptr) {
        for (Index k = 0; k < p; ++k)
            if ((*start)[k] != 0.0 && static_cast<double>(act.size()) < n_rows) {
                act.push_back(k);
                sgn.push_back((*start)[k] > 0 ? 1.0 : -1.0);
                in_act[static_cast<std::size_t>(k)] = 1;
            }
        cur = lambda;
    }
    if (act.empty()) {
        act.push_back(first);
        sgn.push_back(c[first] > 0 ? 1.0 : -1.0);
        in_act[static_cast<std::size_t>(first)] = 1;
        cur = c.cwiseAbs().maxCoeff();
    }
    Index dropped = -1; // may not re-enter right at the knot where it left
    long repairs = 0;
    const long max_steps = 50 * p + 1000;
    for (long step = 0; step < max_steps; ++step) {
        const auto na = static_cast<Index>(act.size());
        VectorXd ca(na), sa(na);
        for (Index a = 0; a < na; ++a) {
            ca[a] = c[act[a]];
            sa[a] = sgn[a];
        }
        const MatrixXd Gaa = G(act, act);
        Eigen::LDLT<MatrixXd> ldlt(Gaa);
        if (ldlt.info() != Eigen::Success) return false;
        VectorXd u = ldlt.solve(ca);
        VectorXd w = ldlt.solve(sa);
        for (int refine = 0; refine < 2; ++refine) {
            u += ldlt.solve(ca - Gaa * u);
            w += ldlt.solve(sa - Gaa * w);
        }
        if (!u.allFinite() || !w.allFinite()) return false;
        // beta_A(t) = u - t w and grad_k(t) = a_k + t b_k.
        const VectorXd a = c - G(Eigen::all, act) * u;
        const VectorXd b = G(Eigen::all, act) * w;

        const bool finishing = cur <= lambda;
        const double at = finishing ? lambda : cur;
        if (start != nullptr && repairs >= 4 * p + 100) return false;
        if (repairs < 4 * p + 100) {
            const VectorXd ba = u - at * w;
            const double scale = u.cwiseAbs().maxCoeff() + at * w.cwiseAbs().maxCoeff() + 1e-300;
            Index worst = -1;
            double worst_excess = 0.0;
            for (Index i = 0; i < na; ++i) {
                const double excess = -sa[i] * ba[i] / scale - 1e-9;
                if (excess > worst_excess) {
                    worst_excess = excess;
                    worst = i;
                }
            }
            if (worst >= 0) {
                in_act[static_cast<std::size_t>(act[worst])] = 0;
                act.erase(act.begin() + worst);
                sgn.erase(sgn.begin() + worst);
                ++repairs;
                if (act.empty()) return false;
                continue;
            }
            for (Index k = 0; k < p; ++k) {
                if (in_act[static_cast<std::size_t>(k)]) continue;
                const double excess = std::abs(a[k] + at * b[k]) / at - 1.0 - 1e-8;
                if (excess > worst_excess) {
                    worst_excess = excess;
                    worst = k;
                }
            }
            if (worst >= 0 && start != nullptr && static_cast<double>(na) >= n_rows) return false;
            if (worst >= 0 && static_cast<double>(na) < n_rows) {
                const double g = a[worst] + at * b[worst];
                act.push_back(worst);
                sgn.push_back(g > 0 ? 1.0 : -1.0);
                in_act[static_cast<std::size_t>(worst)] = 1;
                ++repairs;
                continue;
            }
        }

        const double ceiling = cur * (1.0 - 1e-9);
        double next = 0.0;
        Index who = -1;
        bool add = false;
        for (Index i = 0; i < na; ++i) {
            if (w[i] == 0.0) continue;
            const double t = u[i] / w[i];
            if (t < ceiling && t > next) {
                next = t;
                who = i;
                add = false;
            }
        }
        // With as many active columns as rows the residual is proportional
        // to t and nothing can enter.
        for (Index k = 0; k < p && static_cast<double>(na) < n_rows; ++k) {
            if (in_act[static_cast<std::size_t>(k)]) continue;
            for (double side : {1.0, -1.0}) {
                const double den = side - b[k];
                if (den == 0.0) continue;
                const double t = a[k] / den;
                if (t < (k == dropped ? cur * (1.0 - 1e-7) : ceiling) && t > next) {
                    next = t;
                    who = k;
                    add = true;
                }
            }
        }
        if (next <= lambda || who < 0) {
            if (!finishing) {
                // Re-check consistency at the target before accepting.
                cur = lambda;
                continue;
            }
            const VectorXd ba = u - lambda * w;
            for (Index i = 0; i < na; ++i) beta[act[i]] = ba[i];
            return true;
        }
        cur = next;
        dropped = -1;
        if (add) {
            const double g = a[who] + next * b[who];
            act.push_back(who);
            sgn.push_back(g > 0 ? 1.0 : -1.0);
            in_act[static_cast<std::size_t>(who)] = 1;
        } else {
            dropped = act[who];
            in_act[static_cast<std::size_t>(dropped)] = 0;
            act.erase(act.begin() + who);
            sgn.erase(sgn.begin() + who);
            if (act.empty()) {
                Index k;
                cur = c.cwiseAbs().maxCoeff(&k);
                act.push_back(k);
                sgn.push_back(c[k] > 0 ? 1.0 : -1.0);
                in_act[static_cast<std::size_t>(k)] = 1;
            }
        }
    }
    return false;
}

void check_lambda(double lambda)
{
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InputError("lambda must be positive and finite");
}

} // namespace

double soft_threshold(double x, double omega)
{
    if (x > omega) return x - omega;
    if (x < -omega) return x + omega;
    return 0.0;
}

const Eigen::LLT<MatrixXd>* PolishCache::lookup(const std::vector<Index>& active) const
{
    return valid_ && active == active_ ? &llt_ : nullptr;
}

const Eigen::LLT<MatrixXd>* PolishCache::store(const std::vector<Index>& active, const MatrixXd& block)
{
    active_ = active;
    llt_.compute(block);
    valid_ = llt_.info() == Eigen::Success;
    return valid_ ? &llt_ : nullptr;
}

GramLasso::GramLasso(MatrixXd gram, double n_rows) : gram_(std::move(gram)), n_rows_(n_rows)
{
    if (gram_.rows() != gram_.cols()) throw InputError("Gram matrix must be square");
}

GramLasso GramLasso::from_design(const MatrixXd& X)
{
    const auto n = static_cast<double>(X.rows());
    MatrixXd g = MatrixXd::Zero(X.cols(), X.cols());
    g.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose(), 1.0 / n);
    g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
    return GramLasso(std::move(g), n);
}

LassoFit GramLasso::solve(const VectorXd& c, double lambda, const VectorXd* warm, PolishCache* cache,
                          const LassoOptions& opts, double yty_over_n) const
{
    check_lambda(lambda);
    const Index p = gram_.rows();
    if (c.size() != p) throw InputError("linear term has wrong length");
    if (!c.allFinite()) throw InputError("non-finite linear term");

    LassoFit fit;
    fit.lambda = lambda;
    VectorXd beta = VectorXd::Zero(p);
    if (warm != nullptr && warm->size() == p) beta = *warm;

    VectorXd grad = c;
    for (Index k = 0; k < p; ++k)
        if (beta[k] != 0.0) grad.noalias() -= beta[k] * gram_.col(k);

    PolishCache local_cache;
    PolishCache& pc = cache != nullptr ? *cache : local_cache;

    // Solve the stationarity equations on the current support with the
    // current signs. Accept only if the result is sign-consistent and no
    // inactive coordinate violates |grad| <= lambda: then it is the exact
    // minimizer.
    auto try_polish = [&]() -> bool {
        std::vector<Index> act = support_of(beta);
        if (act.empty()) {
            if (c.cwiseAbs().maxCoeff() <= lambda * (1.0 + 1e-13)) {
                grad = c;
                return true;
            }
            return false;
        }
        const auto na = static_cast<Index>(act.size());
        VectorXd rhs(na);
        for (Index a = 0; a < na; ++a) rhs[a] = c[act[a]] - (beta[act[a]] > 0 ? lambda : -lambda);
        const Eigen::LLT<MatrixXd>* llt = pc.lookup(act);
        if (llt == nullptr) llt = pc.store(act, gram_(act, act));
        if (llt == nullptr) return false;
        VectorXd b = llt->solve(rhs);
        for (Index a = 0; a < na; ++a)
            if (!(b[a] * beta[act[a]] > 0.0)) return false;
        VectorXd g = c - gram_(Eigen::all, act) * b;
        for (Index k = 0; k < p; ++k)
            if (std::abs(g[k]) > lambda * (1.0 + 1e-12)) {
                bool in_act = std::binary_search(act.begin(), act.end(), k);
                if (!in_act) return false;
            }
        beta.setZero();
        for (Index a = 0; a < na; ++a) beta[act[a]] = b[a];
        grad = std::move(g);
        return true;
    };

    auto cd_pass = [&](const std::vector<Index>* coords) -> double {
        double maxchg = 0.0;
        const Index count = coords ? static_cast<Index>(coords->size()) : p;
        for (Index t = 0; t < count; ++t) {
            const Index k = coords ? (*coords)[t] : t;
            const double gkk = gram_(k, k);
            if (gkk <= 0.0) continue;
            const double old = beta[k];
            const double nw = soft_threshold(grad[k] + gkk * old, lambda) / gkk;
            if (nw != old) {
                const double delta = nw - old;
                beta[k] = nw;
                grad.noalias() -= delta * gram_.col(k);
                maxchg = std::max(maxchg, std::abs(delta));
            }
        }
        return maxchg;
    };

    // Coordinate descent gets a budget; past it the homotopy takes over.
    // Crawling is usually visible early, so an active-set repair from the
    // current iterate is tried once after a few dozen sweeps.
    const long budget = std::min(opts.max_sweeps, 200 + 2 * static_cast<long>(p));
    const long early = std::min(budget, 30L);
    long sweeps = 0;
    bool stalled = false;
    auto bump = [&]() {
        ++sweeps;
        if (sweeps > budget || sweeps == early) stalled = true;
        return !stalled;
    };

    bool done = warm != nullptr && try_polish();
    double tol = opts.tol;
    VectorXd exact;
    bool have_exact = false;
    for (;;) {
        while (!done && !stalled) {
            if (!bump()) break;
            const double chg = cd_pass(nullptr);
            if (chg >= tol) {
                const std::vector<Index> act = support_of(beta);
                double chg_a;
                do {
                    if (!bump()) break;
                    chg_a = cd_pass(&act);
                } while (chg_a >= tol);
                if (stalled) break;
                if (try_polish()) break;
                continue;
            }
            if (try_polish()) break;
            if (kkt_violation(beta, grad, lambda) <= opts.kkt_factor * lambda) break;
            // Converged by the step criterion but not certified: tighten.
            tol *= 1e-2;
            if (tol < 1e-22) stalled = true;
        }
        if (!stalled) break;
        const VectorXd stalled_at = beta;
        if (homotopy(gram_, c, lambda, n_rows_, exact, &stalled_at)) {
            have_exact = true;
            break;
        }
        if (sweeps <= early && sweeps < budget) {
            stalled = false;
            continue;
        }
        if (!homotopy(gram_, c, lambda, n_rows_, exact))
            throw ConvergenceError("coordinate descent did not converge in " + std::to_string(budget) +
                                   " sweeps and the homotopy fallback failed (lambda=" + std::to_string(lambda) +
                                   ")");
        have_exact = true;
        break;
    }
    if (have_exact) {
        beta = std::move(exact);
        grad = c;
        for (Index k = 0; k < p; ++k)
            if (beta[k] != 0.0) grad.noalias() -= beta[k] * gram_.col(k);
        // Near-singular active blocks can leave the homotopy slightly off;
        // finish with plain sweeps from there.
        for (long extra = 0; kkt_violation(beta, grad, lambda) > opts.kkt_factor * lambda; ++extra) {
            if (extra > budget) break;
            ++sweeps;
            cd_pass(nullptr);
            if (try_polish()) break;
        }
    }

    // Recompute the gradient from scratch for certification.
    grad = c;
    for (Index k = 0; k < p; ++k)
        if (beta[k] != 0.0) grad.noalias() -= beta[k] * gram_.col(k);
    const double viol = kkt_violation(beta, grad, lambda);
    fit.kkt_residual = n_rows_ * viol;
    record_solve(viol / lambda);
    if (viol > opts.kkt_factor * lambda)
        throw ConvergenceError("LASSO solution failed KKT certification (relative violation " +
                               std::to_string(viol / lambda) + ")");

    fit.beta = std::move(beta);
    fit.active_set = support_of(fit.beta);
    fit.sweeps = sweeps;
    if (std::isfinite(yty_over_n)) {
        // (1/2n)||y - X b||^2 = yty/2n - c^T b + b^T G b / 2, and G b = c - grad.
        const double cb = c.dot(fit.beta);
        const double bgb = fit.beta.dot(c - grad);
        fit.objective = 0.5 * yty_over_n - cb + 0.5 * bgb + lambda * fit.beta.lpNorm<1>();
    }
    return fit;
}

LassoFit solve(const VectorXd& y, const MatrixXd& X, double lambda, const VectorXd* warm, const LassoOptions& opts)
{
    if (y.size() != X.rows()) throw InputError("response length does not match design rows");
    if (!y.allFinite() || !X.allFinite()) throw InputError("non-finite input to LASSO");
    const double n = static_cast<double>(X.rows());
    GramLasso solver = GramLasso::from_design(X);
    VectorXd c = X.transpose() * y / n;
    LassoFit fit = solver.solve(c, lambda, warm, nullptr, opts, y.squaredNorm() / n);
    // Report the objective from the explicit residual.
    fit.objective = (y - X * fit.beta).squaredNorm() / (2.0 * n) + lambda * fit.beta.lpNorm<1>();
    return fit;
}

MatrixXd drop_column(const MatrixXd& X, Index j)
{
    if (j < 0 || j >= X.cols()) throw InputError("column index out of range");
    MatrixXd out(X.rows(), X.cols() - 1);
    out.leftCols(j) = X.leftCols(j);
    out.rightCols(X.cols() - 1 - j) = X.rightCols(X.cols() - 1 - j);
    return out;
}

LassoFit solve_offset(const VectorXd& y, const MatrixXd& X, Index j, double b, double lambda,
                      const LassoOptions& opts)
{
    check_lambda(lambda);
    if (y.size() != X.rows()) throw InputError("response length does not match design rows");
    const VectorXd shifted = y - b * X.col(j);
    if (X.cols() == 1) {
        LassoFit fit;
        fit.lambda = lambda;
        fit.beta = VectorXd(0);
        fit.objective = shifted.squaredNorm() / (2.0 * static_cast<double>(X.rows()));
        return fit;
    }
    return solve(shifted, drop_column(X, j), lambda, nullptr, opts);
}

KktReport kkt_check(const LassoFit& fit, const VectorXd& y, const MatrixXd& X, double lambda, double tol)
{
    KktReport rep;
    if (fit.beta.size() != X.cols()) return rep;
    const double n = static_cast<double>(X.rows());
    const VectorXd corr = X.transpose() * (y - X * fit.beta);
    double worst = 0.0;
    for (Index k = 0; k < X.cols(); ++k) {
        const double bk = fit.beta[k];
        double v;
        if (bk != 0.0)
            v = std::abs(corr[k] - (bk > 0 ? n * lambda : -n * lambda));
        else
            v = std::max(0.0, std::abs(corr[k]) - n * lambda);
        worst = std::max(worst, v);
    }
    rep.max_violation = worst;
    rep.pass = worst <= tol;
    return rep;
}

std::vector<double> lambda_grid_from_max(double lambda_max, int count, double ratio)
{
    if (count < 2) throw InputError("lambda grid needs at least two points");
    if (!(ratio > 0.0 && ratio < 1.0)) throw InputError("lambda grid ratio must lie in (0, 1)");
    if (!(lambda_max > 0.0) || !std::isfinite(lambda_max))
        throw InputError("degenerate lambda grid: response is orthogonal to every column");
    std::vector<double> grid(static_cast<std::size_t>(count));
    const double lo = std::log(ratio);
    for (int i = 0; i < count; ++i) grid[static_cast<std::size_t>(i)] = lambda_max * std::exp(lo * i / (count - 1));
    grid.front() = lambda_max;
    grid.back() = lambda_max * ratio;
    return grid;
}

std::vector<double> lambda_grid(const VectorXd& y, const MatrixXd& X, int count, double ratio)
{
    if (y.size() != X.rows()) throw InputError("response length does not match design rows");
    const double lmax = (X.transpose() * y).cwiseAbs().maxCoeff() / static_cast<double>(X.rows());
    return lambda_grid_from_max(lmax, count, ratio);
}

LassoStatistics lasso_statistics()
{
    return {g_solves.load(), g_max_relative_kkt.load()};
}

void reset_lasso_statistics()
{
    g_solves.store(0);
    g_max_relative_kkt.store(0.0);
}

} // namespace elltest
