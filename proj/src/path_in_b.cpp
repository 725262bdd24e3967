#include "elltest/path_in_b.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>

#include "elltest/errors.hpp"

namespace elltest {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Problem {
    MatrixXd G;  // Z^T Z / n
    VectorXd c0; // Z^T y / n
    VectorXd w;  // Z^T v / n
    double lambda;
    double wscale; // bound on |w_k|; slopes below 1e-11 of it are rounding noise
    GramLasso solver;
    LassoOptions opts;

    VectorXd c(double b) const { return c0 - b * w; }
};

// The affine solution on a fixed support/sign pattern: beta_A(b) = a + b g.
struct Affine {
    std::vector<Index> active;
    std::vector<int> signs;
    VectorXd a, g;   // full length, zero off the support
    VectorXd rho0, rho1; // correlation c(b) - G beta(b) = rho0 - b rho1
};

Affine affine_for(const Problem& P, std::vector<Index> active, std::vector<int> signs)
{
    const Index p = P.G.rows();
    Affine af;
    af.a = VectorXd::Zero(p);
    af.g = VectorXd::Zero(p);
    if (!active.empty()) {
        const auto na = static_cast<Index>(active.size());
        Eigen::LLT<MatrixXd> llt(P.G(active, active));
        if (llt.info() != Eigen::Success) throw PathError("active block of Z^T Z is not positive definite");
        VectorXd rhs(na);
        for (Index t = 0; t < na; ++t) rhs[t] = P.c0[active[t]] - P.lambda * signs[t];
        const VectorXd a = llt.solve(rhs);
        const VectorXd g = -llt.solve(VectorXd(P.w(active)));
        for (Index t = 0; t < na; ++t) {
            af.a[active[t]] = a[t];
            af.g[active[t]] = g[t];
        }
    }
    af.rho0 = P.c0 - P.G * af.a;
    af.rho1 = P.w + P.G * af.g;
    const double tiny = 1e-11 * P.wscale;
    for (Index k = 0; k < p; ++k) {
        if (std::abs(af.rho1[k]) <= tiny) af.rho1[k] = 0.0;
        if (std::abs(af.g[k]) * P.G(k, k) <= tiny) af.g[k] = 0.0;
    }
    af.active = std::move(active);
    af.signs = std::move(signs);
    return af;
}

Affine affine_from_solution(const Problem& P, const VectorXd& beta)
{
    std::vector<Index> act;
    std::vector<int> sg;
    for (Index k = 0; k < beta.size(); ++k)
        if (beta[k] != 0.0) {
            act.push_back(k);
            sg.push_back(beta[k] > 0 ? 1 : -1);
        }
    return affine_for(P, std::move(act), std::move(sg));
}

bool at_knot(const Problem& P, const VectorXd& beta, double b)
{
    const VectorXd rho = P.c(b) - P.G * beta;
    const double bscale = std::max(1.0, beta.cwiseAbs().maxCoeff());
    for (Index k = 0; k < beta.size(); ++k) {
        if (beta[k] != 0.0 && std::abs(beta[k]) < 1e-9 * bscale) return true;
        if (beta[k] == 0.0 && std::abs(rho[k]) > P.lambda * (1.0 - 1e-9)) return true;
    }
    return false;
}

struct Event {
    double b = kInf; // distance measured along dir
    Index coord = -1;
    bool entering = false;
    int sign = 0;
    bool tie = false;
};

// Next event strictly beyond b_cur in direction dir (+1 or -1).
Event next_event(const Problem& P, const Affine& af, double b_cur, int dir)
{
    const double eps = 1e-12 * (1.0 + std::abs(b_cur));
    Event ev;
    double best = kInf;
    auto consider = [&](double b, Index k, bool entering, int sign) {
        const double dist = (b - b_cur) * dir;
        if (!(dist > eps) || !std::isfinite(dist)) return;
        if (std::isfinite(best) && std::abs(dist - best) <= 1e-12 * (1.0 + best)) {
            ev.tie = true;
            return;
        }
        if (dist < best) {
            best = dist;
            ev.b = b;
            ev.coord = k;
            ev.entering = entering;
            ev.sign = sign;
            ev.tie = false;
        }
    };
    std::vector<char> is_active(static_cast<std::size_t>(P.G.rows()), 0);
    for (Index k : af.active) is_active[static_cast<std::size_t>(k)] = 1;
    for (Index k = 0; k < P.G.rows(); ++k) {
        if (is_active[static_cast<std::size_t>(k)]) {
            if (af.g[k] != 0.0) consider(-af.a[k] / af.g[k], k, false, 0);
        } else if (af.rho1[k] != 0.0) {
            consider((af.rho0[k] - P.lambda) / af.rho1[k], k, true, +1);
            consider((af.rho0[k] + P.lambda) / af.rho1[k], k, true, -1);
        }
    }
    return ev;
}

// Does the affine piece satisfy the optimality conditions just beyond b?
bool valid_beyond(const Problem& P, const Affine& af, double b, int dir)
{
    const double h = 1e-7 * (1.0 + std::abs(b)) * dir;
    const double bb = b + h;
    for (std::size_t t = 0; t < af.active.size(); ++t) {
        const Index k = af.active[t];
        if ((af.a[k] + bb * af.g[k]) * af.signs[t] <= 0.0) return false;
    }
    std::vector<char> is_active(static_cast<std::size_t>(P.G.rows()), 0);
    for (Index k : af.active) is_active[static_cast<std::size_t>(k)] = 1;
    for (Index k = 0; k < P.G.rows(); ++k)
        if (!is_active[static_cast<std::size_t>(k)] && std::abs(af.rho0[k] - bb * af.rho1[k]) > P.lambda * (1.0 + 1e-9))
            return false;
    return true;
}

PathSegment make_segment(const Affine& af, double anchor)
{
    PathSegment s;
    s.anchor_b = anchor;
    s.anchor_beta = af.a + anchor * af.g;
    s.slope = af.g;
    s.active = af.active;
    s.signs = af.signs;
    return s;
}

} // namespace

PathInB path_in_b(const VectorXd& y, const VectorXd& v, const MatrixXd& Z, double lambda, const LassoOptions& opts)
{
    if (!(lambda > 0.0)) throw InputError("lambda must be positive");
    if (y.size() != Z.rows() || v.size() != Z.rows()) throw InputError("dimension mismatch in path_in_b");
    const double n = static_cast<double>(Z.rows());

    Problem P;
    P.solver = GramLasso::from_design(Z);
    P.G = P.solver.gram();
    P.c0 = Z.transpose() * y / n;
    P.w = Z.transpose() * v / n;
    P.lambda = lambda;
    P.opts = opts;
    P.wscale = Z.cols() > 0 ? v.norm() * std::sqrt(P.G.diagonal().maxCoeff() / n) : 0.0;

    PathInB path;
    path.lambda = lambda;
    if (Z.cols() == 0) {
        PathSegment s;
        s.anchor_beta = VectorXd(0);
        s.slope = VectorXd(0);
        path.segments.push_back(s);
        return path;
    }
    {
        Eigen::LLT<MatrixXd> llt(P.G);
        if (llt.info() != Eigen::Success) throw InputError("Z must have full column rank");
    }

    // Pick a differentiability point near 0.
    double x0 = 0.0;
    LassoFit fit = P.solver.solve(P.c(x0), lambda, nullptr, nullptr, opts);
    for (int tries = 0; tries < 8 && at_knot(P, fit.beta, x0); ++tries) {
        x0 += 1e-6;
        fit = P.solver.solve(P.c(x0), lambda, nullptr, nullptr, opts);
    }
    path.start = x0;
    const Affine start = affine_from_solution(P, fit.beta);

    std::deque<PathSegment> segs;
    std::deque<double> knots;
    segs.push_back(make_segment(start, x0));

    const std::size_t max_knots = 100000;
    for (int dir : {+1, -1}) {
        Affine af = start;
        double b_cur = x0;
        double last_knot = kInf;
        for (;;) {
            Event ev = next_event(P, af, b_cur, dir);
            if (!std::isfinite(ev.b)) break; // terminal: no further event
            if (std::abs(ev.b - last_knot) <= 1e-12 * (1.0 + std::abs(ev.b))) {
                std::ostringstream msg;
                msg << "path tracing stalled at b=" << ev.b << " (coordinate " << ev.coord << ")";
                throw PathError(msg.str());
            }
            if (knots.size() >= max_knots) throw PathError("path has too many knots");
            last_knot = ev.b;

            Affine next;
            bool ok = false;
            if (!ev.tie) {
                std::vector<Index> act = af.active;
                std::vector<int> sg = af.signs;
                if (ev.entering) {
                    auto pos = std::lower_bound(act.begin(), act.end(), ev.coord);
                    sg.insert(sg.begin() + (pos - act.begin()), ev.sign);
                    act.insert(pos, ev.coord);
                } else {
                    auto pos = std::find(act.begin(), act.end(), ev.coord);
                    sg.erase(sg.begin() + (pos - act.begin()));
                    act.erase(pos);
                }
                next = affine_for(P, std::move(act), std::move(sg));
                ok = valid_beyond(P, next, ev.b, dir);
            }
            if (!ok) {
                // Simultaneous or ambiguous events: read the support off a
                // direct solve just past the knot.
                const double probe = ev.b + dir * (1e-9 + 1e-12 * std::abs(ev.b));
                const LassoFit f = P.solver.solve(P.c(probe), lambda, nullptr, nullptr, opts);
                next = affine_from_solution(P, f.beta);
            }

            if (dir > 0) {
                knots.push_back(ev.b);
                segs.push_back(make_segment(next, ev.b));
            } else {
                knots.push_front(ev.b);
                segs.push_front(make_segment(next, ev.b));
            }
            af = std::move(next);
            b_cur = ev.b;
        }
    }

    path.knots.assign(knots.begin(), knots.end());
    path.segments.assign(segs.begin(), segs.end());
    return path;
}

VectorXd eval_path(const PathInB& path, double b)
{
    const auto it = std::upper_bound(path.knots.begin(), path.knots.end(), b);
    const auto idx = static_cast<std::size_t>(it - path.knots.begin());
    return path.segments[idx].at(b);
}

} // namespace elltest
