#include "elltest/amp_power.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "elltest/errors.hpp"
#include "elltest/random.hpp"
#include "elltest/special_fn.hpp"

namespace elltest {

double eta(double x, double omega)
{
    if (x > omega) return x - omega;
    if (x < -omega) return x + omega;
    return 0.0;
}

double eta_prime(double x, double omega)
{
    return std::abs(x) > omega ? 1.0 : 0.0;
}

CoefPrior CoefPrior::point_masses(std::vector<double> masses, std::vector<double> atoms)
{
    if (masses.size() != atoms.size() || masses.empty()) throw InputError("prior needs matching masses and atoms");
    double total = 0.0;
    for (double m : masses) {
        if (!(m >= 0.0)) throw InputError("prior masses must be nonnegative");
        total += m;
    }
    if (std::abs(total - 1.0) > 1e-12) throw InputError("prior masses must sum to 1");
    CoefPrior p;
    p.kind = Kind::point_mass;
    p.masses = std::move(masses);
    p.atoms = std::move(atoms);
    return p;
}

CoefPrior CoefPrior::sparse(double null_mass, double h)
{
    return point_masses({null_mass, 1.0 - null_mass}, {0.0, h});
}

CoefPrior CoefPrior::gaussian(double mean, double variance)
{
    if (!(variance > 0.0)) throw InputError("Gaussian prior needs positive variance");
    CoefPrior p;
    p.kind = Kind::gaussian;
    p.mean = mean;
    p.variance = variance;
    return p;
}

double CoefPrior::second_moment() const
{
    if (kind == Kind::gaussian) return mean * mean + variance;
    double s = 0.0;
    for (std::size_t i = 0; i < masses.size(); ++i) s += masses[i] * atoms[i] * atoms[i];
    return s;
}

QuadratureRule gauss_hermite(int order)
{
    if (order < 1) throw InputError("quadrature order must be positive");
    // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite polynomials.
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(order, order);
    for (int k = 1; k < order; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(static_cast<double>(k));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    QuadratureRule q;
    for (int k = 0; k < order; ++k) {
        q.nodes.push_back(es.eigenvalues()[k]);
        const double v0 = es.eigenvectors()(0, k);
        q.weights.push_back(v0 * v0);
    }
    return q;
}

namespace {

// Conditional on B0 = a, closed form with x = a + tau W.
SeMoments atom_moments(double a, double tau, double theta)
{
    const double c_hi = (theta - a) / tau;  // W > c_hi: x > theta
    const double c_lo = (-theta - a) / tau; // W < c_lo: x < -theta
    const double p_hi = norm_sf(c_hi), p_lo = norm_cdf(c_lo);
    const double f_hi = norm_pdf(c_hi), f_lo = norm_pdf(c_lo);
    SeMoments m;
    m.mean_eta_prime = p_hi + p_lo;
    // E[(tau W - theta)^2; W > c_hi] + E[(tau W + theta)^2; W < c_lo] + a^2 P(|x| <= theta)
    const double upper = tau * tau * (c_hi * f_hi + p_hi) - 2.0 * tau * theta * f_hi + theta * theta * p_hi;
    const double lower = tau * tau * (p_lo - c_lo * f_lo) - 2.0 * tau * theta * f_lo + theta * theta * p_lo;
    const double middle = a * a * std::max(0.0, 1.0 - p_hi - p_lo);
    m.mse = upper + lower + middle;
    return m;
}

const QuadratureRule& gh61()
{
    static const QuadratureRule rule = gauss_hermite(61);
    return rule;
}

double tau_fixed_point(double kappa, double sigma, double theta, const CoefPrior& prior)
{
    double t2 = sigma * sigma + kappa * prior.second_moment();
    for (int it = 0; it < 10000; ++it) {
        const double next = sigma * sigma + kappa * se_moments(prior, std::sqrt(t2), theta).mse;
        if (std::abs(next - t2) <= 1e-12 * next) return std::sqrt(next);
        t2 = next;
    }
    throw ConvergenceError("state-evolution fixed point for tau did not converge");
}

} // namespace

SeMoments se_moments(const CoefPrior& prior, double tau, double theta)
{
    SeMoments out;
    if (prior.kind == CoefPrior::Kind::point_mass) {
        for (std::size_t i = 0; i < prior.masses.size(); ++i) {
            const SeMoments m = atom_moments(prior.atoms[i], tau, theta);
            out.mean_eta_prime += prior.masses[i] * m.mean_eta_prime;
            out.mse += prior.masses[i] * m.mse;
        }
        return out;
    }
    const QuadratureRule& q = gh61();
    const double sd = std::sqrt(prior.variance);
    for (std::size_t i = 0; i < q.nodes.size(); ++i) {
        const SeMoments m = atom_moments(prior.mean + sd * q.nodes[i], tau, theta);
        out.mean_eta_prime += q.weights[i] * m.mean_eta_prime;
        out.mse += q.weights[i] * m.mse;
    }
    return out;
}

StateEvolutionSolution state_evolution(double kappa, double sigma, double lambda, const CoefPrior& prior)
{
    if (!(kappa > 0.0 && kappa < 1.0)) throw InputError("kappa must lie in (0, 1)");
    if (!(sigma > 0.0)) throw InputError("sigma must be positive");
    if (!(lambda > 0.0)) throw InputError("lambda must be positive");

    auto lambda_of = [&](double theta) {
        const double tau = tau_fixed_point(kappa, sigma, theta, prior);
        return theta * (1.0 - kappa * se_moments(prior, tau, theta).mean_eta_prime);
    };
    auto f = [&](double theta) { return lambda_of(theta) - lambda; };

    // f(theta) ~ theta (1 - kappa) - lambda < 0 near zero and ~ theta - lambda
    // for large theta.
    const double lo = lambda * 1e-8;
    double hi = lambda;
    int expansions = 0;
    while (f(hi) <= 0.0) {
        if (++expansions > 60) throw NoSolutionError("state evolution: root not bracketed");
        hi *= 2.0;
    }
    if (f(lo) >= 0.0) throw NoSolutionError("state evolution: no sign change at small threshold");

    // Scan for every sign change, then bisect each.
    const int scan = 200;
    std::vector<std::pair<double, double>> brackets;
    double prev_x = lo, prev_f = f(lo);
    for (int k = 1; k <= scan; ++k) {
        const double x = lo * std::pow(hi / lo, static_cast<double>(k) / scan);
        const double fx = f(x);
        if ((prev_f < 0.0) != (fx < 0.0)) brackets.emplace_back(prev_x, x);
        prev_x = x;
        prev_f = fx;
    }
    if (brackets.empty()) throw NoSolutionError("state evolution: root lost during scan");

    StateEvolutionSolution sol;
    sol.kappa = kappa;
    sol.sigma = sigma;
    sol.lambda = lambda;
    for (auto [a, b] : brackets) {
        double fa = f(a);
        for (int it = 0; it < 200 && b - a > 4e-16 * b; ++it) {
            const double mid = 0.5 * (a + b);
            const double fm = f(mid);
            if ((fm < 0.0) == (fa < 0.0)) {
                a = mid;
                fa = fm;
            } else {
                b = mid;
            }
        }
        sol.all_thetas.push_back(0.5 * (a + b));
    }
    sol.theta = sol.all_thetas.front();
    sol.tau = tau_fixed_point(kappa, sigma, sol.theta, prior);
    sol.alpha = sol.theta / sol.tau;
    const SeMoments m = se_moments(prior, sol.tau, sol.theta);
    sol.residual_lambda = std::abs(lambda - sol.theta * (1.0 - kappa * m.mean_eta_prime));
    sol.residual_tau = std::abs(sol.tau * sol.tau - sigma * sigma - kappa * m.mse);
    return sol;
}

FGDistribution fg_distribution(double h, const StateEvolutionSolution& se)
{
    const double s1k = std::sqrt(1.0 - se.kappa);
    FGDistribution fg;
    fg.mean_F = h * s1k / se.sigma;
    fg.mean_G = h * se.lambda / (se.alpha * se.tau * se.sigma * s1k);
    fg.var_F = 1.0;
    fg.cov = 1.0;
    fg.var_G = se.lambda * se.lambda / (se.alpha * se.alpha * se.sigma * se.sigma * (1.0 - se.kappa));
    return fg;
}

double limiting_p(PowerTest test, double F, double G)
{
    switch (test) {
    case PowerTest::z_one:
        return norm_sf(F);
    case PowerTest::z_two:
        return F >= 0.0 ? norm_sf(F) + norm_cdf(-F) : norm_cdf(F) + norm_sf(-F);
    case PowerTest::recentered:
        return G >= 0.0 ? norm_sf(F) + norm_cdf(F - 2.0 * G) : norm_cdf(F) + norm_sf(F - 2.0 * G);
    }
    return 1.0;
}

PowerEstimate asymptotic_power(PowerTest test, double alpha, const FGDistribution& fg, long draws, std::uint64_t seed)
{
    if (draws < 1) throw InputError("need at least one draw");
    PowerEstimate est;
    est.var_g_below_one = fg.var_G < 1.0 - 1e-12;
    const double extra = std::sqrt(std::max(0.0, fg.var_G - fg.cov * fg.cov / fg.var_F));
    const double sf = std::sqrt(fg.var_F);
    Rng rng(seed);
    long hits = 0;
    for (long i = 0; i < draws; ++i) {
        const double z1 = rng.normal();
        const double z2 = rng.normal();
        const double F = fg.mean_F + sf * z1;
        const double G = fg.mean_G + (fg.cov / sf) * z1 + extra * z2;
        if (limiting_p(test, F, G) <= alpha) ++hits;
    }
    est.power = static_cast<double>(hits) / static_cast<double>(draws);
    est.se = std::sqrt(est.power * (1.0 - est.power) / static_cast<double>(draws));
    return est;
}

} // namespace elltest
