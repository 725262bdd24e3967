#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace elltest {

// eta(x; omega) = sign(x)(|x| - omega)_+ and its derivative 1{|x| > omega}.
double eta(double x, double omega);
double eta_prime(double x, double omega);

// Coefficient prior B0: finite mixture of point masses, or a Gaussian.
struct CoefPrior {
    enum class Kind { point_mass, gaussian };
    Kind kind = Kind::point_mass;
    std::vector<double> masses;
    std::vector<double> atoms;
    double mean = 0.0;
    double variance = 1.0;

    static CoefPrior point_masses(std::vector<double> masses, std::vector<double> atoms);
    // null_mass * delta_0 + (1 - null_mass) * delta_h
    static CoefPrior sparse(double null_mass, double h);
    static CoefPrior gaussian(double mean, double variance);

    double second_moment() const;
};

// Probabilists' Gauss-Hermite rule (weight exp(-x^2/2), weights sum to 1).
struct QuadratureRule {
    std::vector<double> nodes, weights;
};
QuadratureRule gauss_hermite(int order);

// E[eta'(B0 + tau W; theta)] and E[(eta(B0 + tau W; theta) - B0)^2].
struct SeMoments {
    double mean_eta_prime = 0.0;
    double mse = 0.0;
};
SeMoments se_moments(const CoefPrior& prior, double tau, double theta);

struct StateEvolutionSolution {
    double alpha = 0.0;
    double tau = 0.0;
    double theta = 0.0; // alpha * tau
    double residual_lambda = 0.0;
    double residual_tau = 0.0;
    double kappa = 0.0, sigma = 0.0, lambda = 0.0;
    std::vector<double> all_thetas; // every root found in the bracket
};

// Solves lambda = alpha tau (1 - kappa E eta') and
// tau^2 = sigma^2 + kappa E (eta - B0)^2 at threshold theta = alpha tau.
// lambda is on the scale of (1/2)||y - X b||^2 + lambda ||b||_1 with
// columns of X of unit norm on average.
StateEvolutionSolution state_evolution(double kappa, double sigma, double lambda, const CoefPrior& prior);

struct FGDistribution {
    double mean_F = 0.0;
    double mean_G = 0.0;
    double var_F = 1.0;
    double cov = 1.0;
    double var_G = 1.0;
};

FGDistribution fg_distribution(double h, const StateEvolutionSolution& se);

enum class PowerTest { recentered, z_one, z_two };

// Limiting p-value as a function of a draw (F, G).
double limiting_p(PowerTest test, double F, double G);

struct PowerEstimate {
    double power = 0.0;
    double se = 0.0;
    bool var_g_below_one = false;
};

PowerEstimate asymptotic_power(PowerTest test, double alpha, const FGDistribution& fg, long draws = 1000000,
                               std::uint64_t seed = 1);

} // namespace elltest
