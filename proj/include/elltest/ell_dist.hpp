#pragma once

#include <map>
#include <memory>
#include <mutex>

#include "elltest/lasso.hpp"
#include "elltest/model_core.hpp"

namespace elltest {

// Conditional law of the LASSO coordinate beta_j given S^(j), for the data
// y - gamma X_j of the decomposition. The map u_1 -> beta_j is monotone with
// inverse Lambda(b, sign b); beta_j = 0 exactly when u_1 lies in [v-, v+].
class EllDistribution {
public:
    EllDistribution(NullDecomposition dec, double lambda, const LassoOptions& opts = {});

    const NullDecomposition& decomp() const { return dec_; }
    double lambda() const { return lambda_; }
    bool known_sigma() const { return dec_.known_sigma.has_value(); }

    double v_minus() const { return v_minus_; }
    double v_plus() const { return v_plus_; }
    double m_hat() const { return m_hat_; }
    const VectorXd& beta_mj_at_0() const { return beta0_; }

    // Offset LASSO on X_{-j} with beta_j fixed at b (memoized).
    VectorXd beta_mj(double b) const;
    double lambda_fn(double b, int eps) const;

    // Law of u_1: F_u with n - d degrees of freedom, or Phi when sigma is known.
    double cdf(double x) const;
    double sf(double x) const;

private:
    struct Memo {
        std::mutex mu;
        std::map<double, VectorXd> values;
    };

    NullDecomposition dec_;
    double lambda_;
    LassoOptions opts_;
    VectorXd c_z_;
    double xj_dot_zhat_ = 0.0;
    double denom_ = 1.0;
    double v_minus_ = 0.0, v_plus_ = 0.0, m_hat_ = 0.0;
    VectorXd beta0_;
    std::shared_ptr<Memo> memo_;
};

inline int sign_of(double x) { return x >= 0.0 ? 1 : -1; }

// LASSO on the full design for the shifted response y - gamma X_j.
LassoFit fit_shifted(const NullDecomposition& dec, double lambda, const LassoOptions& opts = {});

double ell_cdf(const EllDistribution& dist, double b);
// P(|beta_j| >= b | S^(j)) for b > 0.
double two_sided_tail(const EllDistribution& dist, double b);
// Tail of |u_1 - m_hat|: 1 - F(m_hat + t) + F(m_hat - t).
double abs_u_tail(const EllDistribution& dist, double t);

constexpr double kConsistencyTol = 1e-6;

double p_value(const EllDistribution& dist, double u1, double beta_hat_j);
double selection_prob(const EllDistribution& dist);
double recentered_p(const EllDistribution& dist, double z1);

} // namespace elltest
