#include "elltest/ell_dist.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "elltest/errors.hpp"
#include "elltest/special_fn.hpp"

namespace elltest {

EllDistribution::EllDistribution(NullDecomposition dec, double lambda, const LassoOptions& opts)
    : dec_(std::move(dec)), lambda_(lambda), opts_(opts), memo_(std::make_shared<Memo>())
{
    if (!(lambda_ > 0.0) || !std::isfinite(lambda_)) throw InputError("lambda must be positive and finite");
    if (!known_sigma() && dec_.df() < 1.0) throw InputError("unknown-sigma mode needs n >= d + 1");
    const DesignBasis& b = *dec_.basis;
    const VectorXd zhat = dec_.shifted_projection();
    const double n = static_cast<double>(b.n());
    c_z_ = b.X_mj().transpose() * zhat / n;
    xj_dot_zhat_ = b.xj().dot(zhat);
    denom_ = dec_.scale() * b.xj_resid_norm();
    beta0_ = beta_mj(0.0);
    v_minus_ = lambda_fn(0.0, -1);
    v_plus_ = lambda_fn(0.0, +1);
    m_hat_ = 0.5 * (v_minus_ + v_plus_);
}

VectorXd EllDistribution::beta_mj(double b) const
{
    const DesignBasis& basis = *dec_.basis;
    if (basis.d() == 1) return VectorXd(0);
    const double key = std::abs(b) < 1e6 ? std::round(b * 1e12) / 1e12 : b;
    {
        std::lock_guard<std::mutex> lock(memo_->mu);
        auto it = memo_->values.find(key);
        if (it != memo_->values.end()) return it->second;
    }
    const VectorXd c = c_z_ - b * basis.cross_mj();
    VectorXd beta = basis.mj_solver().solve(c, lambda_, nullptr, nullptr, opts_).beta;
    std::lock_guard<std::mutex> lock(memo_->mu);
    memo_->values.emplace(key, beta);
    return beta;
}

double EllDistribution::lambda_fn(double b, int eps) const
{
    const DesignBasis& basis = *dec_.basis;
    const double n = static_cast<double>(basis.n());
    double num = -xj_dot_zhat_ + b * basis.xj_sqnorm() + n * lambda_ * eps;
    if (basis.d() > 1) num += n * basis.cross_mj().dot(beta_mj(b));
    return num / denom_;
}

double EllDistribution::cdf(double x) const
{
    return known_sigma() ? norm_cdf(x) : u_cdf(x, dec_.df());
}

double EllDistribution::sf(double x) const
{
    return known_sigma() ? norm_sf(x) : u_sf(x, dec_.df());
}

LassoFit fit_shifted(const NullDecomposition& dec, double lambda, const LassoOptions& opts)
{
    const DesignBasis& b = *dec.basis;
    const double n = static_cast<double>(b.n());
    VectorXd c = b.X().transpose() * dec.y / n;
    if (dec.gamma_shift != 0.0) c -= dec.gamma_shift * b.full_solver().gram().col(b.j());
    return b.full_solver().solve(c, lambda, nullptr, nullptr, opts);
}

double ell_cdf(const EllDistribution& dist, double b)
{
    return dist.cdf(dist.lambda_fn(b, sign_of(b)));
}

double two_sided_tail(const EllDistribution& dist, double b)
{
    if (!(b > 0.0)) throw InputError("two-sided tail needs b > 0");
    const double t = dist.sf(dist.lambda_fn(b, +1)) + dist.cdf(dist.lambda_fn(-b, -1));
    return std::clamp(t, 0.0, 1.0);
}

double abs_u_tail(const EllDistribution& dist, double t)
{
    const double m = dist.m_hat();
    return std::clamp(dist.sf(m + t) + dist.cdf(m - t), 0.0, 1.0);
}

double p_value(const EllDistribution& dist, double u1, double beta_hat_j)
{
    const double lo = dist.v_minus(), hi = dist.v_plus();
    if (beta_hat_j == 0.0) {
        if (u1 < lo - kConsistencyTol || u1 > hi + kConsistencyTol) {
            std::ostringstream msg;
            msg << "LASSO coefficient is zero but u1=" << u1 << " lies outside [" << lo << ", " << hi << "]";
            throw ConsistencyError(msg.str());
        }
        return abs_u_tail(dist, std::abs(u1 - dist.m_hat()));
    }
    if (u1 > lo + kConsistencyTol && u1 < hi - kConsistencyTol) {
        std::ostringstream msg;
        msg << "LASSO coefficient is " << beta_hat_j << " but u1=" << u1 << " lies inside [" << lo << ", " << hi << "]";
        throw ConsistencyError(msg.str());
    }
    return two_sided_tail(dist, std::abs(beta_hat_j));
}

double selection_prob(const EllDistribution& dist)
{
    return std::clamp(dist.sf(dist.v_plus()) + dist.cdf(dist.v_minus()), 0.0, 1.0);
}

double recentered_p(const EllDistribution& dist, double z1)
{
    if (!dist.known_sigma()) throw InputError("the re-centered test needs a known sigma");
    const double m = dist.m_hat();
    const double s = z1 - m >= 0.0 ? 1.0 : -1.0;
    // 1 - [Phi(z1) - Phi(2m - z1)] sign(z1 - m), written with tails.
    const double p = s > 0 ? norm_sf(z1) + norm_cdf(2.0 * m - z1) : norm_cdf(z1) + norm_sf(2.0 * m - z1);
    return std::clamp(p, 0.0, 1.0);
}

} // namespace elltest
