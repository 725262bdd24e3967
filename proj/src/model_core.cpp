#include "elltest/model_core.hpp"

#include <cmath>
#include <string>

#include "elltest/errors.hpp"
#include "elltest/special_fn.hpp"

namespace elltest {

namespace {

constexpr double kRankTol = 1e-10;

MatrixXd drop_row_col(const MatrixXd& G, Index j)
{
    const Index p = G.rows();
    MatrixXd out(p - 1, p - 1);
    const Index a = j, b = p - 1 - j;
    out.topLeftCorner(a, a) = G.topLeftCorner(a, a);
    out.topRightCorner(a, b) = G.topRightCorner(a, b);
    out.bottomLeftCorner(b, a) = G.bottomLeftCorner(b, a);
    out.bottomRightCorner(b, b) = G.bottomRightCorner(b, b);
    return out;
}

} // namespace

DesignBasis::DesignBasis(const MatrixXd& X, Index j) : n_(X.rows()), d_(X.cols()), j_(j), X_(X)
{
    if (d_ < 1 || n_ < 1) throw InputError("empty design");
    if (j < 0 || j >= d_) throw InputError("column index " + std::to_string(j) + " out of range");
    if (n_ < d_) throw InputError("design has fewer rows than columns");
    if (!X_.allFinite()) throw InputError("design contains non-finite values");

    X_mj_ = drop_column(X_, j_);
    MatrixXd M(n_, d_);
    M.leftCols(d_ - 1) = X_mj_;
    M.col(d_ - 1) = X_.col(j_);
    qr_.compute(M);

    // |R_kk| is the distance of column k from the span of the earlier
    // columns; a tiny ratio flags (near) rank deficiency.
    const VectorXd rdiag = qr_.matrixQR().diagonal().cwiseAbs();
    const double rmax = rdiag.maxCoeff();
    if (!(rmax > 0.0)) throw DegenerateDesignError("design matrix is zero");
    for (Index k = 0; k < d_ - 1; ++k)
        if (rdiag[k] < kRankTol * rmax) throw DegenerateDesignError("columns other than the tested one are rank deficient");
    const double rjj = qr_.matrixQR()(d_ - 1, d_ - 1);
    xj_sqnorm_ = X_.col(j_).squaredNorm();
    if (std::abs(rjj) < kRankTol * rmax || std::abs(rjj) <= kRankTol * std::sqrt(xj_sqnorm_))
        throw DegenerateDesignError("tested column lies (numerically) in the span of the others");

    v1_sign_ = rjj >= 0.0 ? 1.0 : -1.0;
    r_norm_ = std::abs(rjj);
    VectorXd w = VectorXd::Zero(n_);
    w[d_ - 1] = rjj;
    r_ = qr_.householderQ() * w;

    full_ = GramLasso::from_design(X_);
    if (d_ > 1) {
        mj_ = GramLasso(drop_row_col(full_.gram(), j_), static_cast<double>(n_));
        cross_.resize(d_ - 1);
        cross_.head(j_) = full_.gram().col(j_).head(j_);
        cross_.tail(d_ - 1 - j_) = full_.gram().col(j_).tail(d_ - 1 - j_);
    } else {
        mj_ = GramLasso(MatrixXd(0, 0), static_cast<double>(n_));
        cross_.resize(0);
    }
}

VectorXd DesignBasis::project_mj(const VectorXd& v) const
{
    VectorXd w = qr_.householderQ().adjoint() * v;
    w.tail(n_ - d_ + 1).setZero();
    return qr_.householderQ() * w;
}

VectorXd DesignBasis::project_full(const VectorXd& v) const
{
    VectorXd w = qr_.householderQ().adjoint() * v;
    w.tail(n_ - d_).setZero();
    return qr_.householderQ() * w;
}

VectorXd DesignBasis::apply_Vt(const VectorXd& e) const
{
    if (e.size() != n_) throw InputError("vector length does not match design rows");
    VectorXd w = qr_.householderQ().adjoint() * e;
    VectorXd out = w.tail(n_ - d_ + 1);
    out[0] *= v1_sign_;
    return out;
}

VectorXd DesignBasis::apply_V(const VectorXd& u) const
{
    if (u.size() != n_ - d_ + 1) throw InputError("null-space vector has wrong length");
    VectorXd w = VectorXd::Zero(n_);
    w.tail(n_ - d_ + 1) = u;
    w[d_ - 1] *= v1_sign_;
    return qr_.householderQ() * w;
}

MatrixXd DesignBasis::V() const
{
    const Index m = null_dim();
    MatrixXd out(n_, m);
    for (Index k = 0; k < m; ++k) out.col(k) = apply_V(VectorXd::Unit(m, k));
    return out;
}

VectorXd NullDecomposition::shifted_projection() const
{
    if (gamma_shift == 0.0) return y_hat_j;
    return y_hat_j - gamma_shift * (basis->xj() - basis->xj_resid());
}

NullDecomposition decompose(std::shared_ptr<const DesignBasis> basis, const VectorXd& y, double gamma,
                            std::optional<double> known_sigma)
{
    if (!basis) throw InputError("missing design basis");
    if (y.size() != basis->n()) throw InputError("response length does not match design rows");
    if (!y.allFinite() || !std::isfinite(gamma)) throw InputError("non-finite response or shift");
    if (known_sigma) {
        if (!(*known_sigma > 0.0) || !std::isfinite(*known_sigma)) throw InputError("known sigma must be positive");
    }

    NullDecomposition dec;
    dec.j = basis->j();
    dec.y = y;
    dec.gamma_shift = gamma;
    dec.known_sigma = known_sigma;
    dec.xj_resid_norm = basis->xj_resid_norm();
    dec.y_hat_j = basis->project_mj(y);

    const VectorXd e = (y - dec.y_hat_j) - gamma * basis->xj_resid();
    const VectorXd w = basis->apply_Vt(e);
    dec.sigma_hat_j = w.norm();
    if (known_sigma) {
        dec.u = w / *known_sigma;
    } else {
        const double ref = y.norm() + std::abs(gamma) * std::sqrt(basis->xj_sqnorm());
        if (!(dec.sigma_hat_j > 1e-13 * ref))
            throw ZeroResidualError("residual norm under the hypothesis is zero");
        dec.u = w / dec.sigma_hat_j;
    }
    dec.basis = std::move(basis);
    return dec;
}

NullDecomposition decompose(const LinearModelData& data, Index j, double gamma, std::optional<double> known_sigma)
{
    // The factorization itself only needs n >= d; procedures that use the
    // law of u check the residual degrees of freedom themselves.
    data.require_known_sigma();
    return decompose(std::make_shared<const DesignBasis>(data.X(), j), data.y(), gamma, known_sigma);
}

namespace {

void check_direction(const NullDecomposition& dec, const VectorXd& u_new)
{
    if (u_new.size() != dec.basis->null_dim())
        throw InputError("direction has length " + std::to_string(u_new.size()) + ", expected " +
                         std::to_string(dec.basis->null_dim()));
    if (!dec.known_sigma && std::abs(u_new.norm() - 1.0) > 1e-8)
        throw InputError("direction must have unit norm in unknown-sigma mode");
}

} // namespace

VectorXd reconstruct(const NullDecomposition& dec, const VectorXd& u_new)
{
    check_direction(dec, u_new);
    return dec.y_hat_j + dec.gamma_shift * dec.basis->xj_resid() + dec.scale() * dec.basis->apply_V(u_new);
}

VectorXd reconstruct_shifted(const NullDecomposition& dec, const VectorXd& u_new)
{
    check_direction(dec, u_new);
    return dec.shifted_projection() + dec.scale() * dec.basis->apply_V(u_new);
}

VectorXd null_direction(const NullDecomposition& dec, const VectorXd& raw_normal)
{
    if (raw_normal.size() != dec.basis->null_dim()) throw InputError("raw draw has wrong length");
    if (dec.known_sigma) return raw_normal;
    const double norm = raw_normal.norm();
    if (!(norm > 0.0)) throw NumericalError("degenerate Gaussian draw");
    return raw_normal / norm;
}

VectorXd sample_null_direction(const NullDecomposition& dec, Rng& rng)
{
    return null_direction(dec, rng.normal_vector(dec.basis->null_dim()));
}

VectorXd sample_null_response(const NullDecomposition& dec, Rng& rng)
{
    return reconstruct(dec, sample_null_direction(dec, rng));
}

TTestResult t_test(const LinearModelData& data, Index j, double gamma)
{
    data.require_unknown_sigma();
    const DesignBasis basis(data.X(), j);
    const VectorXd& r = basis.xj_resid();
    const double rr = r.squaredNorm();
    TTestResult out;
    out.df = static_cast<double>(data.n() - data.d());
    out.beta_ols = r.dot(data.y()) / rr;
    const double rss = (data.y() - basis.project_full(data.y())).squaredNorm();
    out.se = std::sqrt(rss / out.df) / std::sqrt(rr);
    if (!(out.se > 0.0)) throw ZeroResidualError("OLS residuals are zero");
    out.t = (out.beta_ols - gamma) / out.se;
    out.p_two = std::min(1.0, 2.0 * t_sf(std::abs(out.t), out.df));
    out.p_one_pos = t_sf(out.t, out.df);
    out.p_one_neg = t_cdf(out.t, out.df);
    return out;
}

double TMap::operator()(double u) const
{
    return c_prime * u / std::sqrt(sigma_hat * sigma_hat - u * u * kappa_prime);
}

TMap t_map(const NullDecomposition& dec)
{
    const DesignBasis& b = *dec.basis;
    const double n = static_cast<double>(b.n());
    // (X^T X)^{-1}_{jj} from the Gram matrix.
    const VectorXd ej = VectorXd::Unit(b.d(), b.j());
    const double inv_jj = b.full_solver().gram().ldlt().solve(ej)[b.j()] / n;
    const double C = std::sqrt(dec.df() / inv_jj);
    const double kappa = b.project_full(b.xj_resid()).squaredNorm();
    const double rn = b.xj_resid_norm();
    TMap g;
    g.sigma_hat = dec.sigma_hat_j;
    g.c_prime = C * dec.sigma_hat_j / rn;
    g.kappa_prime = kappa * (dec.sigma_hat_j / rn) * (dec.sigma_hat_j / rn);
    return g;
}

Diagnostics diagnostics(const NullDecomposition& dec, const VectorXd& beta_mj_at_0, std::optional<double> true_beta_j)
{
    const DesignBasis& b = *dec.basis;
    if (beta_mj_at_0.size() != b.d() - 1) throw InputError("coefficient vector has wrong length");
    const VectorXd fitted = dec.shifted_projection() - b.X_mj() * beta_mj_at_0;
    Diagnostics out;
    out.m_hat = -b.xj().dot(fitted) / (b.xj_resid_norm() * dec.scale());
    out.tau_sq = (b.xj() - b.xj_resid()).squaredNorm();
    if (true_beta_j) out.q = *true_beta_j * out.tau_sq / b.xj_resid_norm();
    return out;
}

} // namespace elltest
