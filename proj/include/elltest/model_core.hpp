#pragma once

#include <memory>
#include <optional>

#include <Eigen/Dense>

#include "elltest/lasso.hpp"
#include "elltest/linear_model.hpp"
#include "elltest/random.hpp"

namespace elltest {

// Everything that depends on (X, j) only: the Householder factorization of
// [X_{-j} | X_j], the residualized column r = (I - P_{-j}) X_j, and Gram
// caches for the LASSO. Shared by every response and every gamma.
//
// The null basis V (n x (n-d+1)) is held implicitly: its columns are the
// trailing columns of the full orthogonal factor, the first one oriented so
// that V_1 = r / ||r||. Products with V and V^T cost O(n d).
class DesignBasis {
public:
    DesignBasis(const MatrixXd& X, Index j);

    Index n() const { return n_; }
    Index d() const { return d_; }
    Index j() const { return j_; }
    Index null_dim() const { return n_ - d_ + 1; }

    const MatrixXd& X() const { return X_; }
    const MatrixXd& X_mj() const { return X_mj_; }
    auto xj() const { return X_.col(j_); }
    const VectorXd& xj_resid() const { return r_; }
    double xj_resid_norm() const { return r_norm_; }
    double xj_sqnorm() const { return xj_sqnorm_; }

    VectorXd project_mj(const VectorXd& v) const;   // P_{-j} v
    VectorXd project_full(const VectorXd& v) const; // P v onto span(X)
    VectorXd apply_V(const VectorXd& u) const;      // V u
    VectorXd apply_Vt(const VectorXd& e) const;     // V^T e
    MatrixXd V() const;                             // explicit, for diagnostics

    // LASSO on the full design and on X_{-j} (Gram form, divided by n).
    const GramLasso& full_solver() const { return full_; }
    const GramLasso& mj_solver() const { return mj_; }
    // X_{-j}^T X_j / n.
    const VectorXd& cross_mj() const { return cross_; }

private:
    Index n_, d_, j_;
    MatrixXd X_;
    MatrixXd X_mj_;
    Eigen::HouseholderQR<MatrixXd> qr_;
    VectorXd r_;
    double r_norm_ = 0.0;
    double v1_sign_ = 1.0;
    double xj_sqnorm_ = 0.0;
    GramLasso full_;
    GramLasso mj_;
    VectorXd cross_;
};

// The factorization y = y_hat_j + gamma r + s V u of the data under the
// hypothesis beta_j = gamma, with s = sigma_hat_j(gamma) (unit u) or the
// known sigma (u then holds z, a standard normal vector under the null).
struct NullDecomposition {
    std::shared_ptr<const DesignBasis> basis;
    VectorXd y;
    Index j = 0;
    VectorXd y_hat_j;         // P_{-j} y
    double sigma_hat_j = 0.0; // ||(I - P_{-j})(y - gamma X_j)||
    VectorXd u;
    double xj_resid_norm = 0.0;
    double gamma_shift = 0.0;
    std::optional<double> known_sigma;

    Index n() const { return basis->n(); }
    Index d() const { return basis->d(); }
    double df() const { return static_cast<double>(basis->n() - basis->d()); }
    double u1() const { return u[0]; }
    // Scale multiplying V u in the reconstruction.
    double scale() const { return known_sigma ? *known_sigma : sigma_hat_j; }
    // P_{-j}(y - gamma X_j): the projected response of the shifted data.
    VectorXd shifted_projection() const;
    MatrixXd V() const { return basis->V(); }
};

NullDecomposition decompose(const LinearModelData& data, Index j, double gamma = 0.0,
                            std::optional<double> known_sigma = std::nullopt);
NullDecomposition decompose(std::shared_ptr<const DesignBasis> basis, const VectorXd& y, double gamma = 0.0,
                            std::optional<double> known_sigma = std::nullopt);

// y_hat_j + gamma r + s V u_new.
VectorXd reconstruct(const NullDecomposition& dec, const VectorXd& u_new);
// The same response for the shifted data: P_{-j}(y - gamma X_j) + s V u_new.
VectorXd reconstruct_shifted(const NullDecomposition& dec, const VectorXd& u_new);

// Null draw of u: normalized Gaussian (unknown sigma) or plain Gaussian.
VectorXd null_direction(const NullDecomposition& dec, const VectorXd& raw_normal);
VectorXd sample_null_direction(const NullDecomposition& dec, Rng& rng);
VectorXd sample_null_response(const NullDecomposition& dec, Rng& rng);

struct TTestResult {
    double t = 0.0;
    double p_two = 1.0;
    double p_one_pos = 0.5; // alternative beta_j > gamma
    double p_one_neg = 0.5; // alternative beta_j < gamma
    double beta_ols = 0.0;
    double se = 0.0;
    double df = 0.0;
};

TTestResult t_test(const LinearModelData& data, Index j, double gamma = 0.0);

// T_j as a function of u_1 with S^(j) fixed: g(u) = C' u / sqrt(sigma_hat^2 - u^2 kappa').
struct TMap {
    double c_prime = 0.0;
    double kappa_prime = 0.0;
    double sigma_hat = 0.0;
    double operator()(double u) const;
};

TMap t_map(const NullDecomposition& dec);

struct Diagnostics {
    double m_hat = 0.0;
    std::optional<double> q;
    double tau_sq = 0.0;
};

// beta_mj_at_0 is the LASSO fit of the shifted projected response on X_{-j}.
Diagnostics diagnostics(const NullDecomposition& dec, const VectorXd& beta_mj_at_0,
                        std::optional<double> true_beta_j = std::nullopt);

} // namespace elltest
