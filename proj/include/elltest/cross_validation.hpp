#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "elltest/lasso.hpp"
#include "elltest/model_core.hpp"
#include "elltest/random.hpp"

namespace elltest {

enum class CvRule { min, one_se };

struct CvResult {
    std::vector<double> lambda_grid; // descending
    std::vector<double> cv_error;
    std::vector<double> cv_se;
    double lambda_min = 0.0;
    double lambda_1se = 0.0;
    std::vector<int> partition;
    int folds = 0;

    double select(CvRule rule) const { return rule == CvRule::min ? lambda_min : lambda_1se; }
};

// Random permutation cut into near-equal consecutive blocks.
std::vector<int> random_partition(Index n, int folds, Rng& rng);

// Everything CV needs that does not depend on the response: per-fold row
// sets and training Gram matrices. Reusable across many responses.
class CvPlan {
public:
    CvPlan(const MatrixXd& X, std::vector<int> partition, int folds);

    const std::vector<int>& partition() const { return partition_; }
    int folds() const { return folds_; }

    CvResult run(const VectorXd& y, const std::vector<double>* grid = nullptr, const LassoOptions& opts = {}) const;

private:
    struct Fold {
        std::vector<Index> train, test;
        MatrixXd X_train, X_test;
        GramLasso solver;
    };
    MatrixXd X_;
    std::vector<int> partition_;
    int folds_;
    std::vector<Fold> fold_data_;
};

CvResult cross_validate(const VectorXd& y, const MatrixXd& X, Rng& rng, int folds = 10,
                        const std::vector<double>* grid = nullptr, const std::vector<int>* partition = nullptr,
                        const LassoOptions& opts = {});

// Exogenous randomness of the randomized lambda choice: the Gaussian draw
// behind u-tilde and the fold partition. Both derive from `seed`.
struct ExogenousDraw {
    std::uint64_t seed = 0;
    VectorXd u_raw;
    std::vector<int> partition;
    int folds = 10;
};

ExogenousDraw draw_exogenous(Index null_dim, Index rows, int folds, Rng& rng);
ExogenousDraw exogenous_from_seed(std::uint64_t seed, Index null_dim, Index rows, int folds);

// Cross-validates the LASSO of y-tilde = P_{-j}(y - gamma X_j) + s V u-tilde
// on X_{-j}. Reads S^(j) only, never the observed u.
double choose_lambda_hat(const NullDecomposition& dec, const ExogenousDraw& draw, const CvPlan& plan,
                         CvRule rule = CvRule::min);
double choose_lambda_hat(const NullDecomposition& dec, Rng& rng, int folds = 10, CvRule rule = CvRule::min);

} // namespace elltest
