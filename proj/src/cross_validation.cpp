#include "elltest/cross_validation.hpp"

#include <cmath>
#include <string>

#include "elltest/errors.hpp"

namespace elltest {

std::vector<int> random_partition(Index n, int folds, Rng& rng)
{
    if (folds < 2) throw InputError("cross-validation needs at least two folds");
    if (n < folds) throw InputError("fewer rows than folds: some fold would be empty");
    const std::vector<Index> perm = rng.permutation(n);
    std::vector<int> part(static_cast<std::size_t>(n));
    for (Index pos = 0; pos < n; ++pos)
        part[static_cast<std::size_t>(perm[static_cast<std::size_t>(pos)])] = static_cast<int>(pos * folds / n);
    return part;
}

CvPlan::CvPlan(const MatrixXd& X, std::vector<int> partition, int folds)
    : X_(X), partition_(std::move(partition)), folds_(folds)
{
    if (folds_ < 2) throw InputError("cross-validation needs at least two folds");
    if (static_cast<Index>(partition_.size()) != X_.rows()) throw InputError("partition length does not match rows");
    fold_data_.resize(static_cast<std::size_t>(folds_));
    for (Index i = 0; i < X_.rows(); ++i) {
        const int f = partition_[static_cast<std::size_t>(i)];
        if (f < 0 || f >= folds_) throw InputError("partition label out of range");
        for (int g = 0; g < folds_; ++g) {
            auto& fd = fold_data_[static_cast<std::size_t>(g)];
            (g == f ? fd.test : fd.train).push_back(i);
        }
    }
    for (int g = 0; g < folds_; ++g) {
        auto& fd = fold_data_[static_cast<std::size_t>(g)];
        if (fd.test.empty() || fd.train.empty())
            throw InputError("fold " + std::to_string(g) + " is too small to fit");
        fd.X_train = X_(fd.train, Eigen::all);
        fd.X_test = X_(fd.test, Eigen::all);
        fd.solver = GramLasso::from_design(fd.X_train);
    }
}

CvResult CvPlan::run(const VectorXd& y, const std::vector<double>* grid, const LassoOptions& opts) const
{
    if (y.size() != X_.rows()) throw InputError("response length does not match design rows");
    CvResult res;
    res.partition = partition_;
    res.folds = folds_;
    res.lambda_grid = grid ? *grid : lambda_grid(y, X_);
    const std::size_t L = res.lambda_grid.size();
    if (L == 0) throw InputError("empty lambda grid");

    MatrixXd err(static_cast<Index>(L), folds_);
    for (int g = 0; g < folds_; ++g) {
        const auto& fd = fold_data_[static_cast<std::size_t>(g)];
        const VectorXd y_train = y(fd.train);
        const VectorXd y_test = y(fd.test);
        const VectorXd c = fd.X_train.transpose() * y_train / static_cast<double>(fd.train.size());
        PolishCache cache;
        VectorXd warm = VectorXd::Zero(X_.cols());
        for (std::size_t l = 0; l < L; ++l) {
            LassoFit fit = fd.solver.solve(c, res.lambda_grid[l], &warm, &cache, opts);
            warm = std::move(fit.beta);
            err(static_cast<Index>(l), g) = (y_test - fd.X_test * warm).squaredNorm() / static_cast<double>(fd.test.size());
        }
    }

    res.cv_error.resize(L);
    res.cv_se.resize(L);
    const double K = folds_;
    for (std::size_t l = 0; l < L; ++l) {
        const auto row = err.row(static_cast<Index>(l));
        const double mean = row.mean();
        const double var = (row.array() - mean).square().sum() / (K - 1.0);
        res.cv_error[l] = mean;
        res.cv_se[l] = std::sqrt(var / K);
    }
    // Grid is descending, so the first minimizer is the largest lambda.
    std::size_t best = 0;
    for (std::size_t l = 1; l < L; ++l)
        if (res.cv_error[l] < res.cv_error[best]) best = l;
    res.lambda_min = res.lambda_grid[best];
    const double bound = res.cv_error[best] + res.cv_se[best];
    std::size_t one_se = best;
    for (std::size_t l = 0; l <= best; ++l)
        if (res.cv_error[l] <= bound) {
            one_se = l;
            break;
        }
    res.lambda_1se = res.lambda_grid[one_se];
    return res;
}

CvResult cross_validate(const VectorXd& y, const MatrixXd& X, Rng& rng, int folds, const std::vector<double>* grid,
                        const std::vector<int>* partition, const LassoOptions& opts)
{
    std::vector<int> part = partition ? *partition : random_partition(X.rows(), folds, rng);
    return CvPlan(X, std::move(part), folds).run(y, grid, opts);
}

ExogenousDraw exogenous_from_seed(std::uint64_t seed, Index null_dim, Index rows, int folds)
{
    ExogenousDraw draw;
    draw.seed = seed;
    draw.folds = folds;
    Rng sub(seed);
    draw.u_raw = sub.normal_vector(null_dim);
    draw.partition = random_partition(rows, folds, sub);
    return draw;
}

ExogenousDraw draw_exogenous(Index null_dim, Index rows, int folds, Rng& rng)
{
    return exogenous_from_seed(rng.next_u64(), null_dim, rows, folds);
}

double choose_lambda_hat(const NullDecomposition& dec, const ExogenousDraw& draw, const CvPlan& plan, CvRule rule)
{
    const VectorXd y_tilde = reconstruct_shifted(dec, null_direction(dec, draw.u_raw));
    return plan.run(y_tilde).select(rule);
}

double choose_lambda_hat(const NullDecomposition& dec, Rng& rng, int folds, CvRule rule)
{
    const ExogenousDraw draw = draw_exogenous(dec.basis->null_dim(), dec.n(), folds, rng);
    const CvPlan plan(dec.basis->X_mj(), draw.partition, folds);
    return choose_lambda_hat(dec, draw, plan, rule);
}

} // namespace elltest
