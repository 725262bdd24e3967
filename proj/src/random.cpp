#include "elltest/random.hpp"

#include <algorithm>
#include <numeric>

namespace elltest {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

Rng Rng::substream(std::uint64_t seed, std::uint64_t index)
{
    return Rng(splitmix64(seed ^ splitmix64(index + 0x632be59bd9b4e019ULL)));
}

double Rng::uniform() { return uniform_(engine_); }

double Rng::normal() { return normal_(engine_); }

double Rng::student_t(double nu)
{
    std::student_t_distribution<double> dist(nu);
    return dist(engine_);
}

double Rng::gamma(double shape)
{
    std::gamma_distribution<double> dist(shape, 1.0);
    return dist(engine_);
}

Eigen::VectorXd Rng::normal_vector(Eigen::Index n)
{
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
    return v;
}

std::vector<Eigen::Index> Rng::permutation(Eigen::Index n)
{
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    // Fisher-Yates driven by our own uniform draws so the order is stable
    // across standard library implementations.
    for (Eigen::Index i = n - 1; i > 0; --i) {
        auto k = static_cast<Eigen::Index>(next_u64() % static_cast<std::uint64_t>(i + 1));
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(k)]);
    }
    return perm;
}

} // namespace elltest
