#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace elltest {

std::uint64_t splitmix64(std::uint64_t x);

// Seeded stream. Substreams are derived by hashing (seed, index) so that
// replicate i sees the same numbers regardless of thread scheduling.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    static Rng substream(std::uint64_t seed, std::uint64_t index);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t next_u64() { return engine_(); }

    double uniform();
    double normal();
    double student_t(double nu);
    double gamma(double shape);

    Eigen::VectorXd normal_vector(Eigen::Index n);
    // Uniform random permutation of 0..n-1.
    std::vector<Eigen::Index> permutation(Eigen::Index n);

    std::mt19937_64& engine() { return engine_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

} // namespace elltest
