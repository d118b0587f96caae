#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "gen1s/core/types.hpp"

namespace gen1s {

// Seeds for named sub-streams of one root seed (split, init, episodes, inference-noise, ...).
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream);
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index);

class Rng {
public:
    using engine_type = std::mt19937_64;

    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    Rng(std::uint64_t root, std::string_view stream) : engine_(derive_seed(root, stream)) {}

    double normal();
    double uniform();  // [0, 1)
    // Uniform integer in [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
    Vector normal_vector(Eigen::Index dim);
    Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols);

    engine_type& engine() { return engine_; }

private:
    engine_type engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace gen1s
