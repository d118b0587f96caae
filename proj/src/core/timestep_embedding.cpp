#include "gen1s/core/timestep_embedding.hpp"

#include <cmath>

#include "gen1s/error.hpp"

namespace gen1s {

namespace {

void check_dim(Eigen::Index dim) {
    if (dim <= 0 || dim % 2 != 0)
        throw ConfigError("timestep_embedding: dim must be positive and even, got " + std::to_string(dim));
}

void fill(double t, Eigen::Index dim, double* out) {
    const Eigen::Index half = dim / 2;
    for (Eigen::Index i = 0; i < half; ++i) {
        const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(half));
        const double angle = t * freq;
        out[2 * i] = std::sin(angle);
        out[2 * i + 1] = std::cos(angle);
    }
}

}  // namespace

Vector timestep_embedding(std::int64_t t, Eigen::Index dim) {
    check_dim(dim);
    if (t < 0) throw ConfigError("timestep_embedding: negative timestep");
    Vector v(dim);
    fill(static_cast<double>(t), dim, v.data());
    return v;
}

Matrix timestep_embedding(const std::vector<std::int64_t>& timesteps, Eigen::Index dim) {
    check_dim(dim);
    Matrix m(dim, static_cast<Eigen::Index>(timesteps.size()));
    for (std::size_t j = 0; j < timesteps.size(); ++j) {
        if (timesteps[j] < 0) throw ConfigError("timestep_embedding: negative timestep");
        fill(static_cast<double>(timesteps[j]), dim, m.col(static_cast<Eigen::Index>(j)).data());
    }
    return m;
}

}  // namespace gen1s
