#pragma once

#include <cstdint>
#include <vector>

#include "gen1s/core/types.hpp"

namespace gen1s {

// Sinusoidal encoding: entries (2i, 2i+1) = (sin(t w_i), cos(t w_i)),
// w_i = 10000^(-i / (dim/2)). Throws ConfigError for odd or non-positive dim.
Vector timestep_embedding(std::int64_t t, Eigen::Index dim);

// Column j holds timestep_embedding(timesteps[j], dim).
Matrix timestep_embedding(const std::vector<std::int64_t>& timesteps, Eigen::Index dim);

}  // namespace gen1s
