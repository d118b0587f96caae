#pragma once

#include <cstdint>

#include "gen1s/core/mlp.hpp"

namespace gen1s {

struct AdamConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Moment accumulators for one MlpParams.
struct AdamState {
    MlpParams first_moment;
    MlpParams second_moment;
    std::int64_t step = 0;
    AdamConfig config;

    AdamState() = default;
    AdamState(const MlpParams& params, AdamConfig cfg);
};

// One bias-corrected Adam step. Throws ShapeError when shapes disagree.
void adam_update(AdamState& state, MlpParams& params, const MlpParams& grads);

}  // namespace gen1s
