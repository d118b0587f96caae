#include "gen1s/core/adam.hpp"

#include <cmath>

#include "gen1s/error.hpp"

namespace gen1s {

AdamState::AdamState(const MlpParams& params, AdamConfig cfg)
    : first_moment(zeros_like(params)), second_moment(zeros_like(params)), config(cfg) {}

namespace {

bool same_shape(const MlpParams& a, const MlpParams& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        if (a.layers[i].weight.rows() != b.layers[i].weight.rows() ||
            a.layers[i].weight.cols() != b.layers[i].weight.cols() ||
            a.layers[i].bias.size() != b.layers[i].bias.size())
            return false;
    }
    return true;
}

template <typename Param, typename Moment>
void step_block(Param& p, Moment& m, Moment& v, const Param& g, const AdamConfig& c, double corr1,
                double corr2) {
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
    p.array() -= c.learning_rate * (m.array() / corr1) / ((v.array() / corr2).sqrt() + c.epsilon);
}

}  // namespace

void adam_update(AdamState& state, MlpParams& params, const MlpParams& grads) {
    if (!same_shape(params, grads) || !same_shape(params, state.first_moment) ||
        !same_shape(params, state.second_moment))
        throw ShapeError("adam_update: parameter, gradient and moment shapes differ");
    state.step += 1;
    const auto& c = state.config;
    const double corr1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double corr2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        step_block(params.layers[i].weight, state.first_moment.layers[i].weight,
                   state.second_moment.layers[i].weight, grads.layers[i].weight, c, corr1, corr2);
        step_block(params.layers[i].bias, state.first_moment.layers[i].bias,
                   state.second_moment.layers[i].bias, grads.layers[i].bias, c, corr1, corr2);
    }
}

}  // namespace gen1s
