#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "gen1s/core/rng.hpp"
#include "gen1s/core/types.hpp"

namespace gen1s {

enum class Activation { relu, gelu, tanh };

Activation parse_activation(std::string_view name);
const char* to_string(Activation a);

struct DenseLayer {
    Matrix weight;  // out x in
    Vector bias;    // out
};

// Fully-connected network; `activation` sits between layers, never after the last one.
struct MlpParams {
    std::vector<DenseLayer> layers;
    Activation activation = Activation::relu;

    Eigen::Index input_dim() const;
    Eigen::Index output_dim() const;
    std::size_t parameter_count() const;
    // Throws ShapeError unless consecutive layers chain.
    void validate() const;
};

// Same layer shapes as `p`, every entry zero.
MlpParams zeros_like(const MlpParams& p);

// widths = {in, hidden..., out}. Glorot-uniform weights, zero biases.
MlpParams make_mlp(std::span<const Eigen::Index> widths, Activation activation, Rng& rng);

// Sum over layers of out*in + out.
std::size_t mlp_parameter_count(std::span<const Eigen::Index> widths);

void zero_final_layer(MlpParams& p);

Vector mlp_apply(const MlpParams& p, const Vector& x);
// Batched forward pass, one sample per column.
Matrix mlp_apply(const MlpParams& p, const Matrix& inputs);

// Intermediate values of a batched forward pass, kept for the backward pass.
struct MlpTape {
    std::vector<Matrix> inputs;       // input to each layer
    std::vector<Matrix> preactivations;  // W a + b for each layer
    Matrix output;
};

MlpTape mlp_forward(const MlpParams& p, const Matrix& inputs);

struct MlpBatchGrad {
    MlpParams params;  // gradients summed over the batch
    Matrix input;      // per-sample input gradients
};

// Gradients of sum_j upstream(:,j) . f(inputs(:,j)).
MlpBatchGrad mlp_backward(const MlpParams& p, const MlpTape& tape, const Matrix& upstream);

struct MlpGrad {
    MlpParams params;
    Vector input;
};

MlpGrad mlp_grad(const MlpParams& p, const Vector& x, const Vector& upstream);

// a += scale * b, layer by layer.
void accumulate(MlpParams& a, const MlpParams& b, double scale = 1.0);

}  // namespace gen1s
