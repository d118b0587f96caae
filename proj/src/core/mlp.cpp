#include "gen1s/core/mlp.hpp"

#include <cmath>
#include <string>

#include "gen1s/error.hpp"

namespace gen1s {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

void activate_inplace(Matrix& z, Activation a) {
    switch (a) {
        case Activation::relu: z = z.cwiseMax(0.0); break;
        case Activation::tanh: z = z.array().tanh(); break;
        case Activation::gelu:
            z = z.unaryExpr([](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); });
            break;
    }
}

// Multiplies g by the activation derivative evaluated at the preactivation z.
void scale_by_derivative(Matrix& g, const Matrix& z, Activation a) {
    switch (a) {
        case Activation::relu:
            g = g.cwiseProduct(z.unaryExpr([](double x) { return x > 0.0 ? 1.0 : 0.0; }));
            break;
        case Activation::tanh:
            g = g.cwiseProduct(z.unaryExpr([](double x) {
                const double t = std::tanh(x);
                return 1.0 - t * t;
            }));
            break;
        case Activation::gelu:
            g = g.cwiseProduct(z.unaryExpr([](double x) {
                const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
                const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
                return cdf + x * pdf;
            }));
            break;
    }
}

}  // namespace

Activation parse_activation(std::string_view name) {
    if (name == "relu") return Activation::relu;
    if (name == "gelu") return Activation::gelu;
    if (name == "tanh") return Activation::tanh;
    throw ConfigError("unknown activation '" + std::string(name) + "'");
}

const char* to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::gelu: return "gelu";
        case Activation::tanh: return "tanh";
    }
    return "relu";
}

Eigen::Index MlpParams::input_dim() const {
    if (layers.empty()) throw ShapeError("mlp has no layers");
    return layers.front().weight.cols();
}

Eigen::Index MlpParams::output_dim() const {
    if (layers.empty()) throw ShapeError("mlp has no layers");
    return layers.back().weight.rows();
}

std::size_t MlpParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
}

void MlpParams::validate() const {
    if (layers.empty()) throw ShapeError("mlp has no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].bias.size() != layers[i].weight.rows())
            throw ShapeError("layer " + std::to_string(i) + ": bias size does not match weight rows");
        if (i > 0 && layers[i].weight.cols() != layers[i - 1].weight.rows())
            throw ShapeError("layer " + std::to_string(i) + ": input width does not chain");
    }
}

MlpParams zeros_like(const MlpParams& p) {
    MlpParams z;
    z.activation = p.activation;
    z.layers.reserve(p.layers.size());
    for (const auto& l : p.layers)
        z.layers.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
    return z;
}

MlpParams make_mlp(std::span<const Eigen::Index> widths, Activation activation, Rng& rng) {
    if (widths.size() < 2) throw ConfigError("make_mlp: need at least input and output width");
    MlpParams p;
    p.activation = activation;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        const Eigen::Index in = widths[i], out = widths[i + 1];
        if (in <= 0 || out <= 0) throw ConfigError("make_mlp: widths must be positive");
        const double a = std::sqrt(6.0 / static_cast<double>(in + out));
        DenseLayer layer{Matrix(out, in), Vector::Zero(out)};
        for (Eigen::Index c = 0; c < in; ++c)
            for (Eigen::Index r = 0; r < out; ++r) layer.weight(r, c) = a * (2.0 * rng.uniform() - 1.0);
        p.layers.push_back(std::move(layer));
    }
    return p;
}

std::size_t mlp_parameter_count(std::span<const Eigen::Index> widths) {
    std::size_t n = 0;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i)
        n += static_cast<std::size_t>(widths[i + 1] * widths[i] + widths[i + 1]);
    return n;
}

void zero_final_layer(MlpParams& p) {
    if (p.layers.empty()) return;
    p.layers.back().weight.setZero();
    p.layers.back().bias.setZero();
}

Matrix mlp_apply(const MlpParams& p, const Matrix& inputs) {
    if (inputs.rows() != p.input_dim())
        throw ShapeError("mlp_apply: input width " + std::to_string(inputs.rows()) + ", expected " +
                         std::to_string(p.input_dim()));
    Matrix a = inputs;
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
        const auto& l = p.layers[i];
        Matrix z = l.weight * a;
        z.colwise() += l.bias;
        if (i + 1 < p.layers.size()) activate_inplace(z, p.activation);
        a = std::move(z);
    }
    return a;
}

Vector mlp_apply(const MlpParams& p, const Vector& x) {
    Matrix in = x;
    return mlp_apply(p, in).col(0);
}

MlpTape mlp_forward(const MlpParams& p, const Matrix& inputs) {
    if (inputs.rows() != p.input_dim())
        throw ShapeError("mlp_forward: input width " + std::to_string(inputs.rows()) + ", expected " +
                         std::to_string(p.input_dim()));
    MlpTape tape;
    tape.inputs.reserve(p.layers.size());
    tape.preactivations.reserve(p.layers.size());
    Matrix a = inputs;
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
        const auto& l = p.layers[i];
        Matrix z = l.weight * a;
        z.colwise() += l.bias;
        tape.inputs.push_back(std::move(a));
        tape.preactivations.push_back(z);
        if (i + 1 < p.layers.size()) activate_inplace(z, p.activation);
        a = std::move(z);
    }
    tape.output = std::move(a);
    return tape;
}

MlpBatchGrad mlp_backward(const MlpParams& p, const MlpTape& tape, const Matrix& upstream) {
    if (upstream.rows() != p.output_dim() || upstream.cols() != tape.output.cols())
        throw ShapeError("mlp_backward: upstream shape does not match output");
    MlpBatchGrad out{zeros_like(p), Matrix()};
    Matrix g = upstream;
    for (std::size_t k = p.layers.size(); k-- > 0;) {
        out.params.layers[k].weight.noalias() = g * tape.inputs[k].transpose();
        out.params.layers[k].bias = g.rowwise().sum();
        Matrix next = p.layers[k].weight.transpose() * g;
        if (k > 0) scale_by_derivative(next, tape.preactivations[k - 1], p.activation);
        g = std::move(next);
    }
    out.input = std::move(g);
    return out;
}

MlpGrad mlp_grad(const MlpParams& p, const Vector& x, const Vector& upstream) {
    if (upstream.size() != p.output_dim()) throw ShapeError("mlp_grad: upstream width mismatch");
    Matrix in = x;
    const MlpTape tape = mlp_forward(p, in);
    Matrix up = upstream;
    MlpBatchGrad g = mlp_backward(p, tape, up);
    return {std::move(g.params), g.input.col(0)};
}

void accumulate(MlpParams& a, const MlpParams& b, double scale) {
    if (a.layers.size() != b.layers.size()) throw ShapeError("accumulate: layer count mismatch");
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        if (a.layers[i].weight.rows() != b.layers[i].weight.rows() ||
            a.layers[i].weight.cols() != b.layers[i].weight.cols())
            throw ShapeError("accumulate: layer shape mismatch");
        a.layers[i].weight += scale * b.layers[i].weight;
        a.layers[i].bias += scale * b.layers[i].bias;
    }
}

}  // namespace gen1s
