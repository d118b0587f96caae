#include "gen1s/vae_head.hpp"

#include <cmath>
#include <numbers>

#include "gen1s/error.hpp"

namespace gen1s {

namespace {

Matrix stack_rows(const Matrix& top, const Matrix& bottom) {
    Matrix out(top.rows() + bottom.rows(), top.cols());
    out.topRows(top.rows()) = top;
    out.bottomRows(bottom.rows()) = bottom;
    return out;
}

Matrix encoder_input(const VaeHead& h, const Matrix& v, const Matrix& c) {
    return h.conditioned ? stack_rows(v, c) : v;
}

Matrix decoder_input(const VaeHead& h, const Matrix& z, const Matrix& c) {
    return h.conditioned ? stack_rows(z, c) : z;
}

void check_batch(const VaeHead& h, const Matrix& v, const Matrix& c) {
    if (v.rows() != h.dim) throw ShapeError("vae: residual dimension mismatch");
    if (h.conditioned && (c.rows() != h.dim || c.cols() != v.cols()))
        throw ShapeError("vae: prototype batch shape mismatch");
}

// log N(v; v_hat, sigma^2 I), per column.
Eigen::RowVectorXd log_likelihood(const VaeHead& h, const Matrix& v, const Matrix& v_hat) {
    const double norm_const =
        0.5 * static_cast<double>(h.dim) * std::log(2.0 * std::numbers::pi * h.decoder_variance);
    Eigen::RowVectorXd sq = (v - v_hat).colwise().squaredNorm();
    return (-sq.array() / (2.0 * h.decoder_variance) - norm_const).matrix();
}

Eigen::RowVectorXd kl_columns(const Matrix& mean, const Matrix& log_var) {
    return (0.5 * (mean.array().square() + log_var.array().exp() - 1.0 - log_var.array()).colwise().sum()).matrix();
}

}  // namespace

void VaeHead::validate() const {
    encoder.validate();
    decoder.validate();
    const Eigen::Index cond = conditioned ? dim : 0;
    if (encoder.input_dim() != dim + cond) throw ShapeError("vae encoder input width mismatch");
    if (encoder.output_dim() != 2 * latent_dim) throw ShapeError("vae encoder output width must be 2L");
    if (decoder.input_dim() != latent_dim + cond) throw ShapeError("vae decoder input width mismatch");
    if (decoder.output_dim() != dim) throw ShapeError("vae decoder output width mismatch");
    if (!(decoder_variance > 0.0)) throw ConfigError("vae decoder variance must be positive");
    if (kl_weight < 0.0) throw ConfigError("vae kl weight must be nonnegative");
    if (inference_samples < 1) throw ConfigError("vae inference samples must be >= 1");
}

Eigen::Index resolve_latent_dim(Eigen::Index dim, Eigen::Index requested) {
    if (requested > 0) return requested;
    return std::max<Eigen::Index>(2, dim / 4);
}

VaeHead make_vae_head(Eigen::Index dim, const VaeConfig& config, Rng& init_rng) {
    if (dim <= 0) throw ConfigError("vae: dim must be positive");
    if (config.hidden_layers < 0 || config.hidden_width <= 0) throw ConfigError("vae: invalid hidden layout");
    VaeHead h;
    h.dim = dim;
    h.latent_dim = resolve_latent_dim(dim, config.latent_dim);
    h.decoder_variance = config.decoder_variance;
    h.conditioned = config.conditioned;
    h.kl_weight = config.kl_weight;
    h.inference_samples = config.inference_samples;
    const Eigen::Index cond = config.conditioned ? dim : 0;

    std::vector<Eigen::Index> enc{dim + cond};
    std::vector<Eigen::Index> dec{h.latent_dim + cond};
    for (int i = 0; i < config.hidden_layers; ++i) {
        enc.push_back(config.hidden_width);
        dec.push_back(config.hidden_width);
    }
    enc.push_back(2 * h.latent_dim);
    dec.push_back(dim);
    h.encoder = make_mlp(enc, config.activation, init_rng);
    h.decoder = make_mlp(dec, config.activation, init_rng);
    h.validate();
    return h;
}

Posterior vae_encode(const VaeHead& head, const Vector& v, const Vector& c) {
    Matrix vm = v, cm = head.conditioned ? Matrix(c) : Matrix(0, 1);
    check_batch(head, vm, cm);
    const Vector out = mlp_apply(head.encoder, Matrix(encoder_input(head, vm, cm))).col(0);
    return {out.head(head.latent_dim), out.tail(head.latent_dim)};
}

double gaussian_kl(const Vector& mean, const Vector& log_var) {
    return 0.5 * (mean.array().square() + log_var.array().exp() - 1.0 - log_var.array()).sum();
}

double gaussian_kl(const Posterior& q) { return gaussian_kl(q.mean, q.log_var); }

VaeLoss vae_loss_batch(const VaeHead& head, const Matrix& residuals, const Matrix& prototypes, const Matrix& eps,
                       bool with_grads) {
    check_batch(head, residuals, prototypes);
    const Eigen::Index n = residuals.cols();
    if (n == 0) throw ShapeError("vae_loss: empty batch");
    if (eps.rows() != head.latent_dim || eps.cols() != n) throw ShapeError("vae_loss: noise shape mismatch");
    const Eigen::Index L = head.latent_dim;

    const MlpTape enc = mlp_forward(head.encoder, encoder_input(head, residuals, prototypes));
    const Matrix mean = enc.output.topRows(L);
    const Matrix log_var = enc.output.bottomRows(L);
    const Matrix sigma = (0.5 * log_var.array()).exp();
    const Matrix z = mean.array() + sigma.array() * eps.array();

    const MlpTape dec = mlp_forward(head.decoder, decoder_input(head, z, prototypes));
    const Eigen::RowVectorXd logp = log_likelihood(head, residuals, dec.output);
    const Eigen::RowVectorXd kl = kl_columns(mean, log_var);

    VaeLoss out;
    const double inv_n = 1.0 / static_cast<double>(n);
    out.reconstruction = -logp.sum() * inv_n;
    out.kl = kl.sum() * inv_n;
    out.loss = out.reconstruction + head.kl_weight * out.kl;
    if (!with_grads) return out;

    // d(mean loss)/d v_hat
    const Matrix d_vhat = (dec.output - residuals) * (inv_n / head.decoder_variance);
    MlpBatchGrad gdec = mlp_backward(head.decoder, dec, d_vhat);
    const Matrix d_z = gdec.input.topRows(L);

    Matrix d_enc(2 * L, n);
    d_enc.topRows(L) = d_z + (head.kl_weight * inv_n) * mean;
    d_enc.bottomRows(L) = (d_z.array() * eps.array() * 0.5 * sigma.array() +
                           (head.kl_weight * inv_n) * 0.5 * (log_var.array().exp() - 1.0))
                              .matrix();
    MlpBatchGrad genc = mlp_backward(head.encoder, enc, d_enc);
    out.grads.encoder = std::move(genc.params);
    out.grads.decoder = std::move(gdec.params);
    return out;
}

VaeLoss vae_loss(const VaeHead& head, const Vector& v, const Vector& c, const Vector& eps) {
    return vae_loss_batch(head, Matrix(v), head.conditioned ? Matrix(c) : Matrix(0, 1), Matrix(eps));
}

VaeLoss vae_loss(const VaeHead& head, const Vector& v, const Vector& c, Rng& rng) {
    const Vector eps = rng.normal_vector(head.latent_dim);
    VaeLoss out = vae_loss(head, v, c, eps);
    if (!std::isfinite(out.loss)) throw NumericError("vae_loss: non-finite loss");
    return out;
}

Vector vae_score_batch(const VaeHead& head, const Matrix& residuals, const Matrix& prototypes,
                       std::span<const Vector> eps) {
    check_batch(head, residuals, prototypes);
    if (eps.empty()) throw ConfigError("vae_score: need at least one noise sample");
    const Eigen::Index L = head.latent_dim;
    const Eigen::Index n = residuals.cols();
    const Matrix enc = mlp_apply(head.encoder, encoder_input(head, residuals, prototypes));
    const Matrix mean = enc.topRows(L);
    const Matrix log_var = enc.bottomRows(L);
    const Matrix sigma = (0.5 * log_var.array()).exp();

    Eigen::RowVectorXd logp_sum = Eigen::RowVectorXd::Zero(n);
    for (const Vector& e : eps) {
        if (e.size() != L) throw ShapeError("vae_score: noise dimension mismatch");
        const Matrix z = mean + (sigma.array().colwise() * e.array()).matrix();
        const Matrix v_hat = mlp_apply(head.decoder, decoder_input(head, z, prototypes));
        logp_sum += log_likelihood(head, residuals, v_hat);
    }
    const Eigen::RowVectorXd kl = kl_columns(mean, log_var);
    return (logp_sum / static_cast<double>(eps.size()) - kl).transpose();
}

double vae_score(const VaeHead& head, const Vector& v, const Vector& c, std::span<const Vector> eps) {
    return vae_score_batch(head, Matrix(v), head.conditioned ? Matrix(c) : Matrix(0, 1), eps)[0];
}

std::vector<Vector> draw_vae_noise(const VaeHead& head, Rng& rng) {
    std::vector<Vector> eps;
    for (int s = 0; s < head.inference_samples; ++s) eps.push_back(rng.normal_vector(head.latent_dim));
    return eps;
}

double vae_score(const VaeHead& head, const Vector& v, const Vector& c, int n_samples, Rng& rng) {
    if (n_samples < 1) throw ConfigError("vae_score: n_samples must be >= 1");
    std::vector<Vector> eps;
    for (int s = 0; s < n_samples; ++s) eps.push_back(rng.normal_vector(head.latent_dim));
    return vae_score(head, v, c, eps);
}

}  // namespace gen1s
