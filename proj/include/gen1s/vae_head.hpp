#pragma once

#include <span>
#include <vector>

#include "gen1s/core/mlp.hpp"
#include "gen1s/core/rng.hpp"
#include "gen1s/core/types.hpp"

namespace gen1s {

struct VaeConfig {
    Eigen::Index latent_dim = 0;  // 0: max(2, dim / 4)
    Eigen::Index hidden_width = 128;
    int hidden_layers = 2;
    double decoder_variance = 1.0;
    bool conditioned = true;
    double kl_weight = 1.0;
    int inference_samples = 3;
    Activation activation = Activation::relu;
};

// Conditional VAE over residuals. Encoder maps (v [, c]) to (mean, log-variance) of a diagonal
// Gaussian posterior; decoder maps (z [, c]) to the mean of a fixed-variance Gaussian likelihood.
struct VaeHead {
    Eigen::Index dim = 0;
    Eigen::Index latent_dim = 0;
    MlpParams encoder;
    MlpParams decoder;
    double decoder_variance = 1.0;
    bool conditioned = true;
    double kl_weight = 1.0;
    int inference_samples = 3;

    std::size_t parameter_count() const { return encoder.parameter_count() + decoder.parameter_count(); }
    void validate() const;
};

Eigen::Index resolve_latent_dim(Eigen::Index dim, Eigen::Index requested);

// Hidden widths {hidden_width x hidden_layers} on both networks.
VaeHead make_vae_head(Eigen::Index dim, const VaeConfig& config, Rng& init_rng);

struct Posterior {
    Vector mean;
    Vector log_var;
};

Posterior vae_encode(const VaeHead& head, const Vector& v, const Vector& c);

// KL(N(mean, diag(exp(log_var))) || N(0, I)).
double gaussian_kl(const Vector& mean, const Vector& log_var);
double gaussian_kl(const Posterior& q);

struct VaeGradients {
    MlpParams encoder;
    MlpParams decoder;
};

struct VaeLoss {
    double loss = 0.0;            // reconstruction + kl_weight * kl, averaged over the batch
    double reconstruction = 0.0;  // -log p(v | z, c), batch mean
    double kl = 0.0;              // batch mean
    VaeGradients grads;
};

// Residuals, prototypes and standard-normal noise one column per sample.
// `with_grads = false` skips the backward pass.
VaeLoss vae_loss_batch(const VaeHead& head, const Matrix& residuals, const Matrix& prototypes,
                       const Matrix& eps, bool with_grads = true);

VaeLoss vae_loss(const VaeHead& head, const Vector& v, const Vector& c, const Vector& eps);
VaeLoss vae_loss(const VaeHead& head, const Vector& v, const Vector& c, Rng& rng);

// Monte-Carlo ELBO: mean over eps of log p(v | z_s, c) minus closed-form KL.
double vae_score(const VaeHead& head, const Vector& v, const Vector& c, std::span<const Vector> eps);
double vae_score(const VaeHead& head, const Vector& v, const Vector& c, int n_samples, Rng& rng);

// One score per column of (residuals, prototypes); every column reuses the same eps draws.
Vector vae_score_batch(const VaeHead& head, const Matrix& residuals, const Matrix& prototypes,
                       std::span<const Vector> eps);

std::vector<Vector> draw_vae_noise(const VaeHead& head, Rng& rng);

}  // namespace gen1s
