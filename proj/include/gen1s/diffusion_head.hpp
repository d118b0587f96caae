#pragma once

#include <cstdint>
#include <vector>

#include "gen1s/core/mlp.hpp"
#include "gen1s/core/rng.hpp"
#include "gen1s/core/types.hpp"

namespace gen1s {

// Per-step variances beta_t for t = 1..T, stored at index t - 1.
struct NoiseSchedule {
    std::int64_t T = 0;
    std::vector<double> beta;
    std::vector<double> alpha;
    std::vector<double> alpha_bar;

    double beta_at(std::int64_t t) const { return beta.at(static_cast<std::size_t>(t - 1)); }
    double alpha_at(std::int64_t t) const { return alpha.at(static_cast<std::size_t>(t - 1)); }
    double alpha_bar_at(std::int64_t t) const { return alpha_bar.at(static_cast<std::size_t>(t - 1)); }
    void check_timestep(std::int64_t t) const;
};

// Linear interpolation from beta_start to beta_end. alpha_bar is accumulated in log space.
NoiseSchedule build_schedule(std::int64_t T, double beta_start, double beta_end);
NoiseSchedule schedule_from_betas(std::vector<double> betas);

// sqrt(alpha_bar_t) v0 + sqrt(1 - alpha_bar_t) eps.
Vector forward_noise(const NoiseSchedule& s, const Vector& v0, std::int64_t t, const Vector& eps);

struct DiffusionConfig {
    std::int64_t T = 10000;
    double beta_start = 1e-5;
    double beta_end = 2e-3;
    Eigen::Index hidden_width = 128;
    int hidden_layers = 3;
    Eigen::Index time_embed_dim = 32;
    Activation activation = Activation::gelu;
    bool conditioned = true;
    std::vector<std::int64_t> inference_timesteps{5000, 100};
    int noise_draws_per_timestep = 1;
    // Residual RMS after rescaling; <= 0 keeps raw residuals.
    double target_rms = 0.03;
};

// Noise predictor eps_theta(v~, c, tau). Residuals are multiplied by residual_scale before
// corruption, and v~ is preconditioned by 1 / sqrt(alpha_bar data_variance + 1 - alpha_bar).
struct DiffusionHead {
    Eigen::Index dim = 0;
    Eigen::Index time_embed_dim = 32;
    MlpParams noise_net;
    NoiseSchedule schedule;
    double beta_start = 0.0;
    double beta_end = 0.0;
    bool conditioned = true;
    std::vector<std::int64_t> inference_timesteps;
    int noise_draws_per_timestep = 1;
    double target_rms = 0.03;
    double residual_scale = 1.0;
    double data_variance = 1.0;

    std::size_t parameter_count() const { return noise_net.parameter_count(); }
    void validate() const;
    double input_scale(std::int64_t t) const;
};

DiffusionHead make_diffusion_head(Eigen::Index dim, const DiffusionConfig& config, Rng& init_rng);

// Sets residual_scale and data_variance from the RMS of unscaled training residuals.
void calibrate_residual_scale(DiffusionHead& head, double residual_rms);

struct DiffusionLoss {
    double loss = 0.0;  // batch mean of ||eps - eps_hat||^2
    MlpParams grads;
};

// Columns are samples; residuals unscaled. `timesteps` has one entry per column.
DiffusionLoss ddpm_loss_batch(const DiffusionHead& head, const Matrix& residuals, const Matrix& prototypes,
                              const std::vector<std::int64_t>& timesteps, const Matrix& eps,
                              bool with_grads = true);

DiffusionLoss ddpm_loss_at(const DiffusionHead& head, const Vector& v0, const Vector& c, std::int64_t t,
                           const Vector& eps);
// Draws tau uniform in [1, T] and eps ~ N(0, I).
DiffusionLoss ddpm_loss(const DiffusionHead& head, const Vector& v0, const Vector& c, Rng& rng);

// Predicted noise for one (residual, prototype, timestep); residual unscaled.
Vector predict_noise(const DiffusionHead& head, const Vector& v0, const Vector& c, std::int64_t t,
                     const Vector& eps);

// (tau, eps) pairs for one query, shared across every candidate class.
struct InferenceNoise {
    std::vector<std::int64_t> timesteps;
    std::vector<Vector> eps;
};

InferenceNoise draw_inference_noise(const DiffusionHead& head, Rng& rng);

// One score per column: -mean over (tau, eps) of ||eps - eps_hat||^2.
Vector diffusion_score_batch(const DiffusionHead& head, const Matrix& residuals, const Matrix& prototypes,
                             const InferenceNoise& noise);
double diffusion_score(const DiffusionHead& head, const Vector& v, const Vector& c, const InferenceNoise& noise);
double diffusion_score(const DiffusionHead& head, const Vector& v, const Vector& c, Rng& rng);

// Ancestral sampling through the full reverse chain. Returns unscaled residuals, one per column.
Matrix ddpm_sample(const DiffusionHead& head, const Vector& c, Eigen::Index n, Rng& rng);

}  // namespace gen1s
