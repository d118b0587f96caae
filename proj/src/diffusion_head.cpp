#include "gen1s/diffusion_head.hpp"

#include <cmath>

#include "gen1s/core/timestep_embedding.hpp"
#include "gen1s/error.hpp"

namespace gen1s {

void NoiseSchedule::check_timestep(std::int64_t t) const {
    if (t < 1 || t > T) throw ConfigError("timestep " + std::to_string(t) + " outside [1, " + std::to_string(T) + "]");
}

NoiseSchedule schedule_from_betas(std::vector<double> betas) {
    if (betas.empty()) throw ConfigError("noise schedule needs T >= 1");
    NoiseSchedule s;
    s.T = static_cast<std::int64_t>(betas.size());
    double log_bar = 0.0;
    double prev = 0.0;
    for (double b : betas) {
        if (!(b > 0.0 && b < 1.0)) throw ConfigError("beta must lie in (0, 1)");
        if (b < prev) throw ConfigError("beta must be nondecreasing");
        prev = b;
        log_bar += std::log1p(-b);
        s.alpha.push_back(1.0 - b);
        s.alpha_bar.push_back(std::exp(log_bar));
    }
    s.beta = std::move(betas);
    return s;
}

NoiseSchedule build_schedule(std::int64_t T, double beta_start, double beta_end) {
    if (T < 1) throw ConfigError("noise schedule needs T >= 1");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
        throw ConfigError("need 0 < beta_start <= beta_end < 1");
    std::vector<double> betas(static_cast<std::size_t>(T));
    for (std::int64_t i = 0; i < T; ++i) {
        const double frac = T == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(T - 1);
        betas[static_cast<std::size_t>(i)] = beta_start + (beta_end - beta_start) * frac;
    }
    return schedule_from_betas(std::move(betas));
}

Vector forward_noise(const NoiseSchedule& s, const Vector& v0, std::int64_t t, const Vector& eps) {
    s.check_timestep(t);
    require_same_dim(v0, eps, "forward_noise");
    const double ab = s.alpha_bar_at(t);
    return std::sqrt(ab) * v0 + std::sqrt(1.0 - ab) * eps;
}

void DiffusionHead::validate() const {
    noise_net.validate();
    const Eigen::Index cond = conditioned ? dim : 0;
    if (noise_net.input_dim() != dim + cond + time_embed_dim) throw ShapeError("noise net input width mismatch");
    if (noise_net.output_dim() != dim) throw ShapeError("noise net output width mismatch");
    if (schedule.T < 1) throw ConfigError("diffusion head has no schedule");
    if (inference_timesteps.empty()) throw ConfigError("inference timesteps must be nonempty");
    for (auto t : inference_timesteps) schedule.check_timestep(t);
    if (noise_draws_per_timestep < 1) throw ConfigError("noise draws per timestep must be >= 1");
    if (!(residual_scale > 0.0) || !(data_variance > 0.0)) throw ConfigError("invalid residual scaling");
}

double DiffusionHead::input_scale(std::int64_t t) const {
    const double ab = schedule.alpha_bar_at(t);
    return 1.0 / std::sqrt(ab * data_variance + 1.0 - ab);
}

DiffusionHead make_diffusion_head(Eigen::Index dim, const DiffusionConfig& config, Rng& init_rng) {
    if (dim <= 0) throw ConfigError("diffusion: dim must be positive");
    if (config.hidden_layers < 0 || config.hidden_width <= 0) throw ConfigError("diffusion: invalid hidden layout");
    DiffusionHead h;
    h.dim = dim;
    h.time_embed_dim = config.time_embed_dim;
    h.schedule = build_schedule(config.T, config.beta_start, config.beta_end);
    h.beta_start = config.beta_start;
    h.beta_end = config.beta_end;
    h.conditioned = config.conditioned;
    h.inference_timesteps = config.inference_timesteps;
    h.noise_draws_per_timestep = config.noise_draws_per_timestep;
    h.target_rms = config.target_rms;
    timestep_embedding(0, config.time_embed_dim);  // rejects odd widths up front

    std::vector<Eigen::Index> widths{dim + (config.conditioned ? dim : 0) + config.time_embed_dim};
    for (int i = 0; i < config.hidden_layers; ++i) widths.push_back(config.hidden_width);
    widths.push_back(dim);
    h.noise_net = make_mlp(widths, config.activation, init_rng);
    h.validate();
    return h;
}

void calibrate_residual_scale(DiffusionHead& head, double residual_rms) {
    if (!std::isfinite(residual_rms) || residual_rms < 0.0) throw NumericError("residual RMS is not finite");
    if (head.target_rms > 0.0 && residual_rms > 0.0) {
        head.residual_scale = head.target_rms / residual_rms;
        head.data_variance = head.target_rms * head.target_rms;
    } else {
        head.residual_scale = 1.0;
        head.data_variance = residual_rms > 0.0 ? residual_rms * residual_rms : 1.0;
    }
}

namespace {

void check_batch(const DiffusionHead& h, const Matrix& v, const Matrix& c) {
    if (v.rows() != h.dim) throw ShapeError("diffusion: residual dimension mismatch");
    if (h.conditioned && (c.rows() != h.dim || c.cols() != v.cols()))
        throw ShapeError("diffusion: prototype batch shape mismatch");
}

// Network input columns for corrupted, scaled residuals.
Matrix net_input(const DiffusionHead& h, const Matrix& v_tilde, const Matrix& c,
                 const std::vector<std::int64_t>& timesteps) {
    const Eigen::Index n = v_tilde.cols();
    const Eigen::Index cond = h.conditioned ? h.dim : 0;
    Matrix in(h.dim + cond + h.time_embed_dim, n);
    for (Eigen::Index j = 0; j < n; ++j) in.col(j).head(h.dim) = h.input_scale(timesteps[j]) * v_tilde.col(j);
    if (h.conditioned) in.middleRows(h.dim, h.dim) = c;
    in.bottomRows(h.time_embed_dim) = timestep_embedding(timesteps, h.time_embed_dim);
    return in;
}

Matrix corrupt(const DiffusionHead& h, const Matrix& v0, const std::vector<std::int64_t>& timesteps,
               const Matrix& eps) {
    Matrix out(v0.rows(), v0.cols());
    for (Eigen::Index j = 0; j < v0.cols(); ++j) {
        const std::int64_t t = timesteps[j];
        h.schedule.check_timestep(t);
        const double ab = h.schedule.alpha_bar_at(t);
        out.col(j) = std::sqrt(ab) * h.residual_scale * v0.col(j) + std::sqrt(1.0 - ab) * eps.col(j);
    }
    return out;
}

}  // namespace

DiffusionLoss ddpm_loss_batch(const DiffusionHead& head, const Matrix& residuals, const Matrix& prototypes,
                              const std::vector<std::int64_t>& timesteps, const Matrix& eps, bool with_grads) {
    check_batch(head, residuals, prototypes);
    const Eigen::Index n = residuals.cols();
    if (n == 0) throw ShapeError("ddpm_loss: empty batch");
    if (static_cast<Eigen::Index>(timesteps.size()) != n) throw ShapeError("ddpm_loss: one timestep per sample");
    if (eps.rows() != head.dim || eps.cols() != n) throw ShapeError("ddpm_loss: noise shape mismatch");

    const Matrix v_tilde = corrupt(head, residuals, timesteps, eps);
    const MlpTape tape = mlp_forward(head.noise_net, net_input(head, v_tilde, prototypes, timesteps));
    const Matrix diff = tape.output - eps;
    const double inv_n = 1.0 / static_cast<double>(n);

    DiffusionLoss out;
    out.loss = diff.squaredNorm() * inv_n;
    if (with_grads) out.grads = std::move(mlp_backward(head.noise_net, tape, (2.0 * inv_n) * diff).params);
    return out;
}

DiffusionLoss ddpm_loss_at(const DiffusionHead& head, const Vector& v0, const Vector& c, std::int64_t t,
                           const Vector& eps) {
    return ddpm_loss_batch(head, Matrix(v0), head.conditioned ? Matrix(c) : Matrix(0, 1), {t}, Matrix(eps));
}

DiffusionLoss ddpm_loss(const DiffusionHead& head, const Vector& v0, const Vector& c, Rng& rng) {
    const std::int64_t t = rng.uniform_int(1, head.schedule.T);
    const Vector eps = rng.normal_vector(head.dim);
    DiffusionLoss out = ddpm_loss_at(head, v0, c, t, eps);
    if (!std::isfinite(out.loss)) throw NumericError("ddpm_loss: non-finite loss");
    return out;
}

Vector predict_noise(const DiffusionHead& head, const Vector& v0, const Vector& c, std::int64_t t,
                     const Vector& eps) {
    const Matrix cm = head.conditioned ? Matrix(c) : Matrix(0, 1);
    check_batch(head, Matrix(v0), cm);
    const std::vector<std::int64_t> ts{t};
    const Matrix v_tilde = corrupt(head, Matrix(v0), ts, Matrix(eps));
    return mlp_apply(head.noise_net, net_input(head, v_tilde, cm, ts)).col(0);
}

InferenceNoise draw_inference_noise(const DiffusionHead& head, Rng& rng) {
    InferenceNoise noise;
    for (auto t : head.inference_timesteps) {
        for (int d = 0; d < head.noise_draws_per_timestep; ++d) {
            noise.timesteps.push_back(t);
            noise.eps.push_back(rng.normal_vector(head.dim));
        }
    }
    return noise;
}

Vector diffusion_score_batch(const DiffusionHead& head, const Matrix& residuals, const Matrix& prototypes,
                             const InferenceNoise& noise) {
    check_batch(head, residuals, prototypes);
    if (noise.eps.empty() || noise.eps.size() != noise.timesteps.size())
        throw ConfigError("diffusion_score: inference noise is empty or inconsistent");
    const Eigen::Index n = residuals.cols();
    Vector total = Vector::Zero(n);
    for (std::size_t j = 0; j < noise.eps.size(); ++j) {
        if (noise.eps[j].size() != head.dim) throw ShapeError("diffusion_score: noise dimension mismatch");
        const std::vector<std::int64_t> ts(static_cast<std::size_t>(n), noise.timesteps[j]);
        const Matrix eps = noise.eps[j].replicate(1, n);
        const Matrix v_tilde = corrupt(head, residuals, ts, eps);
        const Matrix eps_hat = mlp_apply(head.noise_net, net_input(head, v_tilde, prototypes, ts));
        total += (eps_hat - eps).colwise().squaredNorm().transpose();
    }
    return -total / static_cast<double>(noise.eps.size());
}

double diffusion_score(const DiffusionHead& head, const Vector& v, const Vector& c, const InferenceNoise& noise) {
    return diffusion_score_batch(head, Matrix(v), head.conditioned ? Matrix(c) : Matrix(0, 1), noise)[0];
}

double diffusion_score(const DiffusionHead& head, const Vector& v, const Vector& c, Rng& rng) {
    return diffusion_score(head, v, c, draw_inference_noise(head, rng));
}

Matrix ddpm_sample(const DiffusionHead& head, const Vector& c, Eigen::Index n, Rng& rng) {
    if (n < 1) throw ConfigError("ddpm_sample: n must be >= 1");
    const Matrix cm = head.conditioned ? Matrix(c.replicate(1, n)) : Matrix(0, n);
    if (head.conditioned && c.size() != head.dim) throw ShapeError("ddpm_sample: prototype dimension mismatch");
    Matrix x = rng.normal_matrix(head.dim, n);
    for (std::int64_t t = head.schedule.T; t >= 1; --t) {
        const std::vector<std::int64_t> ts(static_cast<std::size_t>(n), t);
        const Matrix eps_hat = mlp_apply(head.noise_net, net_input(head, x, cm, ts));
        const double beta = head.schedule.beta_at(t);
        const double ab = head.schedule.alpha_bar_at(t);
        x = (x - (beta / std::sqrt(1.0 - ab)) * eps_hat) / std::sqrt(head.schedule.alpha_at(t));
        if (t > 1) {
            const double ab_prev = head.schedule.alpha_bar_at(t - 1);
            const double var = beta * (1.0 - ab_prev) / (1.0 - ab);
            x += std::sqrt(var) * rng.normal_matrix(head.dim, n);
        }
    }
    return x / head.residual_scale;
}

}  // namespace gen1s
