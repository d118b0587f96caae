#include <cmath>

#include "doctest.h"
#include "gradcheck.hpp"

#include "gen1s/core/timestep_embedding.hpp"
#include "gen1s/diffusion_head.hpp"
#include "gen1s/error.hpp"

using namespace gen1s;
using testing::numeric_gradient;
using testing::relative_error;

namespace {

DiffusionHead small_head(bool conditioned, Activation act = Activation::gelu, std::uint64_t seed = 4) {
    DiffusionConfig cfg;
    cfg.T = 50;
    cfg.beta_start = 1e-3;
    cfg.beta_end = 0.2;
    cfg.hidden_width = 10;
    cfg.hidden_layers = 2;
    cfg.time_embed_dim = 6;
    cfg.activation = act;
    cfg.conditioned = conditioned;
    cfg.inference_timesteps = {40, 3};
    Rng rng(seed);
    DiffusionHead h = make_diffusion_head(5, cfg, rng);
    Rng bias_rng(seed + 100);
    for (auto& l : h.noise_net.layers) l.bias = 0.1 * bias_rng.normal_vector(l.bias.size());
    return h;
}

}  // namespace

TEST_CASE("schedule arithmetic") {
    const NoiseSchedule one = build_schedule(1, 0.5, 0.9);
    CHECK(one.beta_at(1) == 0.5);
    CHECK(one.alpha_bar_at(1) == doctest::Approx(0.5));

    const NoiseSchedule two = schedule_from_betas({0.1, 0.2});
    CHECK(two.alpha_bar_at(1) == doctest::Approx(0.9));
    CHECK(two.alpha_bar_at(2) == doctest::Approx(0.72));

    const NoiseSchedule lin = build_schedule(5, 0.1, 0.5);
    CHECK(lin.beta_at(3) == doctest::Approx(0.3));
    CHECK(lin.beta_at(5) == doctest::Approx(0.5));

    CHECK_THROWS_AS(schedule_from_betas({0.2, 0.1}), ConfigError);
    CHECK_THROWS_AS(schedule_from_betas({1.0}), ConfigError);
    CHECK_THROWS_AS(build_schedule(0, 0.1, 0.2), ConfigError);
    CHECK_THROWS_AS(lin.check_timestep(0), ConfigError);
    CHECK_THROWS_AS(lin.check_timestep(6), ConfigError);
}

TEST_CASE("default schedule is monotone and ends near pure noise") {
    const NoiseSchedule s = build_schedule(10000, 1e-5, 2e-3);
    // Independent product in plain double arithmetic.
    double prod = 1.0;
    for (std::int64_t t = 1; t <= s.T; ++t) {
        prod *= 1.0 - (1e-5 + (2e-3 - 1e-5) * static_cast<double>(t - 1) / 9999.0);
        if (t > 1) CHECK(s.alpha_bar_at(t) < s.alpha_bar_at(t - 1));
    }
    CHECK(s.alpha_bar_at(10000) == doctest::Approx(prod).epsilon(1e-9));
    CHECK(s.alpha_bar_at(10000) < 1e-4);
    CHECK(s.alpha_bar_at(1) == doctest::Approx(1.0 - 1e-5));
}

TEST_CASE("forward corruption statistics") {
    const NoiseSchedule s = build_schedule(100, 1e-3, 0.05);
    const std::int64_t t = 60;
    const double ab = s.alpha_bar_at(t);
    const Vector v0 = (Vector(2) << 1.5, -0.5).finished();
    Rng rng(7);
    const int n = 20000;
    Vector sum = Vector::Zero(2), sq = Vector::Zero(2);
    for (int i = 0; i < n; ++i) {
        const Vector x = forward_noise(s, v0, t, rng.normal_vector(2));
        sum += x;
        sq += x.cwiseProduct(x);
    }
    const Vector mean = sum / n;
    const Vector var = sq / n - mean.cwiseProduct(mean);
    const double se_mean = std::sqrt((1.0 - ab) / n);
    const double se_var = (1.0 - ab) * std::sqrt(2.0 / n);
    for (int i = 0; i < 2; ++i) {
        CHECK(std::abs(mean[i] - std::sqrt(ab) * v0[i]) < 3 * se_mean);
        CHECK(std::abs(var[i] - (1.0 - ab)) < 3 * se_var);
    }
}

TEST_CASE("variance is preserved for unit-variance data") {
    const NoiseSchedule s = build_schedule(1000, 1e-4, 0.02);
    for (std::int64_t t : {1, 10, 500, 1000}) {
        const double ab = s.alpha_bar_at(t);
        CHECK(ab + (1.0 - ab) == doctest::Approx(1.0));
        CHECK(std::sqrt(ab) * std::sqrt(ab) + std::sqrt(1.0 - ab) * std::sqrt(1.0 - ab) == doctest::Approx(1.0));
    }
}

TEST_CASE("desk and wide parameter counts") {
    Rng rng(0);
    CHECK(make_diffusion_head(16, DiffusionConfig{}, rng).parameter_count() == 43408);
    DiffusionConfig wide;
    wide.hidden_width = 512;
    CHECK(make_diffusion_head(384, wide, rng).parameter_count() == 1132416);
}

TEST_CASE("a linear net wired to invert the corruption has zero loss") {
    // Zero residuals: the noise slot carries c_in(t) sqrt(1 - abar) eps, so a scaled identity recovers eps.
    DiffusionConfig cfg;
    cfg.T = 20;
    cfg.beta_start = 0.01;
    cfg.beta_end = 0.1;
    cfg.hidden_layers = 0;
    cfg.time_embed_dim = 4;
    cfg.inference_timesteps = {10};
    Rng rng(1);
    DiffusionHead h = make_diffusion_head(3, cfg, rng);
    calibrate_residual_scale(h, 2.0);
    const std::int64_t t = 12;
    const double gain = 1.0 / (h.input_scale(t) * std::sqrt(1.0 - h.schedule.alpha_bar_at(t)));
    h.noise_net.layers[0].weight.setZero();
    h.noise_net.layers[0].weight.leftCols(3) = gain * Matrix::Identity(3, 3);
    h.noise_net.layers[0].bias.setZero();
    const Vector eps = rng.normal_vector(3);
    CHECK(ddpm_loss_at(h, Vector::Zero(3), rng.normal_vector(3), t, eps).loss < 1e-20);
    CHECK((predict_noise(h, Vector::Zero(3), rng.normal_vector(3), t, eps) - eps).norm() < 1e-12);
}

TEST_CASE("a zero network has expected loss equal to the dimension") {
    DiffusionHead h = small_head(true);
    for (auto& l : h.noise_net.layers) {
        l.weight.setZero();
        l.bias.setZero();
    }
    Rng rng(2);
    const int n = 4000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double l = ddpm_loss(h, rng.normal_vector(5), rng.normal_vector(5), rng).loss;
        sum += l;
        sq += l * l;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sq / n - mean * mean) / n);
    CHECK(std::abs(mean - 5.0) < 3 * se);
}

TEST_CASE("residual scale calibration") {
    DiffusionHead h = small_head(true);
    calibrate_residual_scale(h, 0.6);
    CHECK(h.residual_scale == doctest::Approx(0.05));
    CHECK(h.data_variance == doctest::Approx(0.0009));
    h.target_rms = 0.0;
    calibrate_residual_scale(h, 0.6);
    CHECK(h.residual_scale == 1.0);
    CHECK(h.data_variance == doctest::Approx(0.36));
    CHECK_THROWS_AS(calibrate_residual_scale(h, std::nan("")), NumericError);
}

TEST_CASE("analytic gradients match finite differences") {
    for (Activation act : {Activation::gelu, Activation::tanh, Activation::relu}) {
        for (bool cond : {true, false}) {
            CAPTURE(to_string(act));
            CAPTURE(cond);
            DiffusionHead h = small_head(cond, act);
            calibrate_residual_scale(h, 0.8);
            Rng rng(9);
            const Matrix V = rng.normal_matrix(5, 4);
            const Matrix C = cond ? rng.normal_matrix(5, 4) : Matrix(0, 4);
            const Matrix E = rng.normal_matrix(5, 4);
            const std::vector<std::int64_t> ts{1, 17, 33, 50};
            const DiffusionLoss l = ddpm_loss_batch(h, V, C, ts, E);
            auto f = [&] { return ddpm_loss_batch(h, V, C, ts, E, false).loss; };
            CHECK(relative_error(testing::flatten(l.grads), numeric_gradient(h.noise_net, f)) < 1e-6);
        }
    }
}

TEST_CASE("net input layout matches v-tilde, prototype and time embedding") {
    DiffusionHead h = small_head(true, Activation::tanh);
    calibrate_residual_scale(h, 0.5);
    Rng rng(14);
    const Vector v = rng.normal_vector(5), c = rng.normal_vector(5), eps = rng.normal_vector(5);
    const std::int64_t t = 27;
    const double ab = h.schedule.alpha_bar_at(t);
    const Vector v_tilde = std::sqrt(ab) * h.residual_scale * v + std::sqrt(1.0 - ab) * eps;
    Vector in(5 + 5 + 6);
    in << h.input_scale(t) * v_tilde, c, timestep_embedding(t, 6);
    const Vector eps_hat = mlp_apply(h.noise_net, in);
    CHECK((predict_noise(h, v, c, t, eps) - eps_hat).norm() < 1e-12);
    CHECK(ddpm_loss_at(h, v, c, t, eps).loss == doctest::Approx((eps_hat - eps).squaredNorm()).epsilon(1e-12));
}

TEST_CASE("score is the negated mean loss over shared inference noise") {
    const DiffusionHead h = small_head(true);
    Rng rng(3);
    const Vector v = rng.normal_vector(5), c = rng.normal_vector(5);
    const InferenceNoise noise = draw_inference_noise(h, rng);
    REQUIRE(noise.timesteps == std::vector<std::int64_t>{40, 3});
    double expected = 0.0;
    for (std::size_t j = 0; j < noise.eps.size(); ++j)
        expected += ddpm_loss_at(h, v, c, noise.timesteps[j], noise.eps[j]).loss;
    expected = -expected / static_cast<double>(noise.eps.size());
    CHECK(diffusion_score(h, v, c, noise) == doctest::Approx(expected).epsilon(1e-12));

    const Matrix V = rng.normal_matrix(5, 3), C = rng.normal_matrix(5, 3);
    const Vector batch = diffusion_score_batch(h, V, C, noise);
    for (int j = 0; j < 3; ++j)
        CHECK(batch[j] == doctest::Approx(diffusion_score(h, V.col(j), C.col(j), noise)).epsilon(1e-12));
}

TEST_CASE("noise draws per timestep multiply the inference noise") {
    DiffusionHead h = small_head(false);
    h.noise_draws_per_timestep = 3;
    Rng rng(5);
    const InferenceNoise noise = draw_inference_noise(h, rng);
    CHECK(noise.eps.size() == 6);
    CHECK(noise.timesteps == std::vector<std::int64_t>{40, 40, 40, 3, 3, 3});
}

TEST_CASE("ancestral sampler returns finite residuals of the right shape") {
    DiffusionHead h = small_head(true);
    calibrate_residual_scale(h, 1.0);
    Rng rng(6);
    const Matrix x = ddpm_sample(h, rng.normal_vector(5), 7, rng);
    CHECK(x.rows() == 5);
    CHECK(x.cols() == 7);
    CHECK(x.allFinite());
}

TEST_CASE("shape errors") {
    const DiffusionHead h = small_head(true);
    CHECK_THROWS_AS(ddpm_loss_at(h, Vector::Zero(4), Vector::Zero(5), 3, Vector::Zero(5)), ShapeError);
    CHECK_THROWS_AS(ddpm_loss_at(h, Vector::Zero(5), Vector::Zero(3), 3, Vector::Zero(5)), ShapeError);
    CHECK_THROWS_AS(ddpm_loss_at(h, Vector::Zero(5), Vector::Zero(5), 0, Vector::Zero(5)), ConfigError);
}
