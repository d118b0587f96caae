#include <cmath>
#include <numbers>

#include "doctest.h"
#include "gradcheck.hpp"

#include "gen1s/error.hpp"
#include "gen1s/vae_head.hpp"

using namespace gen1s;
using testing::numeric_gradient;
using testing::relative_error;

namespace {

VaeHead small_head(bool conditioned, Activation act, std::uint64_t seed = 11) {
    VaeConfig cfg;
    cfg.latent_dim = 4;
    cfg.hidden_width = 12;
    cfg.hidden_layers = 2;
    cfg.conditioned = conditioned;
    cfg.activation = act;
    Rng rng(seed);
    VaeHead h = make_vae_head(8, cfg, rng);
    // Non-zero biases so the gradient check also covers them.
    Rng bias_rng(seed + 1);
    for (auto* net : {&h.encoder, &h.decoder})
        for (auto& l : net->layers) l.bias = 0.1 * bias_rng.normal_vector(l.bias.size());
    return h;
}

double log_normal_oracle(const Vector& v, const Vector& mean, double var) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        s += -0.5 * std::log(2.0 * std::numbers::pi * var) - (v[i] - mean[i]) * (v[i] - mean[i]) / (2.0 * var);
    return s;
}

}  // namespace

TEST_CASE("closed-form KL") {
    CHECK(gaussian_kl(Vector::Zero(3), Vector::Zero(3)) == 0.0);
    // mean 1, unit variance in one dimension
    CHECK(gaussian_kl(Vector::Ones(1), Vector::Zero(1)) == doctest::Approx(0.5));
    // mean 0, variance e: 0.5 (e - 1 - 1)
    CHECK(gaussian_kl(Vector::Zero(1), Vector::Ones(1)) == doctest::Approx(0.5 * (std::exp(1.0) - 2.0)));
}

TEST_CASE("KL is nonnegative and vanishes only at the prior") {
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        const Vector m = rng.normal_vector(6), lv = rng.normal_vector(6);
        CHECK(gaussian_kl(m, lv) > 0.0);
    }
}

TEST_CASE("latent size default and parameter counts") {
    CHECK(resolve_latent_dim(16, 0) == 4);
    CHECK(resolve_latent_dim(384, 0) == 96);
    CHECK(resolve_latent_dim(5, 0) == 2);
    CHECK(resolve_latent_dim(16, 7) == 7);

    Rng rng(0);
    CHECK(make_vae_head(16, VaeConfig{}, rng).parameter_count() == 43032);
    VaeConfig wide;
    wide.hidden_width = 384;
    CHECK(make_vae_head(384, wide, rng).parameter_count() == 997440);
}

TEST_CASE("zeroed output layers reduce the head to the prior") {
    VaeHead h = small_head(true, Activation::relu);
    zero_final_layer(h.encoder);
    zero_final_layer(h.decoder);
    Rng rng(3);
    const Vector v = rng.normal_vector(8), c = rng.normal_vector(8);
    const Posterior q = vae_encode(h, v, c);
    CHECK(q.mean.isZero());
    CHECK(q.log_var.isZero());
    const VaeLoss l = vae_loss(h, v, c, rng.normal_vector(4));
    CHECK(l.kl == 0.0);
    CHECK(l.reconstruction == doctest::Approx(-log_normal_oracle(v, Vector::Zero(8), 1.0)).epsilon(1e-12));
}

TEST_CASE("loss equals an independently assembled ELBO") {
    VaeHead h = small_head(true, Activation::tanh);
    h.decoder_variance = 0.7;
    h.kl_weight = 0.3;
    Rng rng(8);
    const Vector v = rng.normal_vector(8), c = rng.normal_vector(8), eps = rng.normal_vector(4);

    Vector enc_in(16);
    enc_in << v, c;
    const Vector out = mlp_apply(h.encoder, enc_in);
    const Vector mean = out.head(4), lv = out.tail(4);
    const Vector z = mean.array() + (0.5 * lv.array()).exp() * eps.array();
    Vector dec_in(12);
    dec_in << z, c;
    const Vector v_hat = mlp_apply(h.decoder, dec_in);
    double kl = 0.0;
    for (int i = 0; i < 4; ++i) kl += 0.5 * (mean[i] * mean[i] + std::exp(lv[i]) - 1.0 - lv[i]);
    const double recon = -log_normal_oracle(v, v_hat, 0.7);

    const VaeLoss l = vae_loss(h, v, c, eps);
    CHECK(l.kl == doctest::Approx(kl).epsilon(1e-12));
    CHECK(l.reconstruction == doctest::Approx(recon).epsilon(1e-12));
    CHECK(l.loss == doctest::Approx(recon + 0.3 * kl).epsilon(1e-12));

    // Score with the same single noise sample is the negated unweighted loss.
    h.kl_weight = 1.0;
    const Vector e[] = {eps};
    CHECK(vae_score(h, v, c, e) == doctest::Approx(-(recon + kl)).epsilon(1e-12));
}

TEST_CASE("score averages log-likelihood over shared noise then subtracts KL once") {
    const VaeHead h = small_head(false, Activation::relu);
    Rng rng(12);
    const Vector v = rng.normal_vector(8);
    std::vector<Vector> eps;
    for (int i = 0; i < 3; ++i) eps.push_back(rng.normal_vector(4));
    double expected = 0.0;
    for (const auto& e : eps) expected += -vae_loss(h, v, Vector(), e).reconstruction;
    expected = expected / 3.0 - gaussian_kl(vae_encode(h, v, Vector()));
    CHECK(vae_score(h, v, Vector(), eps) == doctest::Approx(expected).epsilon(1e-12));

    const Matrix V = rng.normal_matrix(8, 5);
    const Vector batch = vae_score_batch(h, V, Matrix(0, 5), eps);
    for (int j = 0; j < 5; ++j) CHECK(batch[j] == doctest::Approx(vae_score(h, V.col(j), Vector(), eps)).epsilon(1e-12));
}

TEST_CASE("analytic gradients match finite differences") {
    for (Activation act : {Activation::relu, Activation::tanh, Activation::gelu}) {
        for (bool cond : {true, false}) {
            CAPTURE(to_string(act));
            CAPTURE(cond);
            VaeHead h = small_head(cond, act);
            h.kl_weight = 0.6;
            h.decoder_variance = 0.8;
            Rng rng(21);
            const Matrix V = rng.normal_matrix(8, 3);
            const Matrix C = cond ? rng.normal_matrix(8, 3) : Matrix(0, 3);
            const Matrix E = rng.normal_matrix(4, 3);
            const VaeLoss l = vae_loss_batch(h, V, C, E);
            auto f = [&] { return vae_loss_batch(h, V, C, E, false).loss; };
            CHECK(relative_error(testing::flatten(l.grads.encoder), numeric_gradient(h.encoder, f)) < 1e-6);
            CHECK(relative_error(testing::flatten(l.grads.decoder), numeric_gradient(h.decoder, f)) < 1e-6);
        }
    }
}

TEST_CASE("batch loss is the mean of per-sample losses") {
    const VaeHead h = small_head(true, Activation::gelu);
    Rng rng(30);
    const Matrix V = rng.normal_matrix(8, 4), C = rng.normal_matrix(8, 4), E = rng.normal_matrix(4, 4);
    double sum = 0.0;
    for (int j = 0; j < 4; ++j) sum += vae_loss(h, V.col(j), C.col(j), E.col(j)).loss;
    CHECK(vae_loss_batch(h, V, C, E).loss == doctest::Approx(sum / 4.0).epsilon(1e-12));
}

TEST_CASE("shape and configuration errors") {
    const VaeHead h = small_head(true, Activation::relu);
    CHECK_THROWS_AS(vae_loss(h, Vector::Zero(7), Vector::Zero(8), Vector::Zero(4)), ShapeError);
    CHECK_THROWS_AS(vae_loss(h, Vector::Zero(8), Vector::Zero(8), Vector::Zero(3)), ShapeError);
    CHECK_THROWS_AS(vae_score(h, Vector::Zero(8), Vector::Zero(8), std::span<const Vector>{}), ConfigError);
    Rng rng(0);
    VaeConfig bad;
    bad.hidden_layers = -1;
    CHECK_THROWS_AS(make_vae_head(8, bad, rng), ConfigError);
}

TEST_CASE("non-finite loss is reported") {
    VaeHead h = small_head(true, Activation::relu);
    h.decoder.layers.back().bias[0] = std::numeric_limits<double>::infinity();
    Rng rng(1);
    CHECK_THROWS_AS(vae_loss(h, Vector::Zero(8), Vector::Zero(8), rng), NumericError);
}
