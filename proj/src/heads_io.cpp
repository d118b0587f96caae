#include "gen1s/heads.hpp"

#include "gen1s/data/checkpoint.hpp"
#include "gen1s/data/file_io.hpp"
#include "gen1s/error.hpp"

namespace gen1s {

namespace {

using nlohmann::json;

constexpr const char* kVaeMagic = "G1SV";
constexpr const char* kDiffusionMagic = "G1SD";

void push_mlp(const MlpParams& p, std::vector<Matrix>& tensors) {
    for (const auto& layer : p.layers) {
        tensors.push_back(layer.weight);
        tensors.push_back(Matrix(layer.bias));
    }
}

json mlp_meta(const MlpParams& p) {
    json widths = json::array();
    widths.push_back(p.input_dim());
    for (const auto& layer : p.layers) widths.push_back(layer.weight.rows());
    return {{"activation", to_string(p.activation)}, {"widths", widths}};
}

MlpParams pop_mlp(const json& meta, const std::vector<Matrix>& tensors, std::size_t& next) {
    MlpParams p;
    p.activation = parse_activation(meta.at("activation").get<std::string>());
    const auto widths = meta.at("widths").get<std::vector<Eigen::Index>>();
    if (widths.size() < 2) throw LoadError(LoadErrorKind::malformed, "mlp needs at least one layer");
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        if (next + 2 > tensors.size()) throw LoadError(LoadErrorKind::malformed, "missing mlp tensors");
        const Matrix& w = tensors[next++];
        const Matrix& b = tensors[next++];
        if (w.rows() != widths[i + 1] || w.cols() != widths[i] || b.rows() != widths[i + 1] || b.cols() != 1)
            throw LoadError(LoadErrorKind::malformed, "mlp tensor shape disagrees with metadata");
        p.layers.push_back({w, b.col(0)});
    }
    return p;
}

std::vector<std::uint8_t> encode_vae(const VaeHead& h) {
    json meta = {{"kind", "vae"},
                 {"dim", h.dim},
                 {"latent_dim", h.latent_dim},
                 {"decoder_variance", h.decoder_variance},
                 {"conditioned", h.conditioned},
                 {"kl_weight", h.kl_weight},
                 {"inference_samples", h.inference_samples},
                 {"encoder", mlp_meta(h.encoder)},
                 {"decoder", mlp_meta(h.decoder)}};
    std::vector<Matrix> tensors;
    push_mlp(h.encoder, tensors);
    push_mlp(h.decoder, tensors);
    return encode_checkpoint(kVaeMagic, meta, tensors);
}

std::vector<std::uint8_t> encode_diffusion(const DiffusionHead& h) {
    json meta = {{"kind", "diffusion"},
                 {"dim", h.dim},
                 {"time_embed_dim", h.time_embed_dim},
                 {"T", h.schedule.T},
                 {"beta_start", h.beta_start},
                 {"beta_end", h.beta_end},
                 {"conditioned", h.conditioned},
                 {"inference_timesteps", h.inference_timesteps},
                 {"noise_draws_per_timestep", h.noise_draws_per_timestep},
                 {"target_rms", h.target_rms},
                 {"residual_scale", h.residual_scale},
                 {"data_variance", h.data_variance},
                 {"noise_net", mlp_meta(h.noise_net)}};
    std::vector<Matrix> tensors;
    push_mlp(h.noise_net, tensors);
    return encode_checkpoint(kDiffusionMagic, meta, tensors);
}

template <class Fn>
auto with_meta_errors(Fn&& fn) {
    try {
        return fn();
    } catch (const json::exception& e) {
        throw LoadError(LoadErrorKind::malformed, std::string("checkpoint metadata: ") + e.what());
    } catch (const ShapeError& e) {
        throw LoadError(LoadErrorKind::malformed, e.what());
    } catch (const ConfigError& e) {
        throw LoadError(LoadErrorKind::malformed, e.what());
    }
}

}  // namespace

const char* head_kind(const GenerativeHead& head) {
    return std::holds_alternative<VaeHead>(head) ? "vae" : "diffusion";
}

Eigen::Index head_dim(const GenerativeHead& head) {
    return std::visit([](const auto& h) { return h.dim; }, head);
}

bool head_conditioned(const GenerativeHead& head) {
    return std::visit([](const auto& h) { return h.conditioned; }, head);
}

std::vector<std::uint8_t> encode_head(const GenerativeHead& head) {
    if (const auto* v = std::get_if<VaeHead>(&head)) return encode_vae(*v);
    return encode_diffusion(std::get<DiffusionHead>(head));
}

GenerativeHead decode_head(std::span<const std::uint8_t> bytes) {
    const std::string magic = peek_magic(bytes);
    if (magic == kVaeMagic) {
        const CheckpointBlob blob = decode_checkpoint(bytes, kVaeMagic);
        return with_meta_errors([&]() -> GenerativeHead {
            const json& m = blob.meta;
            VaeHead h;
            h.dim = m.at("dim").get<Eigen::Index>();
            h.latent_dim = m.at("latent_dim").get<Eigen::Index>();
            h.decoder_variance = m.at("decoder_variance").get<double>();
            h.conditioned = m.at("conditioned").get<bool>();
            h.kl_weight = m.at("kl_weight").get<double>();
            h.inference_samples = m.at("inference_samples").get<int>();
            std::size_t next = 0;
            h.encoder = pop_mlp(m.at("encoder"), blob.tensors, next);
            h.decoder = pop_mlp(m.at("decoder"), blob.tensors, next);
            if (next != blob.tensors.size()) throw LoadError(LoadErrorKind::malformed, "extra checkpoint tensors");
            h.validate();
            return h;
        });
    }
    if (magic == kDiffusionMagic) {
        const CheckpointBlob blob = decode_checkpoint(bytes, kDiffusionMagic);
        return with_meta_errors([&]() -> GenerativeHead {
            const json& m = blob.meta;
            DiffusionHead h;
            h.dim = m.at("dim").get<Eigen::Index>();
            h.time_embed_dim = m.at("time_embed_dim").get<Eigen::Index>();
            h.beta_start = m.at("beta_start").get<double>();
            h.beta_end = m.at("beta_end").get<double>();
            h.schedule = build_schedule(m.at("T").get<std::int64_t>(), h.beta_start, h.beta_end);
            h.conditioned = m.at("conditioned").get<bool>();
            h.inference_timesteps = m.at("inference_timesteps").get<std::vector<std::int64_t>>();
            h.noise_draws_per_timestep = m.at("noise_draws_per_timestep").get<int>();
            h.target_rms = m.at("target_rms").get<double>();
            h.residual_scale = m.at("residual_scale").get<double>();
            h.data_variance = m.at("data_variance").get<double>();
            std::size_t next = 0;
            h.noise_net = pop_mlp(m.at("noise_net"), blob.tensors, next);
            if (next != blob.tensors.size()) throw LoadError(LoadErrorKind::malformed, "extra checkpoint tensors");
            h.validate();
            return h;
        });
    }
    throw LoadError(LoadErrorKind::bad_magic, "unknown head checkpoint magic '" + magic + "'");
}

void save_head(const GenerativeHead& head, const std::filesystem::path& path) {
    write_file_atomic(path, encode_head(head));
}

GenerativeHead load_head(const std::filesystem::path& path) { return decode_head(read_file(path)); }

}  // namespace gen1s
