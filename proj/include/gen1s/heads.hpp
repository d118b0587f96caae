#pragma once

#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "gen1s/diffusion_head.hpp"
#include "gen1s/vae_head.hpp"

namespace gen1s {

using GenerativeHead = std::variant<VaeHead, DiffusionHead>;

const char* head_kind(const GenerativeHead& head);
Eigen::Index head_dim(const GenerativeHead& head);
bool head_conditioned(const GenerativeHead& head);

// Checkpoint magic "G1SV" for VAE heads, "G1SD" for diffusion heads. Weights are stored as binary32.
std::vector<std::uint8_t> encode_head(const GenerativeHead& head);
GenerativeHead decode_head(std::span<const std::uint8_t> bytes);

void save_head(const GenerativeHead& head, const std::filesystem::path& path);
GenerativeHead load_head(const std::filesystem::path& path);

}  // namespace gen1s
