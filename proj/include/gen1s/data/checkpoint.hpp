#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "gen1s/core/types.hpp"

namespace gen1s {

// Head checkpoint container, same conventions as the embedding file:
// magic(4) | u16 version | u32 meta_len | meta JSON | u32 n_tensors | n x (u32 rows, u32 cols) |
// tensors as binary32 LE, row-major | u32 CRC32 of every byte between magic and checksum.
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct CheckpointBlob {
    std::string magic;
    nlohmann::json meta;
    std::vector<Matrix> tensors;
};

std::vector<std::uint8_t> encode_checkpoint(std::string_view magic, const nlohmann::json& meta,
                                            const std::vector<Matrix>& tensors);
CheckpointBlob decode_checkpoint(std::span<const std::uint8_t> bytes, std::string_view expected_magic);

// Reads just the 4-byte magic of a checkpoint file.
std::string peek_magic(std::span<const std::uint8_t> bytes);

}  // namespace gen1s
