#include "gen1s/data/checkpoint.hpp"

#include <cmath>

#include "gen1s/data/file_io.hpp"
#include "gen1s/error.hpp"

namespace gen1s {

std::vector<std::uint8_t> encode_checkpoint(std::string_view magic, const nlohmann::json& meta,
                                            const std::vector<Matrix>& tensors) {
    if (magic.size() != 4) throw ConfigError("checkpoint magic must be 4 bytes");
    ByteWriter body;
    body.u16(kCheckpointVersion);
    const std::string meta_text = meta.dump();
    body.u32(static_cast<std::uint32_t>(meta_text.size()));
    body.raw(meta_text);
    body.u32(static_cast<std::uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
        body.u32(static_cast<std::uint32_t>(t.rows()));
        body.u32(static_cast<std::uint32_t>(t.cols()));
    }
    for (const auto& t : tensors)
        for (Eigen::Index r = 0; r < t.rows(); ++r)
            for (Eigen::Index c = 0; c < t.cols(); ++c) body.f32(static_cast<float>(t(r, c)));

    std::vector<std::uint8_t> out(magic.begin(), magic.end());
    out.insert(out.end(), body.bytes().begin(), body.bytes().end());
    ByteWriter tail;
    tail.u32(crc32(body.bytes()));
    out.insert(out.end(), tail.bytes().begin(), tail.bytes().end());
    return out;
}

std::string peek_magic(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4) throw LoadError(LoadErrorKind::truncated, "checkpoint shorter than its magic");
    return std::string(reinterpret_cast<const char*>(bytes.data()), 4);
}

CheckpointBlob decode_checkpoint(std::span<const std::uint8_t> bytes, std::string_view expected_magic) {
    const std::string magic = peek_magic(bytes);
    if (magic != expected_magic)
        throw LoadError(LoadErrorKind::bad_magic, "expected '" + std::string(expected_magic) + "', found '" + magic + "'");
    if (bytes.size() < 8) throw LoadError(LoadErrorKind::truncated, "checkpoint too short");
    const auto body = bytes.subspan(4, bytes.size() - 8);
    ByteReader crc_in(bytes.subspan(bytes.size() - 4));
    if (crc_in.u32() != crc32(body)) throw LoadError(LoadErrorKind::checksum_mismatch, "checkpoint CRC32 mismatch");

    ByteReader in(body);
    const std::uint16_t version = in.u16();
    if (version != kCheckpointVersion)
        throw LoadError(LoadErrorKind::unsupported_version, "checkpoint version " + std::to_string(version));
    const std::uint32_t meta_len = in.u32();
    const auto meta_bytes = in.raw(meta_len);
    CheckpointBlob blob;
    blob.magic = magic;
    try {
        blob.meta = nlohmann::json::parse(meta_bytes.begin(), meta_bytes.end());
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(LoadErrorKind::malformed, std::string("checkpoint metadata: ") + e.what());
    }
    const std::uint32_t n = in.u32();
    std::vector<std::pair<std::uint32_t, std::uint32_t>> shapes(n);
    for (auto& s : shapes) {
        s.first = in.u32();
        s.second = in.u32();
    }
    for (const auto& [rows, cols] : shapes) {
        Matrix m(rows, cols);
        for (std::uint32_t r = 0; r < rows; ++r)
            for (std::uint32_t c = 0; c < cols; ++c) {
                const float v = in.f32();
                if (!std::isfinite(v)) throw LoadError(LoadErrorKind::non_finite, "checkpoint tensor entry");
                m(r, c) = v;
            }
        blob.tensors.push_back(std::move(m));
    }
    if (in.remaining() != 0) throw LoadError(LoadErrorKind::malformed, "trailing bytes in checkpoint body");
    return blob;
}

}  // namespace gen1s
