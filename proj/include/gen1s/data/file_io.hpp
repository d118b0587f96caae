#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace gen1s {

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

// Writes to a temporary sibling then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

// Little-endian encoder used by every binary container in the repo.
class ByteWriter {
public:
    void u16(std::uint16_t v);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f32(float v);
    void raw(std::span<const std::uint8_t> bytes);
    void raw(std::string_view bytes);

    std::size_t size() const { return buf_.size(); }
    const std::vector<std::uint8_t>& bytes() const { return buf_; }
    std::vector<std::uint8_t> take() { return std::move(buf_); }

private:
    std::vector<std::uint8_t> buf_;
};

// Bounds-checked little-endian decoder; throws LoadError(truncated) on overrun.
class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint16_t u16();
    std::uint32_t u32();
    std::uint64_t u64();
    float f32();
    std::span<const std::uint8_t> raw(std::size_t n);

    std::size_t position() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const;

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace gen1s
