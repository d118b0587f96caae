#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gen1s/core/types.hpp"

namespace gen1s {

enum class Split { base_train, base_test, novel_support, novel_query };
enum class ClassRole { base, novel };

const char* to_string(Split s);
const char* to_string(ClassRole r);

struct Record {
    Vector embedding;
    ClassId class_id = 0;
    std::optional<Split> split;  // empty for an unsplit pool
    std::size_t origin = 0;      // index of the record in the pool it was split from
};

// Sidecar metadata; labels[k] is the original string label of class id k.
struct Manifest {
    std::vector<std::string> labels;
    std::string source;
    std::string backbone;
};

struct EmbeddingDataset {
    Eigen::Index dim = 0;
    std::uint32_t n_classes = 0;
    std::vector<Record> records;
    std::map<ClassId, ClassRole> registry;  // empty for an unsplit pool
    std::uint32_t shots = 0;                // support records per novel class, 0 if unsplit
    Manifest manifest;
    std::vector<std::string> warnings;

    bool is_split() const { return !registry.empty(); }
    std::vector<std::size_t> indices(Split s) const;
    std::vector<std::size_t> indices(Split s, ClassId k) const;
    std::vector<ClassId> classes(ClassRole r) const;
    std::vector<ClassId> classes() const;  // registered classes, ascending

    // Throws DataError on any violated invariant.
    void validate() const;
};

// Bit-exact container: "G1SE" | u16 version | u32 dim | u64 n_records | u32 n_classes |
// n_records x (u32 class_id, dim x f32) | u32 CRC32(payload). All little-endian.
inline constexpr char kDatasetMagic[4] = {'G', '1', 'S', 'E'};
inline constexpr std::uint16_t kDatasetVersion = 1;
inline constexpr std::size_t kDatasetHeaderBytes = 4 + 2 + 4 + 8 + 4;

std::vector<std::uint8_t> encode_dataset(const EmbeddingDataset& ds);
EmbeddingDataset decode_dataset(std::span<const std::uint8_t> bytes);

std::filesystem::path manifest_path(const std::filesystem::path& dataset_path);

// Writes the binary file and, when labels/source/backbone are set, the manifest sidecar.
void save_dataset(const EmbeddingDataset& ds, const std::filesystem::path& path);
// Loads and verifies a file; the result is an unsplit pool.
EmbeddingDataset load_dataset(const std::filesystem::path& path);

std::string encode_manifest(const Manifest& m);
Manifest decode_manifest(std::string_view json_text);

// Returns a copy with every embedding scaled to unit L2 norm (zero vectors untouched).
EmbeddingDataset l2_normalized(const EmbeddingDataset& ds);

struct SplitSpec {
    std::uint32_t n_base_classes = 0;
    std::uint32_t n_novel_classes = 0;
    std::uint32_t shots = 1;
    double query_fraction = 0.2;  // base-class fraction held out as base_test
    std::uint64_t seed = 0;
    bool shuffle_classes = false;  // false: ids [0,n_base) base, next n_novel novel
};

EmbeddingDataset apply_split(const EmbeddingDataset& pool, const SplitSpec& spec);

}  // namespace gen1s
