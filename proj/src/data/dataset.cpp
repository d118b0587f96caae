#include "gen1s/data/dataset.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include "json.hpp"

#include "gen1s/data/file_io.hpp"
#include "gen1s/error.hpp"

namespace gen1s {

const char* to_string(Split s) {
    switch (s) {
        case Split::base_train: return "base_train";
        case Split::base_test: return "base_test";
        case Split::novel_support: return "novel_support";
        case Split::novel_query: return "novel_query";
    }
    return "?";
}

const char* to_string(ClassRole r) { return r == ClassRole::base ? "base" : "novel"; }

std::vector<std::size_t> EmbeddingDataset::indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < records.size(); ++i)
        if (records[i].split == s) out.push_back(i);
    return out;
}

std::vector<std::size_t> EmbeddingDataset::indices(Split s, ClassId k) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < records.size(); ++i)
        if (records[i].split == s && records[i].class_id == k) out.push_back(i);
    return out;
}

std::vector<ClassId> EmbeddingDataset::classes(ClassRole r) const {
    std::vector<ClassId> out;
    for (const auto& [k, role] : registry)
        if (role == r) out.push_back(k);
    return out;
}

std::vector<ClassId> EmbeddingDataset::classes() const {
    std::vector<ClassId> out;
    for (const auto& [k, role] : registry) out.push_back(k);
    return out;
}

void EmbeddingDataset::validate() const {
    if (dim <= 0) throw DataError("dataset dim must be positive");
    std::map<ClassId, std::size_t> support_count;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (r.embedding.size() != dim)
            throw DataError("record " + std::to_string(i) + " has dimension " + std::to_string(r.embedding.size()) +
                            ", dataset dim " + std::to_string(dim));
        if (!r.embedding.allFinite()) throw DataError("record " + std::to_string(i) + " has non-finite entries");
        if (r.class_id >= n_classes)
            throw DataError("record " + std::to_string(i) + " class id " + std::to_string(r.class_id) +
                            " >= n_classes " + std::to_string(n_classes));
        if (!r.split) {
            if (is_split()) throw DataError("record " + std::to_string(i) + " has no split in a split dataset");
            continue;
        }
        auto it = registry.find(r.class_id);
        if (it == registry.end())
            throw DataError("record " + std::to_string(i) + " class " + std::to_string(r.class_id) +
                            " is not registered");
        const bool base_split = *r.split == Split::base_train || *r.split == Split::base_test;
        if (base_split && it->second != ClassRole::base)
            throw DataError("novel class " + std::to_string(r.class_id) + " appears in " + to_string(*r.split));
        if (!base_split && it->second != ClassRole::novel)
            throw DataError("base class " + std::to_string(r.class_id) + " appears in " + to_string(*r.split));
        if (*r.split == Split::novel_support) ++support_count[r.class_id];
    }
    if (shots > 0) {
        for (ClassId k : classes(ClassRole::novel)) {
            if (support_count[k] != shots)
                throw DataError("novel class " + std::to_string(k) + " has " + std::to_string(support_count[k]) +
                                " support records, expected " + std::to_string(shots));
        }
    }
}

std::vector<std::uint8_t> encode_dataset(const EmbeddingDataset& ds) {
    ds.validate();
    ByteWriter header;
    header.raw(std::string_view(kDatasetMagic, 4));
    header.u16(kDatasetVersion);
    header.u32(static_cast<std::uint32_t>(ds.dim));
    header.u64(ds.records.size());
    header.u32(ds.n_classes);

    ByteWriter payload;
    for (const auto& r : ds.records) {
        payload.u32(r.class_id);
        for (Eigen::Index j = 0; j < ds.dim; ++j) payload.f32(static_cast<float>(r.embedding[j]));
    }
    const std::uint32_t crc = crc32(payload.bytes());

    std::vector<std::uint8_t> out = header.take();
    out.insert(out.end(), payload.bytes().begin(), payload.bytes().end());
    ByteWriter tail;
    tail.u32(crc);
    out.insert(out.end(), tail.bytes().begin(), tail.bytes().end());
    return out;
}

EmbeddingDataset decode_dataset(std::span<const std::uint8_t> bytes) {
    ByteReader in(bytes);
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kDatasetMagic, 4) != 0)
        throw LoadError(LoadErrorKind::bad_magic, "not a G1SE embedding file");
    in.raw(4);
    const std::uint16_t version = in.u16();
    if (version != kDatasetVersion)
        throw LoadError(LoadErrorKind::unsupported_version, "version " + std::to_string(version));
    const std::uint32_t dim = in.u32();
    const std::uint64_t n_records = in.u64();
    const std::uint32_t n_classes = in.u32();
    if (dim == 0) throw LoadError(LoadErrorKind::malformed, "dim is zero");

    const std::uint64_t record_bytes = 4ull + 4ull * dim;
    if (n_records > in.remaining() / record_bytes)
        throw LoadError(LoadErrorKind::truncated, "payload shorter than " + std::to_string(n_records) + " records");
    const std::uint64_t payload_bytes = n_records * record_bytes;
    if (in.remaining() < payload_bytes + 4)
        throw LoadError(LoadErrorKind::truncated, "payload + checksum need " + std::to_string(payload_bytes + 4) +
                                                      " bytes, have " + std::to_string(in.remaining()));
    if (in.remaining() > payload_bytes + 4)
        throw LoadError(LoadErrorKind::malformed, "trailing bytes after checksum");

    const auto payload = in.raw(payload_bytes);
    const std::uint32_t stored_crc = in.u32();
    const std::uint32_t actual_crc = crc32(payload);
    if (stored_crc != actual_crc) throw LoadError(LoadErrorKind::checksum_mismatch, "payload CRC32 mismatch");

    EmbeddingDataset ds;
    ds.dim = dim;
    ds.n_classes = n_classes;
    ds.records.reserve(n_records);
    ByteReader p(payload);
    for (std::uint64_t i = 0; i < n_records; ++i) {
        Record r;
        r.class_id = p.u32();
        if (r.class_id >= n_classes)
            throw LoadError(LoadErrorKind::invalid_class_id,
                            "record " + std::to_string(i) + " class id " + std::to_string(r.class_id));
        r.embedding.resize(dim);
        for (std::uint32_t j = 0; j < dim; ++j) {
            const float v = p.f32();
            if (!std::isfinite(v))
                throw LoadError(LoadErrorKind::non_finite, "record " + std::to_string(i) + " coordinate " +
                                                               std::to_string(j));
            r.embedding[j] = static_cast<double>(v);
        }
        ds.records.push_back(std::move(r));
    }
    return ds;
}

std::filesystem::path manifest_path(const std::filesystem::path& dataset_path) {
    auto p = dataset_path;
    p += ".manifest.json";
    return p;
}

std::string encode_manifest(const Manifest& m) {
    nlohmann::json j;
    j["labels"] = m.labels;
    j["source"] = m.source;
    j["backbone"] = m.backbone;
    return j.dump(2) + "\n";
}

Manifest decode_manifest(std::string_view json_text) {
    Manifest m;
    try {
        const auto j = nlohmann::json::parse(json_text);
        m.labels = j.value("labels", std::vector<std::string>{});
        m.source = j.value("source", std::string{});
        m.backbone = j.value("backbone", std::string{});
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(LoadErrorKind::malformed, std::string("manifest: ") + e.what());
    }
    return m;
}

void save_dataset(const EmbeddingDataset& ds, const std::filesystem::path& path) {
    const auto bytes = encode_dataset(ds);
    write_file_atomic(path, bytes);
    const auto& m = ds.manifest;
    if (!m.labels.empty() || !m.source.empty() || !m.backbone.empty())
        write_file_atomic(manifest_path(path), encode_manifest(m));
}

EmbeddingDataset load_dataset(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    EmbeddingDataset ds = decode_dataset(bytes);
    const auto mp = manifest_path(path);
    if (std::filesystem::exists(mp)) {
        const auto text = read_file(mp);
        ds.manifest = decode_manifest(std::string_view(reinterpret_cast<const char*>(text.data()), text.size()));
        if (!ds.manifest.labels.empty() && ds.manifest.labels.size() != ds.n_classes)
            throw LoadError(LoadErrorKind::malformed, "manifest lists " + std::to_string(ds.manifest.labels.size()) +
                                                          " labels for " + std::to_string(ds.n_classes) + " classes");
    }
    return ds;
}

EmbeddingDataset l2_normalized(const EmbeddingDataset& ds) {
    EmbeddingDataset out = ds;
    for (auto& r : out.records) {
        const double n = r.embedding.norm();
        if (n > 0.0) r.embedding /= n;
    }
    return out;
}

}  // namespace gen1s
