#include "gen1s/prototypes.hpp"

#include "json.hpp"

#include "gen1s/data/file_io.hpp"
#include "gen1s/error.hpp"

namespace gen1s {

void PrototypeTable::set(ClassId k, PrototypeEntry entry) {
    if (dim_ == 0) dim_ = entry.prototype.size();
    if (entry.prototype.size() != dim_) throw ShapeError("prototype dimension mismatch");
    entries_[k] = std::move(entry);
}

void PrototypeTable::merge(const PrototypeTable& other) {
    for (const auto& [k, e] : other.entries_) set(k, e);
}

const PrototypeEntry& PrototypeTable::entry(ClassId k) const {
    auto it = entries_.find(k);
    if (it == entries_.end()) throw DataError("no prototype for class " + std::to_string(k));
    return it->second;
}

const Vector& PrototypeTable::at(ClassId k) const { return entry(k).prototype; }

std::vector<ClassId> PrototypeTable::class_ids() const {
    std::vector<ClassId> ids;
    ids.reserve(entries_.size());
    for (const auto& [k, e] : entries_) ids.push_back(k);
    return ids;
}

Matrix PrototypeTable::as_matrix() const {
    Matrix m(dim_, static_cast<Eigen::Index>(entries_.size()));
    Eigen::Index j = 0;
    for (const auto& [k, e] : entries_) m.col(j++) = e.prototype;
    return m;
}

Vector mean_embedding(const EmbeddingDataset& ds, std::span<const std::size_t> records) {
    if (records.empty()) throw DataError("mean_embedding: no records");
    Vector sum = Vector::Zero(ds.dim);
    for (std::size_t i : records) sum += ds.records[i].embedding;
    return sum / static_cast<double>(records.size());
}

PrototypeTable compute_prototypes(const EmbeddingDataset& ds, PrototypeSource source,
                                  std::span<const ClassId> classes) {
    const Split split = source == PrototypeSource::base_train ? Split::base_train : Split::novel_support;
    const ClassRole role = source == PrototypeSource::base_train ? ClassRole::base : ClassRole::novel;
    std::vector<ClassId> wanted(classes.begin(), classes.end());
    if (wanted.empty()) wanted = ds.classes(role);

    std::map<ClassId, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < ds.records.size(); ++i)
        if (ds.records[i].split == split) members[ds.records[i].class_id].push_back(i);

    PrototypeTable table(ds.dim);
    for (ClassId k : wanted) {
        const auto& idx = members[k];
        if (idx.empty())
            throw DataError("class " + std::to_string(k) + " has no records in " + to_string(split));
        table.set(k, {mean_embedding(ds, idx), idx.size()});
    }
    return table;
}

PrototypeTable register_all_prototypes(const EmbeddingDataset& ds) {
    PrototypeTable table = compute_prototypes(ds, PrototypeSource::base_train);
    if (!ds.classes(ClassRole::novel).empty()) table.merge(compute_prototypes(ds, PrototypeSource::novel_support));
    return table;
}

Residual residual(const Vector& x, const Vector& prototype, ClassId candidate) {
    require_same_dim(x, prototype, "residual");
    return {x - prototype, candidate};
}

void save_prototypes(const PrototypeTable& table, const std::filesystem::path& path) {
    EmbeddingDataset ds;
    ds.dim = table.dim();
    std::uint32_t max_id = 0;
    nlohmann::json counts = nlohmann::json::object();
    for (ClassId k : table.class_ids()) {
        ds.records.push_back({table.at(k), k, std::nullopt, 0});
        max_id = std::max(max_id, k);
        counts[std::to_string(k)] = table.entry(k).sample_count;
    }
    ds.n_classes = table.empty() ? 0 : max_id + 1;
    write_file_atomic(path, encode_dataset(ds));
    nlohmann::json m;
    m["source"] = "prototypes";
    m["sample_counts"] = counts;
    write_file_atomic(manifest_path(path), m.dump(2) + "\n");
}

PrototypeTable load_prototypes(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    const EmbeddingDataset ds = decode_dataset(bytes);
    nlohmann::json counts = nlohmann::json::object();
    if (std::filesystem::exists(manifest_path(path))) {
        const auto text = read_file(manifest_path(path));
        try {
            counts = nlohmann::json::parse(text.begin(), text.end()).value("sample_counts", nlohmann::json::object());
        } catch (const nlohmann::json::exception& e) {
            throw LoadError(LoadErrorKind::malformed, std::string("prototype manifest: ") + e.what());
        }
    }
    PrototypeTable table(ds.dim);
    for (const auto& r : ds.records) {
        const auto key = std::to_string(r.class_id);
        table.set(r.class_id, {r.embedding, counts.value(key, std::size_t{0})});
    }
    return table;
}

}  // namespace gen1s
