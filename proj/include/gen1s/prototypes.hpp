#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "gen1s/core/types.hpp"
#include "gen1s/data/dataset.hpp"

namespace gen1s {

enum class PrototypeSource { base_train, novel_support };

struct PrototypeEntry {
    Vector prototype;
    std::size_t sample_count = 0;
};

// Per-class mean embeddings c_k.
class PrototypeTable {
public:
    PrototypeTable() = default;
    explicit PrototypeTable(Eigen::Index dim) : dim_(dim) {}

    void set(ClassId k, PrototypeEntry entry);
    // Inserts every entry of `other`, overwriting shared ids.
    void merge(const PrototypeTable& other);

    bool contains(ClassId k) const { return entries_.count(k) > 0; }
    const Vector& at(ClassId k) const;
    const PrototypeEntry& entry(ClassId k) const;
    std::vector<ClassId> class_ids() const;
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    Eigen::Index dim() const { return dim_; }

    // Prototypes as columns, in ascending class id order.
    Matrix as_matrix() const;

private:
    Eigen::Index dim_ = 0;
    std::map<ClassId, PrototypeEntry> entries_;
};

// Means over the records of `source`. `classes` empty means every class with that role.
PrototypeTable compute_prototypes(const EmbeddingDataset& ds, PrototypeSource source,
                                  std::span<const ClassId> classes = {});

// Base prototypes over the full base_train plus novel prototypes from the support set.
PrototypeTable register_all_prototypes(const EmbeddingDataset& ds);

// Mean of the columns listed in `records` of `ds`.
Vector mean_embedding(const EmbeddingDataset& ds, std::span<const std::size_t> records);

struct Residual {
    Vector v;
    ClassId candidate_class = 0;
};

Residual residual(const Vector& x, const Vector& prototype, ClassId candidate = 0);

// Stored as a G1SE file, one record per class; sample counts go to the manifest sidecar.
void save_prototypes(const PrototypeTable& table, const std::filesystem::path& path);
PrototypeTable load_prototypes(const std::filesystem::path& path);

}  // namespace gen1s
