#include <algorithm>
#include <cmath>
#include <numeric>

#include "gen1s/core/rng.hpp"
#include "gen1s/data/dataset.hpp"
#include "gen1s/error.hpp"

namespace gen1s {

EmbeddingDataset apply_split(const EmbeddingDataset& pool, const SplitSpec& spec) {
    if (spec.shots < 1) throw ConfigError("split: shots must be >= 1");
    if (!(spec.query_fraction > 0.0 && spec.query_fraction < 1.0))
        throw ConfigError("split: query_fraction must lie in (0, 1)");
    if (spec.n_base_classes + spec.n_novel_classes > pool.n_classes)
        throw SplitError("split: requested " + std::to_string(spec.n_base_classes) + " base + " +
                         std::to_string(spec.n_novel_classes) + " novel classes, pool has " +
                         std::to_string(pool.n_classes));
    if (spec.n_base_classes == 0) throw ConfigError("split: need at least one base class");

    Rng rng(spec.seed, "split");

    std::vector<ClassId> order(pool.n_classes);
    std::iota(order.begin(), order.end(), ClassId{0});
    if (spec.shuffle_classes) std::shuffle(order.begin(), order.end(), rng.engine());

    EmbeddingDataset out;
    out.dim = pool.dim;
    out.n_classes = pool.n_classes;
    out.shots = spec.shots;
    out.manifest = pool.manifest;
    for (std::uint32_t i = 0; i < spec.n_base_classes; ++i) out.registry[order[i]] = ClassRole::base;
    for (std::uint32_t i = 0; i < spec.n_novel_classes; ++i)
        out.registry[order[spec.n_base_classes + i]] = ClassRole::novel;

    std::map<ClassId, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < pool.records.size(); ++i) members[pool.records[i].class_id].push_back(i);

    // Assign roles class by class in ascending id so the stream consumption is fixed.
    std::vector<std::optional<Split>> role(pool.records.size());
    for (const auto& [k, class_role] : out.registry) {
        auto idx = members[k];
        std::shuffle(idx.begin(), idx.end(), rng.engine());
        if (class_role == ClassRole::base) {
            if (idx.size() < 2)
                throw SplitError("split: base class " + std::to_string(k) + " has " + std::to_string(idx.size()) +
                                 " samples, need >= 2");
            auto n_test = static_cast<std::size_t>(std::llround(spec.query_fraction * static_cast<double>(idx.size())));
            n_test = std::clamp<std::size_t>(n_test, 1, idx.size() - 1);
            for (std::size_t j = 0; j < idx.size(); ++j) role[idx[j]] = j < n_test ? Split::base_test : Split::base_train;
        } else {
            if (idx.size() < spec.shots)
                throw SplitError("split: novel class " + std::to_string(k) + " has " + std::to_string(idx.size()) +
                                 " samples, need >= " + std::to_string(spec.shots) + " support samples");
            if (idx.size() == spec.shots)
                out.warnings.push_back("novel class " + std::to_string(k) + " has no query records");
            for (std::size_t j = 0; j < idx.size(); ++j)
                role[idx[j]] = j < spec.shots ? Split::novel_support : Split::novel_query;
        }
    }

    for (std::size_t i = 0; i < pool.records.size(); ++i) {
        if (!role[i]) continue;  // class not selected
        Record r = pool.records[i];
        r.split = role[i];
        r.origin = i;
        out.records.push_back(std::move(r));
    }
    out.validate();
    return out;
}

}  // namespace gen1s
