#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "gen1s/data/dataset.hpp"

namespace gen1s {

struct ResidualMode {
    Vector offset;
    double scale = 1.0;  // isotropic standard deviation
    double weight = 1.0;
};

struct SynthSpec {
    Eigen::Index dim = 16;
    std::uint32_t n_base = 8;
    std::uint32_t n_novel = 4;
    std::uint32_t samples_per_class = 400;
    double prototype_dispersion = 5.0;  // minimum pairwise prototype distance
    double prototype_scale = 1.0;       // per-coordinate std of prototype draws
    std::vector<ResidualMode> modes;
    bool shared_structure = true;  // false: each class gets its own randomly rotated mixture
    std::uint64_t seed = 0;

    std::uint32_t n_classes() const { return n_base + n_novel; }
    // Weights sum to 1, dispersion > 4 x the largest mode scale, shapes agree.
    void validate() const;
};

// "fig1-bimodal": two modes at +-3u, u = (1,...,1)/sqrt(d), scale 0.5, 8 base + 4 novel classes.
// "fig1-null": the same mixture, independently rotated per class.
// "unimodal": one mode at 0, 8 base + 40 novel classes.
SynthSpec synth_preset(std::string_view name, std::uint64_t seed);

// Generating parameters kept for the oracles.
struct SynthOracle {
    SynthSpec spec;
    Matrix prototypes;  // d x K, column k = mu_k
    std::vector<std::vector<ResidualMode>> class_modes;
};

struct SynthResult {
    EmbeddingDataset pool;  // unsplit, class ids 0..K-1, base classes first; values are binary32-exact
    SynthOracle oracle;
};

SynthResult generate(const SynthSpec& spec);

// Split with base classes [0, n_base), novel classes after them, one shot, 20 % base test.
SplitSpec synth_split(const SynthSpec& spec, std::uint32_t shots = 1);

struct OraclePosterior {
    std::vector<ClassId> classes;
    Vector posterior;
    ClassId map = 0;
};

// Exact mixture posterior under a uniform class prior. `candidates` empty means every class.
OraclePosterior bayes_oracle(const SynthOracle& oracle, const Vector& x, std::span<const ClassId> candidates = {});

// Accuracy of the MAP label over the records of one split.
double bayes_oracle_accuracy(const SynthOracle& oracle, const EmbeddingDataset& ds, Split split);

// Monte-Carlo novel-query accuracy of euclidean NCM under the generating law: each trial draws fresh
// `shots`-sample novel supports and queries; base prototypes sit at their expected value.
double oracle_ncm_accuracy(const SynthOracle& oracle, std::uint32_t shots, std::size_t trials,
                           std::size_t queries_per_class, std::uint64_t seed);

nlohmann::json to_json(const SynthOracle& oracle);
SynthOracle oracle_from_json(const nlohmann::json& j);

}  // namespace gen1s
