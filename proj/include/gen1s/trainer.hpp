#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "gen1s/core/adam.hpp"
#include "gen1s/data/dataset.hpp"
#include "gen1s/heads.hpp"
#include "gen1s/prototypes.hpp"

namespace gen1s {

struct EpisodeSpec {
    int classes_per_episode = 8;
    int support_per_class = 2;
    int batch_size = 256;
    std::int64_t n_episodes = 51200;
    std::uint64_t seed = 0;

    int query_per_class() const { return batch_size / classes_per_episode; }
    // Throws ConfigError on a malformed spec, DataError when `ds` cannot supply it.
    void validate() const;
    void validate_for(const EmbeddingDataset& ds) const;
};

struct EpisodeClass {
    ClassId class_id = 0;
    std::vector<std::size_t> support;  // record indices into the dataset
    std::vector<std::size_t> query;
};

struct Episode {
    std::vector<EpisodeClass> classes;
};

// Draws episodes from base_train; per-class record lists are built once.
class EpisodeSampler {
public:
    EpisodeSampler(const EmbeddingDataset& ds, const EpisodeSpec& spec);
    Episode next(Rng& rng) const;

private:
    EpisodeSpec spec_;
    std::vector<ClassId> classes_;
    std::vector<std::vector<std::size_t>> members_;
};

Episode sample_episode(const EmbeddingDataset& ds, const EpisodeSpec& spec, Rng& rng);

struct TrainLogEntry {
    std::int64_t episode = 0;  // number of episodes completed
    double window_loss = 0.0;  // mean over the trailing window
    double wall_seconds = 0.0;
};

struct TrainLog {
    std::vector<double> episode_losses;
    std::vector<TrainLogEntry> entries;
    std::int64_t best_episode = -1;
    double best_window_loss = 0.0;
};

struct TrainOptions {
    AdamConfig adam;
    int log_window = 500;
    int checkpoint_every = 1000;
    // When set, receives last.ckpt and best.ckpt; last_good.ckpt is written before a divergence abort.
    std::filesystem::path checkpoint_dir;
    std::function<void(const TrainLogEntry&)> on_log;
};

struct TrainResult {
    GenerativeHead head;
    PrototypeTable prototypes;  // over the full base_train
    TrainLog log;
};

// Episodic base training: episode prototypes from supports, residuals of queries, one Adam step
// per episode on the batch-mean loss. Throws TrainingError on a non-finite loss.
TrainResult train_head(const EmbeddingDataset& ds, const EpisodeSpec& spec, GenerativeHead head,
                       const TrainOptions& options = {});

// Batch-mean loss of `head` on residuals of `records` against `prototypes`, with fixed noise from `seed`.
double evaluate_head_loss(const GenerativeHead& head, const EmbeddingDataset& ds, const PrototypeTable& prototypes,
                          std::span<const std::size_t> records, std::uint64_t seed);

// sqrt(mean squared residual coordinate) of base_train against its own class means.
double base_residual_rms(const EmbeddingDataset& ds, const PrototypeTable& prototypes);

}  // namespace gen1s
