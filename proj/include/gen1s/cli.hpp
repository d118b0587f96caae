#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "gen1s/classifier.hpp"
#include "gen1s/diffusion_head.hpp"
#include "gen1s/trainer.hpp"
#include "gen1s/transport.hpp"
#include "gen1s/vae_head.hpp"

namespace gen1s {

enum class Command { synth, train, eval, analyze, sweep };

Command parse_command(std::string_view name);
const char* to_string(Command c);

struct RunConfig {
    Command command = Command::synth;
    std::optional<std::uint64_t> seed;
    std::filesystem::path data;
    std::filesystem::path out = ".";
    std::vector<std::filesystem::path> heads;

    std::string preset = "fig1-bimodal";

    // n_base_classes == 0 takes the split from the dataset's ".split.json" sidecar.
    SplitSpec split;

    std::string head_kind = "diffusion";
    bool conditioned = true;
    VaeConfig vae;
    DiffusionConfig diffusion;
    EpisodeSpec episodes;
    AdamConfig adam;
    int log_window = 500;
    int checkpoint_every = 1000;

    std::vector<ClassifierKind> classifiers{ClassifierKind::ncm_euclidean};
    bool with_scores = false;

    TransportOptions transport;
    std::size_t hist_bins = 50;
    std::size_t pca_classes = 4;

    std::string sweep_param;
    std::vector<std::string> sweep_values;
};

// Fields present in `j` override `cfg`; unknown keys are a ConfigError.
void apply_config_json(RunConfig& cfg, const nlohmann::json& j);

// Run one command. Errors propagate as gen1s exceptions.
void run(const RunConfig& cfg);

// Parses argv (config file first, then flags), runs, and maps failures onto exit codes:
// 0 success, 1 configuration, 2 data, 3 numeric. Failures print one "error: <kind>: <message>" line.
int cli_main(int argc, char** argv);

}  // namespace gen1s
