#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"

#include "gen1s/cli.hpp"
#include "gen1s/error.hpp"

namespace gen1s {

namespace {

using nlohmann::json;

constexpr std::pair<Command, const char*> kCommands[] = {
    {Command::synth, "synth"}, {Command::train, "train"}, {Command::eval, "eval"},
    {Command::analyze, "analyze"}, {Command::sweep, "sweep"},
};

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* where) {
    if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : j.items())
        if (!ok.count(key)) throw ConfigError("unknown config key '" + std::string(where) + "." + key + "'");
}

template <class T>
void take(const json& j, const char* key, T& dst) {
    if (j.contains(key)) dst = j.at(key).get<T>();
}

void apply_width_preset(RunConfig& cfg, const std::string& name) {
    if (name == "desk") {
        cfg.vae.hidden_width = 128;
        cfg.vae.hidden_layers = 2;
        cfg.diffusion.hidden_width = 128;
        cfg.diffusion.hidden_layers = 3;
    } else if (name == "paper-1m") {
        cfg.vae.hidden_width = 384;
        cfg.vae.hidden_layers = 2;
        cfg.diffusion.hidden_width = 512;
        cfg.diffusion.hidden_layers = 3;
    } else {
        throw ConfigError("unknown width preset '" + name + "'");
    }
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::vector<ClassifierKind> parse_classifiers(const std::vector<std::string>& names) {
    std::vector<ClassifierKind> out;
    for (const auto& n : names) out.push_back(parse_classifier_kind(n));
    if (out.empty()) throw ConfigError("classifier list is empty");
    return out;
}

int exit_code_for(const std::exception& e, std::string& kind) {
    if (dynamic_cast<const NumericError*>(&e)) return kind = "numeric", 3;
    if (dynamic_cast<const LoadError*>(&e) || dynamic_cast<const DataError*>(&e) ||
        dynamic_cast<const IoError*>(&e))
        return kind = "data", 2;
    return kind = "config", 1;
}

std::string one_line(std::string s) {
    for (char& c : s)
        if (c == '\n' || c == '\r') c = ' ';
    return s;
}

}  // namespace

Command parse_command(std::string_view name) {
    for (const auto& [c, text] : kCommands)
        if (name == text) return c;
    throw ConfigError("unknown command '" + std::string(name) + "'");
}

const char* to_string(Command c) {
    for (const auto& [k, text] : kCommands)
        if (k == c) return text;
    return "?";
}

void apply_config_json(RunConfig& cfg, const json& j) {
    try {
        check_keys(j, {"seed", "data", "out", "heads", "preset", "split", "head", "episodes", "optimizer", "train",
                       "classifiers", "with_scores", "analysis", "sweep"},
                   "config");
        if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("data")) cfg.data = j.at("data").get<std::string>();
        if (j.contains("out")) cfg.out = j.at("out").get<std::string>();
        if (j.contains("heads")) {
            cfg.heads.clear();
            for (const auto& h : j.at("heads")) cfg.heads.emplace_back(h.get<std::string>());
        }
        take(j, "preset", cfg.preset);
        if (j.contains("split")) {
            const json& s = j.at("split");
            check_keys(s, {"n_base", "n_novel", "shots", "query_fraction", "shuffle_classes"}, "split");
            take(s, "n_base", cfg.split.n_base_classes);
            take(s, "n_novel", cfg.split.n_novel_classes);
            take(s, "shots", cfg.split.shots);
            take(s, "query_fraction", cfg.split.query_fraction);
            take(s, "shuffle_classes", cfg.split.shuffle_classes);
        }
        if (j.contains("head")) {
            const json& h = j.at("head");
            check_keys(h, {"kind", "conditioned", "width_preset", "vae", "diffusion"}, "head");
            take(h, "kind", cfg.head_kind);
            take(h, "conditioned", cfg.conditioned);
            if (h.contains("width_preset")) apply_width_preset(cfg, h.at("width_preset").get<std::string>());
            if (h.contains("vae")) {
                const json& v = h.at("vae");
                check_keys(v, {"latent_dim", "hidden_width", "hidden_layers", "decoder_variance", "kl_weight",
                               "inference_samples", "activation"},
                           "head.vae");
                take(v, "latent_dim", cfg.vae.latent_dim);
                take(v, "hidden_width", cfg.vae.hidden_width);
                take(v, "hidden_layers", cfg.vae.hidden_layers);
                take(v, "decoder_variance", cfg.vae.decoder_variance);
                take(v, "kl_weight", cfg.vae.kl_weight);
                take(v, "inference_samples", cfg.vae.inference_samples);
                if (v.contains("activation")) cfg.vae.activation = parse_activation(v.at("activation").get<std::string>());
            }
            if (h.contains("diffusion")) {
                const json& d = h.at("diffusion");
                check_keys(d, {"T", "beta_start", "beta_end", "hidden_width", "hidden_layers", "time_embed_dim",
                               "activation", "inference_timesteps", "noise_draws_per_timestep", "target_rms"},
                           "head.diffusion");
                take(d, "T", cfg.diffusion.T);
                take(d, "beta_start", cfg.diffusion.beta_start);
                take(d, "beta_end", cfg.diffusion.beta_end);
                take(d, "hidden_width", cfg.diffusion.hidden_width);
                take(d, "hidden_layers", cfg.diffusion.hidden_layers);
                take(d, "time_embed_dim", cfg.diffusion.time_embed_dim);
                take(d, "inference_timesteps", cfg.diffusion.inference_timesteps);
                take(d, "noise_draws_per_timestep", cfg.diffusion.noise_draws_per_timestep);
                take(d, "target_rms", cfg.diffusion.target_rms);
                if (d.contains("activation"))
                    cfg.diffusion.activation = parse_activation(d.at("activation").get<std::string>());
            }
        }
        if (j.contains("episodes")) {
            const json& e = j.at("episodes");
            check_keys(e, {"classes_per_episode", "support_per_class", "batch_size", "n_episodes"}, "episodes");
            take(e, "classes_per_episode", cfg.episodes.classes_per_episode);
            take(e, "support_per_class", cfg.episodes.support_per_class);
            take(e, "batch_size", cfg.episodes.batch_size);
            take(e, "n_episodes", cfg.episodes.n_episodes);
        }
        if (j.contains("optimizer")) {
            const json& o = j.at("optimizer");
            check_keys(o, {"learning_rate", "beta1", "beta2", "epsilon"}, "optimizer");
            take(o, "learning_rate", cfg.adam.learning_rate);
            take(o, "beta1", cfg.adam.beta1);
            take(o, "beta2", cfg.adam.beta2);
            take(o, "epsilon", cfg.adam.epsilon);
        }
        if (j.contains("train")) {
            const json& t = j.at("train");
            check_keys(t, {"log_window", "checkpoint_every"}, "train");
            take(t, "log_window", cfg.log_window);
            take(t, "checkpoint_every", cfg.checkpoint_every);
        }
        if (j.contains("classifiers")) cfg.classifiers = parse_classifiers(j.at("classifiers").get<std::vector<std::string>>());
        take(j, "with_scores", cfg.with_scores);
        if (j.contains("analysis")) {
            const json& a = j.at("analysis");
            check_keys(a, {"sample_size", "gauss_draws", "bins", "pca_classes", "shrinkage"}, "analysis");
            take(a, "sample_size", cfg.transport.sample_size);
            take(a, "gauss_draws", cfg.transport.gauss_draws);
            take(a, "bins", cfg.hist_bins);
            take(a, "pca_classes", cfg.pca_classes);
            take(a, "shrinkage", cfg.transport.shrinkage_factor);
        }
        if (j.contains("sweep")) {
            const json& s = j.at("sweep");
            check_keys(s, {"param", "values"}, "sweep");
            take(s, "param", cfg.sweep_param);
            if (s.contains("values")) {
                cfg.sweep_values.clear();
                for (const auto& v : s.at("values")) cfg.sweep_values.push_back(v.is_string() ? v.get<std::string>() : v.dump());
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

int cli_main(int argc, char** argv) {
    CLI::App app{"gen1s: residual generative priors for one-shot class-incremental learning"};
    app.require_subcommand(1, 1);

    // Flag values land in these temporaries; only flags actually given override the config.
    std::string config_path, data, out, preset, head_kind, width_preset, classifiers, sweep_param, sweep_values;
    std::vector<std::string> heads;
    std::uint64_t seed = 0;
    std::int64_t episodes = 0;
    int cpe = 0, support = 0, batch = 0, draws = 0, vae_samples = 0, log_window = 0, ckpt_every = 0;
    std::uint32_t n_base = 0, n_novel = 0, shots = 0;
    double lr = 0.0, target_rms = 0.0;
    Eigen::Index sample_size = 0, latent = 0, hidden = 0;
    std::size_t gauss_draws = 0, bins = 0, pca_classes = 0;
    bool unconditioned = false, with_scores = false;

    std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> overrides;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON run config");
        overrides.emplace_back(sub->add_option("--seed", seed, "root seed"), [&](RunConfig& c) { c.seed = seed; });
        overrides.emplace_back(sub->add_option("--out", out, "output directory"), [&](RunConfig& c) { c.out = out; });
    };
    auto data_opts = [&](CLI::App* sub) {
        overrides.emplace_back(sub->add_option("--data", data, "embedding dataset (.g1se)"),
                               [&](RunConfig& c) { c.data = data; });
        overrides.emplace_back(sub->add_option("--n-base", n_base), [&](RunConfig& c) { c.split.n_base_classes = n_base; });
        overrides.emplace_back(sub->add_option("--n-novel", n_novel), [&](RunConfig& c) { c.split.n_novel_classes = n_novel; });
        overrides.emplace_back(sub->add_option("--shots", shots), [&](RunConfig& c) { c.split.shots = shots; });
    };
    auto train_opts = [&](CLI::App* sub) {
        overrides.emplace_back(sub->add_option("--head", head_kind, "vae|diffusion"), [&](RunConfig& c) { c.head_kind = head_kind; });
        overrides.emplace_back(sub->add_option("--width-preset", width_preset, "desk|paper-1m"),
                               [&](RunConfig& c) { apply_width_preset(c, width_preset); });
        overrides.emplace_back(sub->add_flag("--unconditioned", unconditioned), [&](RunConfig& c) { c.conditioned = !unconditioned; });
        overrides.emplace_back(sub->add_option("--episodes", episodes), [&](RunConfig& c) { c.episodes.n_episodes = episodes; });
        overrides.emplace_back(sub->add_option("--classes-per-episode", cpe),
                               [&](RunConfig& c) { c.episodes.classes_per_episode = cpe; });
        overrides.emplace_back(sub->add_option("--support-per-class", support),
                               [&](RunConfig& c) { c.episodes.support_per_class = support; });
        overrides.emplace_back(sub->add_option("--batch-size", batch), [&](RunConfig& c) { c.episodes.batch_size = batch; });
        overrides.emplace_back(sub->add_option("--lr", lr), [&](RunConfig& c) { c.adam.learning_rate = lr; });
        overrides.emplace_back(sub->add_option("--hidden", hidden), [&](RunConfig& c) {
            c.vae.hidden_width = hidden;
            c.diffusion.hidden_width = hidden;
        });
        overrides.emplace_back(sub->add_option("--latent", latent), [&](RunConfig& c) { c.vae.latent_dim = latent; });
        overrides.emplace_back(sub->add_option("--target-rms", target_rms), [&](RunConfig& c) { c.diffusion.target_rms = target_rms; });
        overrides.emplace_back(sub->add_option("--log-window", log_window), [&](RunConfig& c) { c.log_window = log_window; });
        overrides.emplace_back(sub->add_option("--checkpoint-every", ckpt_every),
                               [&](RunConfig& c) { c.checkpoint_every = ckpt_every; });
    };
    auto inference_opts = [&](CLI::App* sub) {
        overrides.emplace_back(sub->add_option("--noise-draws", draws), [&](RunConfig& c) { c.diffusion.noise_draws_per_timestep = draws; });
        overrides.emplace_back(sub->add_option("--vae-samples", vae_samples), [&](RunConfig& c) { c.vae.inference_samples = vae_samples; });
    };

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic embedding dataset");
    common(synth);
    overrides.emplace_back(synth->add_option("--preset", preset, "fig1-bimodal|fig1-null|unimodal"),
                           [&](RunConfig& c) { c.preset = preset; });

    CLI::App* train = app.add_subcommand("train", "episodic base training of a generative head");
    common(train);
    data_opts(train);
    train_opts(train);

    CLI::App* eval = app.add_subcommand("eval", "evaluate classifiers (BCR/NCR/AVG)");
    common(eval);
    data_opts(eval);
    inference_opts(eval);
    overrides.emplace_back(eval->add_option("--head-file", heads, "trained head checkpoint(s)"),
                           [&](RunConfig& c) { c.heads.assign(heads.begin(), heads.end()); });
    overrides.emplace_back(eval->add_option("--classifiers", classifiers, "comma-separated classifier kinds"),
                           [&](RunConfig& c) { c.classifiers = parse_classifiers(split_list(classifiers)); });
    overrides.emplace_back(eval->add_flag("--scores", with_scores, "include per-class scores in the CSV"),
                           [&](RunConfig& c) { c.with_scores = with_scores; });

    CLI::App* analyze = app.add_subcommand("analyze", "residual structure analyses");
    common(analyze);
    data_opts(analyze);
    overrides.emplace_back(analyze->add_option("--sample-size", sample_size), [&](RunConfig& c) { c.transport.sample_size = sample_size; });
    overrides.emplace_back(analyze->add_option("--gauss-draws", gauss_draws), [&](RunConfig& c) { c.transport.gauss_draws = gauss_draws; });
    overrides.emplace_back(analyze->add_option("--bins", bins), [&](RunConfig& c) { c.hist_bins = bins; });
    overrides.emplace_back(analyze->add_option("--pca-classes", pca_classes), [&](RunConfig& c) { c.pca_classes = pca_classes; });

    CLI::App* sweep = app.add_subcommand("sweep", "grid of evaluations over one parameter");
    common(sweep);
    data_opts(sweep);
    train_opts(sweep);
    inference_opts(sweep);
    overrides.emplace_back(sweep->add_option("--head-file", heads, "trained head checkpoint"),
                           [&](RunConfig& c) { c.heads.assign(heads.begin(), heads.end()); });
    overrides.emplace_back(sweep->add_option("--param", sweep_param, "noise_draws|vae_samples|conditioned"),
                           [&](RunConfig& c) { c.sweep_param = sweep_param; });
    overrides.emplace_back(sweep->add_option("--values", sweep_values, "comma-separated values"),
                           [&](RunConfig& c) { c.sweep_values = split_list(sweep_values); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: config: " << one_line(e.what()) << '\n';
        return 1;
    }

    try {
        RunConfig cfg;
        for (const auto* sub : app.get_subcommands()) cfg.command = parse_command(sub->get_name());
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw ConfigError("cannot open config file " + config_path);
            json j;
            try {
                j = json::parse(in);
            } catch (const json::exception& e) {
                throw ConfigError("config file " + config_path + ": " + e.what());
            }
            apply_config_json(cfg, j);
        }
        for (auto& [opt, apply] : overrides)
            if (opt->count() > 0) apply(cfg);
        run(cfg);
    } catch (const std::exception& e) {
        std::string kind;
        const int code = exit_code_for(e, kind);
        std::cerr << "error: " << kind << ": " << one_line(e.what()) << '\n';
        return code;
    }
    return 0;
}

}  // namespace gen1s
