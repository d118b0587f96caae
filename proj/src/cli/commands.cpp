#include <chrono>
#include <ctime>
#include <sstream>

#include "gen1s/analysis.hpp"
#include "gen1s/cli.hpp"
#include "gen1s/data/file_io.hpp"
#include "gen1s/error.hpp"
#include "gen1s/eval.hpp"
#include "gen1s/synth.hpp"

namespace gen1s {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t require_seed(const RunConfig& cfg) {
    if (!cfg.seed) throw ConfigError("a seed is required (--seed or \"seed\" in the config)");
    return *cfg.seed;
}

fs::path split_sidecar(const fs::path& data) { return fs::path(data.string() + ".split.json"); }

void write_json(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

void write_run_meta(const RunConfig& cfg) {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    write_json(cfg.out / "run_meta.json", {{"command", to_string(cfg.command)}, {"finished_at", buf}});
}

EmbeddingDataset load_split_dataset(const RunConfig& cfg, std::uint64_t seed) {
    if (cfg.data.empty()) throw ConfigError("--data is required");
    const EmbeddingDataset pool = load_dataset(cfg.data);
    SplitSpec spec = cfg.split;
    if (spec.n_base_classes == 0) {
        const fs::path side = split_sidecar(cfg.data);
        if (!fs::exists(side)) throw ConfigError("no split given and no " + side.filename().string() + " sidecar");
        const auto bytes = read_file(side);
        try {
            const json j = json::parse(bytes.begin(), bytes.end());
            spec.n_base_classes = j.at("n_base").get<std::uint32_t>();
            spec.n_novel_classes = j.at("n_novel").get<std::uint32_t>();
            if (j.contains("shots") && cfg.split.shots == SplitSpec{}.shots) spec.shots = j.at("shots").get<std::uint32_t>();
        } catch (const json::exception& e) {
            throw LoadError(LoadErrorKind::malformed, "split sidecar: " + std::string(e.what()));
        }
    }
    spec.seed = seed;
    return apply_split(pool, spec);
}

GenerativeHead make_head(const RunConfig& cfg, Eigen::Index dim, std::uint64_t seed) {
    Rng init(seed, "init");
    if (cfg.head_kind == "vae") {
        VaeConfig v = cfg.vae;
        v.conditioned = cfg.conditioned;
        return make_vae_head(dim, v, init);
    }
    if (cfg.head_kind == "diffusion") {
        DiffusionConfig d = cfg.diffusion;
        d.conditioned = cfg.conditioned;
        return make_diffusion_head(dim, d, init);
    }
    throw ConfigError("unknown head kind '" + cfg.head_kind + "'");
}

TrainResult train_from_config(const RunConfig& cfg, const EmbeddingDataset& ds, std::uint64_t seed,
                              const fs::path& log_dir) {
    EpisodeSpec spec = cfg.episodes;
    spec.seed = seed;
    TrainOptions opt;
    opt.adam = cfg.adam;
    opt.log_window = cfg.log_window;
    opt.checkpoint_every = cfg.checkpoint_every;
    opt.checkpoint_dir = log_dir / "checkpoints";
    fs::create_directories(opt.checkpoint_dir);
    std::ostringstream lines;
    opt.on_log = [&](const TrainLogEntry& e) {
        lines << json{{"episode", e.episode}, {"window_loss", e.window_loss}, {"wall_seconds", e.wall_seconds}}.dump()
              << '\n';
    };
    TrainResult r = train_head(ds, spec, make_head(cfg, ds.dim, seed), opt);
    write_file_atomic(log_dir / "trainlog.jsonl", lines.str());
    return r;
}

// Applies inference-time overrides from the config to a loaded head.
GenerativeHead with_inference_settings(GenerativeHead head, const RunConfig& cfg) {
    if (auto* d = std::get_if<DiffusionHead>(&head)) {
        d->noise_draws_per_timestep = cfg.diffusion.noise_draws_per_timestep;
        d->inference_timesteps = cfg.diffusion.inference_timesteps;
        d->validate();
    } else {
        auto& v = std::get<VaeHead>(head);
        v.inference_samples = cfg.vae.inference_samples;
        v.validate();
    }
    return head;
}

const GenerativeHead* head_for(ClassifierKind kind, const std::vector<GenerativeHead>& heads) {
    const bool want_vae = kind == ClassifierKind::gen1s_vae;
    for (const auto& h : heads)
        if (std::holds_alternative<VaeHead>(h) == want_vae) return &h;
    return nullptr;
}

json evaluate_one(ClassifierKind kind, const EmbeddingDataset& ds, const std::vector<GenerativeHead>& heads,
                  std::uint64_t seed, std::vector<PredictionRow>* rows) {
    const GenerativeHead* head = nullptr;
    if (kind == ClassifierKind::gen1s_vae || kind == ClassifierKind::gen1s_diffusion) {
        head = head_for(kind, heads);
        if (!head) throw ConfigError(std::string(to_string(kind)) + " needs a matching --head-file");
    }
    const auto clf = build_classifier(kind, ds, head, seed);
    json j = to_json(evaluate(*clf, ds, seed, rows));
    if (head) j["conditioned"] = head_conditioned(*head);
    return j;
}

void cmd_synth(const RunConfig& cfg) {
    const std::uint64_t seed = require_seed(cfg);
    const SynthSpec spec = synth_preset(cfg.preset, seed);
    const SynthResult r = generate(spec);
    const fs::path data = cfg.out / "dataset.g1se";
    save_dataset(r.pool, data);
    write_json(split_sidecar(data), {{"n_base", spec.n_base}, {"n_novel", spec.n_novel}, {"shots", 1}});
    write_json(cfg.out / "oracle.json", to_json(r.oracle));
}

void cmd_train(const RunConfig& cfg) {
    const std::uint64_t seed = require_seed(cfg);
    const EmbeddingDataset ds = load_split_dataset(cfg, seed);
    const TrainResult r = train_from_config(cfg, ds, seed, cfg.out);
    save_head(r.head, cfg.out / "head.ckpt");
    save_prototypes(r.prototypes, cfg.out / "prototypes.g1se");
}

void cmd_eval(const RunConfig& cfg) {
    const std::uint64_t seed = require_seed(cfg);
    const EmbeddingDataset ds = load_split_dataset(cfg, seed);
    std::vector<GenerativeHead> heads;
    for (const auto& p : cfg.heads) heads.push_back(with_inference_settings(load_head(p), cfg));

    json reports = json::array();
    for (ClassifierKind kind : cfg.classifiers) {
        std::vector<PredictionRow> rows;
        reports.push_back(evaluate_one(kind, ds, heads, seed, &rows));
        const std::string name =
            cfg.classifiers.size() == 1 ? "predictions.csv" : std::string("predictions_") + to_string(kind) + ".csv";
        write_file_atomic(cfg.out / name, predictions_csv(rows, cfg.with_scores));
    }
    write_json(cfg.out / "report.json", {{"command", "eval"}, {"seed", seed}, {"reports", reports}});
}

void cmd_analyze(const RunConfig& cfg) {
    const std::uint64_t seed = require_seed(cfg);
    const EmbeddingDataset ds = load_split_dataset(cfg, seed);
    const PrototypeTable base = compute_prototypes(ds, PrototypeSource::base_train);
    TransportOptions topt = cfg.transport;
    topt.seed = seed;
    const TransportReport tr = base_vs_gauss(ds, base, topt);
    write_json(cfg.out / "transport.json", to_json(tr));

    const ResidualNormReport hist = residual_norm_histogram(ds, register_all_prototypes(ds), cfg.hist_bins);
    write_file_atomic(cfg.out / "hist_correct.csv", histogram_csv(hist.correct));
    write_file_atomic(cfg.out / "hist_incorrect.csv", histogram_csv(hist.incorrect));
    write_file_atomic(cfg.out / "hist_residual_norms.svg",
                      svg_histograms({{"correct prototype", hist.correct}, {"incorrect prototypes", hist.incorrect}},
                                     "residual norms"));

    // PCA over residuals of a few novel classes and their closest base classes.
    std::vector<TransportClass> picked = tr.classes;
    Rng pick(seed, "pca-classes");
    for (std::size_t i = 0; i + 1 < picked.size(); ++i)
        std::swap(picked[i], picked[static_cast<std::size_t>(pick.uniform_int(static_cast<std::int64_t>(i),
                                                                               static_cast<std::int64_t>(picked.size() - 1)))]);
    picked.resize(std::min(picked.size(), cfg.pca_classes));
    std::vector<std::pair<ClassId, std::string>> groups;
    for (const auto& tc : picked) {
        groups.emplace_back(tc.novel_class, "novel");
        groups.emplace_back(tc.nearest_base, "base");
    }
    std::vector<Vector> cols;
    std::vector<std::size_t> group_of;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const ClassId k = groups[g].first;
        std::vector<std::size_t> idx;
        if (groups[g].second == "base") {
            idx = ds.indices(Split::base_train, k);
        } else {
            idx = ds.indices(Split::novel_support, k);
            const auto q = ds.indices(Split::novel_query, k);
            idx.insert(idx.end(), q.begin(), q.end());
        }
        const Vector c = mean_embedding(ds, idx);
        for (std::size_t i : idx) {
            cols.push_back(ds.records[i].embedding - c);
            group_of.push_back(g);
        }
    }
    Matrix samples(ds.dim, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) samples.col(static_cast<Eigen::Index>(j)) = cols[j];
    const PcaResult pca = pca_project(samples, 2);
    std::ostringstream csv;
    csv.precision(17);
    csv << "class_id,role,pc1,pc2\n";
    std::vector<ScatterSeries> series(groups.size());
    std::vector<std::vector<Eigen::Index>> members(groups.size());
    for (std::size_t j = 0; j < cols.size(); ++j) {
        const auto& g = groups[group_of[j]];
        csv << g.first << ',' << g.second << ',' << pca.coordinates(0, static_cast<Eigen::Index>(j)) << ','
            << pca.coordinates(1, static_cast<Eigen::Index>(j)) << '\n';
        members[group_of[j]].push_back(static_cast<Eigen::Index>(j));
    }
    for (std::size_t g = 0; g < groups.size(); ++g) {
        series[g].label = groups[g].second + " " + std::to_string(groups[g].first);
        series[g].points = pca.coordinates(Eigen::all, members[g]);
    }
    write_file_atomic(cfg.out / "pca_residuals.csv", csv.str());
    write_file_atomic(cfg.out / "pca_residuals.svg", svg_scatter(series, "residual PCA"));

    write_json(cfg.out / "analysis.json",
               {{"seed", seed},
                {"fraction_base_closer", tr.fraction_base_closer},
                {"mean_base", tr.mean_base},
                {"mean_gauss", tr.mean_gauss},
                {"residual_norms",
                 {{"mean_correct", hist.mean_correct}, {"mean_incorrect", hist.mean_incorrect}, {"overlap", hist.overlap}}},
                {"pca_explained_variance_ratio", {pca.explained_variance_ratio[0], pca.explained_variance_ratio[1]}}});
}

bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ConfigError("expected true/false, got '" + s + "'");
}

int parse_int(const std::string& s) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError("expected an integer, got '" + s + "'");
}

void cmd_sweep(const RunConfig& cfg) {
    const std::uint64_t seed = require_seed(cfg);
    if (cfg.sweep_values.empty()) throw ConfigError("sweep needs --values");
    const EmbeddingDataset ds = load_split_dataset(cfg, seed);
    const ClassifierKind kind = cfg.head_kind == "vae" ? ClassifierKind::gen1s_vae : ClassifierKind::gen1s_diffusion;

    json points = json::array();
    auto record = [&](const std::string& value, json report) {
        const std::string tag = cfg.sweep_param + "_" + value;
        write_json(cfg.out / ("report_" + tag + ".json"), {{"command", "sweep"}, {"seed", seed}, {"reports", {report}}});
        points.push_back({{"value", value}, {"report", std::move(report)}});
    };

    if (cfg.sweep_param == "noise_draws" || cfg.sweep_param == "vae_samples") {
        GenerativeHead base_head;
        if (!cfg.heads.empty()) {
            base_head = load_head(cfg.heads.front());
        } else {
            base_head = train_from_config(cfg, ds, seed, cfg.out).head;
        }
        const bool vae = std::holds_alternative<VaeHead>(base_head);
        if (vae != (cfg.sweep_param == "vae_samples"))
            throw ConfigError("sweep " + cfg.sweep_param + " does not apply to a " + head_kind(base_head) + " head");
        for (const auto& value : cfg.sweep_values) {
            GenerativeHead h = base_head;
            const int n = parse_int(value);
            if (vae) {
                std::get<VaeHead>(h).inference_samples = n;
                std::get<VaeHead>(h).validate();
            } else {
                std::get<DiffusionHead>(h).noise_draws_per_timestep = n;
                std::get<DiffusionHead>(h).validate();
            }
            record(value, evaluate_one(vae ? ClassifierKind::gen1s_vae : ClassifierKind::gen1s_diffusion, ds, {h}, seed,
                                       nullptr));
        }
    } else if (cfg.sweep_param == "conditioned") {
        for (const auto& value : cfg.sweep_values) {
            RunConfig point = cfg;
            point.conditioned = parse_bool(value);
            const fs::path dir = cfg.out / ("conditioned_" + value);
            fs::create_directories(dir);
            const TrainResult r = train_from_config(point, ds, seed, dir);
            save_head(r.head, dir / "head.ckpt");
            record(value, evaluate_one(kind, ds, {r.head}, seed, nullptr));
        }
    } else {
        throw ConfigError("unknown sweep parameter '" + cfg.sweep_param + "' (noise_draws|vae_samples|conditioned)");
    }
    write_json(cfg.out / "sweep.json", {{"param", cfg.sweep_param}, {"seed", seed}, {"points", points}});
}

}  // namespace

void run(const RunConfig& cfg) {
    fs::create_directories(cfg.out);
    switch (cfg.command) {
        case Command::synth: cmd_synth(cfg); break;
        case Command::train: cmd_train(cfg); break;
        case Command::eval: cmd_eval(cfg); break;
        case Command::analyze: cmd_analyze(cfg); break;
        case Command::sweep: cmd_sweep(cfg); break;
    }
    write_run_meta(cfg);
}

}  // namespace gen1s
