#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "gradcheck.hpp"
#include "json.hpp"

#include "gen1s/cli.hpp"
#include "gen1s/data/file_io.hpp"
#include "gen1s/error.hpp"

using namespace gen1s;
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int code = -1;
    std::string stderr_text;
};

RunResult run_cli(const std::string& args, const fs::path& dir) {
    const fs::path err = dir / "stderr.txt";
    const std::string cmd = std::string("\"") + GEN1S_CLI_PATH + "\" " + args + " > /dev/null 2> \"" + err.string() + "\"";
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(err);
    std::stringstream ss;
    ss << in.rdbuf();
    r.stderr_text = ss.str();
    return r;
}

std::string slurp(const fs::path& p) {
    const auto bytes = read_file(p);
    return std::string(bytes.begin(), bytes.end());
}

// One small synthetic dataset and trained head shared by the CLI cases.
struct Workspace {
    fs::path root;
    fs::path data;
    fs::path head;

    Workspace() : root(testing::scratch_dir("cli")) {
        REQUIRE(run_cli("synth --seed 3 --out " + (root / "synth").string(), root).code == 0);
        data = root / "synth" / "dataset.g1se";
        REQUIRE(run_cli("train --seed 3 --data " + data.string() + " --out " + (root / "train").string() +
                            " --episodes 20 --hidden 16 --batch-size 64 --checkpoint-every 10",
                        root)
                    .code == 0);
        head = root / "train" / "head.ckpt";
    }
};

const Workspace& workspace() {
    static const Workspace ws;
    return ws;
}

}  // namespace

TEST_CASE("synth and train write their artifacts") {
    const Workspace& ws = workspace();
    CHECK(fs::exists(ws.data));
    CHECK(fs::exists(ws.root / "synth" / "dataset.g1se.split.json"));
    CHECK(fs::exists(ws.root / "synth" / "oracle.json"));
    CHECK(fs::exists(ws.head));
    CHECK(fs::exists(ws.root / "train" / "prototypes.g1se"));
    CHECK(fs::exists(ws.root / "train" / "checkpoints" / "last.ckpt"));
    const std::string log = slurp(ws.root / "train" / "trainlog.jsonl");
    CHECK(std::count(log.begin(), log.end(), '\n') == 2);
    CHECK(nlohmann::json::parse(log.substr(0, log.find('\n')))["episode"] == 10);
}

TEST_CASE("eval writes a report and per-classifier predictions") {
    const Workspace& ws = workspace();
    const fs::path out = ws.root / "eval";
    const RunResult r = run_cli("eval --seed 3 --data " + ws.data.string() + " --head-file " + ws.head.string() +
                                    " --classifiers gen1s_diffusion,ncm_euclidean,slda --scores --out " + out.string(),
                                ws.root);
    REQUIRE(r.code == 0);
    const auto report = nlohmann::json::parse(slurp(out / "report.json"));
    REQUIRE(report["reports"].size() == 3);
    CHECK(report["reports"][0]["classifier"] == "gen1s_diffusion");
    for (const auto& rep : report["reports"]) {
        CHECK(rep["bcr"].get<double>() >= 0.0);
        CHECK(rep["avg"].get<double>() == doctest::Approx((rep["bcr"].get<double>() + rep["ncr"].get<double>()) / 2));
    }
    CHECK(fs::exists(out / "predictions_ncm_euclidean.csv"));
    const std::string csv = slurp(out / "predictions_gen1s_diffusion.csv");
    CHECK(csv.rfind("query_index,true_class,predicted_class,score_0,", 0) == 0);
}

TEST_CASE("repeated eval runs give byte-identical reports") {
    const Workspace& ws = workspace();
    const std::string args = "eval --seed 5 --data " + ws.data.string() + " --head-file " + ws.head.string() +
                             " --classifiers gen1s_diffusion --out ";
    REQUIRE(run_cli(args + (ws.root / "rep_a").string(), ws.root).code == 0);
    REQUIRE(run_cli(args + (ws.root / "rep_b").string(), ws.root).code == 0);
    CHECK(slurp(ws.root / "rep_a" / "report.json") == slurp(ws.root / "rep_b" / "report.json"));
    CHECK(slurp(ws.root / "rep_a" / "predictions.csv") == slurp(ws.root / "rep_b" / "predictions.csv"));
}

TEST_CASE("analyze writes transport, histogram and PCA outputs") {
    const Workspace& ws = workspace();
    const fs::path out = ws.root / "analyze";
    REQUIRE(run_cli("analyze --seed 1 --data " + ws.data.string() + " --sample-size 32 --out " + out.string(), ws.root)
                .code == 0);
    for (const char* f : {"transport.json", "hist_correct.csv", "hist_incorrect.csv", "hist_residual_norms.svg",
                          "pca_residuals.csv", "pca_residuals.svg", "analysis.json"})
        CHECK(fs::exists(out / f));
    const auto t = nlohmann::json::parse(slurp(out / "transport.json"));
    CHECK(t["sample_size"] == 32);
    CHECK(t["classes"].size() == 4);
}

TEST_CASE("sweep over inference noise draws") {
    const Workspace& ws = workspace();
    const fs::path out = ws.root / "sweep";
    REQUIRE(run_cli("sweep --seed 3 --data " + ws.data.string() + " --head-file " + ws.head.string() +
                        " --param noise_draws --values 1,2 --out " + out.string(),
                    ws.root)
                .code == 0);
    const auto s = nlohmann::json::parse(slurp(out / "sweep.json"));
    CHECK(s["points"].size() == 2);
    CHECK(fs::exists(out / "report_noise_draws_2.json"));
}

TEST_CASE("configuration errors exit with 1") {
    const Workspace& ws = workspace();
    RunResult r = run_cli("train --seed 1 --out " + (ws.root / "x").string(), ws.root);
    CHECK(r.code == 1);
    CHECK(r.stderr_text.rfind("error: config:", 0) == 0);

    r = run_cli("eval --seed 1 --data " + ws.data.string() + " --classifiers knn --out " + (ws.root / "x").string(),
                ws.root);
    CHECK(r.code == 1);

    std::ofstream(ws.root / "bad.json") << R"({"episodes": {"n_episodes": 1, "bogus": 2}})";
    r = run_cli("train --config " + (ws.root / "bad.json").string() + " --seed 1 --data " + ws.data.string(), ws.root);
    CHECK(r.code == 1);
    CHECK(r.stderr_text.find("bogus") != std::string::npos);

    CHECK(run_cli("frobnicate", ws.root).code == 1);
}

TEST_CASE("data errors exit with 2") {
    const Workspace& ws = workspace();
    RunResult r = run_cli("train --seed 1 --data " + (ws.root / "missing.g1se").string(), ws.root);
    CHECK(r.code == 2);

    const fs::path bad = ws.root / "corrupt" / "dataset.g1se";
    fs::create_directories(bad.parent_path());
    auto bytes = read_file(ws.data);
    bytes[100] ^= 0xff;
    write_file_atomic(bad, bytes);
    fs::copy_file(fs::path(ws.data.string() + ".split.json"), fs::path(bad.string() + ".split.json"));
    r = run_cli("train --seed 1 --episodes 1 --data " + bad.string() + " --out " + (ws.root / "x").string(), ws.root);
    CHECK(r.code == 2);
    CHECK(r.stderr_text.find("checksum") != std::string::npos);
    CHECK(std::count(r.stderr_text.begin(), r.stderr_text.end(), '\n') == 1);
}

TEST_CASE("numeric divergence exits with 3") {
    const Workspace& ws = workspace();
    const RunResult r = run_cli("train --seed 1 --data " + ws.data.string() + " --out " + (ws.root / "div").string() +
                                    " --episodes 50 --hidden 16 --batch-size 64 --lr 1e300",
                                ws.root);
    CHECK(r.code == 3);
    CHECK(fs::exists(ws.root / "div" / "checkpoints" / "last_good.ckpt"));
}

TEST_CASE("config JSON fields override defaults") {
    RunConfig cfg;
    apply_config_json(cfg, nlohmann::json::parse(R"({
        "seed": 9,
        "episodes": {"n_episodes": 7, "classes_per_episode": 4},
        "head": {"kind": "vae", "width_preset": "paper-1m", "conditioned": false},
        "classifiers": ["slda", "simpleshot"]
    })"));
    CHECK(cfg.seed == 9u);
    CHECK(cfg.episodes.n_episodes == 7);
    CHECK(cfg.episodes.classes_per_episode == 4);
    CHECK(cfg.head_kind == "vae");
    CHECK(cfg.vae.hidden_width == 384);
    CHECK(cfg.diffusion.hidden_width == 512);
    CHECK_FALSE(cfg.conditioned);
    CHECK(cfg.classifiers == std::vector<ClassifierKind>{ClassifierKind::slda, ClassifierKind::simpleshot});
    CHECK_THROWS_AS(apply_config_json(cfg, nlohmann::json::parse(R"({"nope": 1})")), ConfigError);
}
