#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cossl/runner.hpp"

using namespace cossl;
namespace fs = std::filesystem;

namespace {

TrainConfig micro_cfg(std::uint64_t seed) {
    TrainConfig cfg;
    cfg.data.k = 3;
    cfg.data.d = 4;
    cfg.data.separation = 3.0;
    cfg.data.pool_per_class = 300;
    cfg.data.n1 = 20;
    cfg.data.m1 = 40;
    cfg.data.gamma_l = 5.0;
    cfg.data.gamma_u = 5.0;
    cfg.model.hidden = {8};
    cfg.model.feature_dim = 6;
    cfg.cossl.seed = seed;
    cfg.cossl.total_steps = 40;
    cfg.cossl.steps_per_epoch = 10;
    cfg.cossl.batch = 8;
    cfg.cossl.warmup_fraction = 0.5;
    cfg.cossl.eval_epochs_tail = 2;
    cfg.cossl.crt_epochs = 2;
    cfg.eval.test_per_class = 30;
    cfg.eval.sweep_cap = 60;
    cfg.eval.sweep_gammas = {4, 1, -4};
    return cfg;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    return dir;
}

}  // namespace

TEST_CASE("run_experiment writes the full artifact set") {
    const fs::path dir = fresh_dir("cossl_runner_artifacts");
    TrainConfig cfg = micro_cfg(5);
    cfg.eval.sweep_enabled = true;
    REQUIRE(run_experiment(cfg, dir.string(), true) == kExitOk);
    for (const char* name : {"manifest.json", "metrics.csv", "summary.json", "checkpoint.bin",
                             "sweep.csv", "sweep_known.csv", "labeled.tsv", "unlabeled.tsv"})
        CHECK(fs::exists(dir / name));

    const std::string manifest = slurp(dir / "manifest.json");
    CHECK(manifest.find("cossl-manifest-v1") != std::string::npos);
    CHECK(manifest.find("total_steps = 40") != std::string::npos);  // resolved snapshot
    CHECK(manifest.find("started_at") != std::string::npos);

    const std::string metrics = slurp(dir / "metrics.csv");
    CHECK(metrics.find("# cossl-metrics-v1") == 0);
    CHECK(metrics.find("epoch,L_x,L_u,L_c,uniform_acc,avg_class_recall,"
                       "pseudo_accept_rate,pseudo_precision") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("two runs with the same config and seed are byte-identical") {
    const fs::path a = fresh_dir("cossl_runner_det_a");
    const fs::path b = fresh_dir("cossl_runner_det_b");
    const TrainConfig cfg = micro_cfg(11);
    REQUIRE(run_experiment(cfg, a.string()) == kExitOk);
    REQUIRE(run_experiment(cfg, b.string()) == kExitOk);
    CHECK(slurp(a / "metrics.csv") == slurp(b / "metrics.csv"));
    CHECK(slurp(a / "checkpoint.bin") == slurp(b / "checkpoint.bin"));
    CHECK(slurp(a / "summary.json") == slurp(b / "summary.json"));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("checkpoints round-trip through the crt and sweep entry points") {
    const fs::path run_dir = fresh_dir("cossl_runner_ckpt");
    TrainConfig cfg = micro_cfg(7);
    cfg.cossl.mode = TrainMode::Vanilla;
    REQUIRE(run_experiment(cfg, run_dir.string()) == kExitOk);

    const fs::path crt_dir = fresh_dir("cossl_runner_crt");
    REQUIRE(run_crt(cfg, (run_dir / "checkpoint.bin").string(), crt_dir.string()) == kExitOk);
    CHECK(fs::exists(crt_dir / "summary.json"));
    const std::string summary = slurp(crt_dir / "summary.json");
    CHECK(summary.find("\"mode\": \"crt\"") != std::string::npos);

    const fs::path sweep_dir = fresh_dir("cossl_runner_sweep");
    cfg.cossl.mode = TrainMode::Vanilla;
    REQUIRE(run_sweep(cfg, (run_dir / "checkpoint.bin").string(), sweep_dir.string(),
                      PcMode::Known) == kExitOk);
    const std::string sweep = slurp(sweep_dir / "sweep.csv");
    CHECK(sweep.find("# cossl-sweep-v1") == 0);
    CHECK(sweep.find("\nmean,") != std::string::npos);

    // Missing checkpoint is a usage error, not a crash.
    CHECK(run_crt(cfg, (run_dir / "nope.bin").string(), crt_dir.string()) == kExitUsage);
    fs::remove_all(run_dir);
    fs::remove_all(crt_dir);
    fs::remove_all(sweep_dir);
}

TEST_CASE("ablations run end to end and unknown tags are rejected") {
    const fs::path dir = fresh_dir("cossl_runner_ablate");
    CHECK(run_ablate(micro_cfg(3), "no_blend_prob", dir.string()) == kExitOk);
    CHECK(fs::exists(dir / "summary.json"));
    CHECK(run_ablate(micro_cfg(3), "not_a_thing", dir.string()) == kExitUsage);
    for (const std::string& name : ablation_names()) {
        const fs::path d = fresh_dir("cossl_runner_ablate_" + name);
        CHECK(run_ablate(micro_cfg(3), name, d.string()) == kExitOk);
        fs::remove_all(d);
    }
    fs::remove_all(dir);
}

TEST_CASE("compare reports mean and std across paired runs") {
    const fs::path a = fresh_dir("cossl_cmp_a");
    const fs::path b = fresh_dir("cossl_cmp_b");
    REQUIRE(run_experiment(micro_cfg(21), a.string()) == kExitOk);
    REQUIRE(run_experiment(micro_cfg(22), b.string()) == kExitOk);
    std::stringstream out;
    REQUIRE(run_compare({a.string(), b.string()}, out) == kExitOk);
    const std::string text = out.str();
    CHECK(text.find("metric,mean,std,n") != std::string::npos);
    CHECK(text.find("final_avg_class_recall") != std::string::npos);
    CHECK(text.find(",2\n") != std::string::npos);  // n = 2
    CHECK(run_compare({}, out) == kExitUsage);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("default out root honors COSSL_OUT") {
    setenv("COSSL_OUT", "/tmp/cossl_env_test", 1);
    CHECK(default_out_root() == "/tmp/cossl_env_test");
    unsetenv("COSSL_OUT");
    CHECK(default_out_root() == "runs");
}
