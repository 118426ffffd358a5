#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cossl/runner.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;
};

// Config file first, then explicit overrides.
cossl::TrainConfig resolve_config(const CommonOpts& opts) {
    cossl::TrainConfig cfg;
    if (!opts.config_path.empty()) cfg = cossl::load_config(opts.config_path);
    for (const std::string& o : opts.overrides) cossl::apply_override(cfg, o);
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("-c,--config", opts.config_path, "Config file (key = value sections)");
    cmd->add_option("-s,--set", opts.overrides,
                    "Override a config field, e.g. --set cossl.seed=7 (repeatable)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CoSSL experiment runner"};
    app.require_subcommand(1);

    CommonOpts run_opts;
    std::string run_out = cossl::default_out_root() + "/run";
    bool export_splits = false;
    CLI::App* run_cmd = app.add_subcommand("run", "Train a model and write run artifacts");
    add_common(run_cmd, run_opts);
    run_cmd->add_option("-o,--out", run_out, "Output run directory");
    run_cmd->add_flag("--export-splits", export_splits, "Also export splits as TSV");

    CommonOpts sweep_opts;
    std::string sweep_out = cossl::default_out_root() + "/sweep";
    std::string sweep_checkpoint;
    std::string pc_mode = "unknown";
    CLI::App* sweep_cmd =
        app.add_subcommand("sweep", "Evaluate a checkpoint over shifted test distributions");
    add_common(sweep_cmd, sweep_opts);
    sweep_cmd->add_option("-o,--out", sweep_out, "Output directory");
    sweep_cmd->add_option("--checkpoint", sweep_checkpoint, "Trained checkpoint")->required();
    sweep_cmd->add_option("--pc-mode", pc_mode, "unknown|known")
        ->check(CLI::IsMember({"unknown", "known"}));

    CommonOpts crt_opts;
    std::string crt_out = cossl::default_out_root() + "/crt";
    std::string crt_checkpoint;
    bool crt_use_tfe = false;
    CLI::App* crt_cmd =
        app.add_subcommand("crt", "Retrain the classifier head over a frozen checkpoint encoder");
    add_common(crt_cmd, crt_opts);
    crt_cmd->add_option("-o,--out", crt_out, "Output run directory");
    crt_cmd->add_option("--checkpoint", crt_checkpoint, "Trained checkpoint")->required();
    crt_cmd->add_flag("--use-tfe", crt_use_tfe, "Retrain with TFE batches instead of plain cRT");

    CommonOpts ablate_opts;
    std::string ablate_out = cossl::default_out_root() + "/ablate";
    std::string ablation;
    CLI::App* ablate_cmd = app.add_subcommand("ablate", "Run a named degraded variant");
    add_common(ablate_cmd, ablate_opts);
    ablate_cmd->add_option("-o,--out", ablate_out, "Output run directory");
    ablate_cmd->add_option("--ablation", ablation, "Variant to run")
        ->required()
        ->check(CLI::IsMember(cossl::ablation_names()));

    std::vector<std::string> compare_dirs;
    CLI::App* compare_cmd =
        app.add_subcommand("compare", "Mean +/- std of summary metrics across run directories");
    compare_cmd->add_option("dirs", compare_dirs, "Run directories")->required();

    CLI::App* defaults_cmd = app.add_subcommand("print-defaults", "Print the default config");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed())
            return cossl::run_experiment(resolve_config(run_opts), run_out, export_splits);
        if (sweep_cmd->parsed())
            return cossl::run_sweep(resolve_config(sweep_opts), sweep_checkpoint, sweep_out,
                                    pc_mode == "known" ? cossl::PcMode::Known
                                                       : cossl::PcMode::Unknown);
        if (crt_cmd->parsed()) {
            cossl::TrainConfig cfg = resolve_config(crt_opts);
            if (crt_use_tfe) cfg.cossl.crt_use_tfe = true;
            return cossl::run_crt(cfg, crt_checkpoint, crt_out);
        }
        if (ablate_cmd->parsed())
            return cossl::run_ablate(resolve_config(ablate_opts), ablation, ablate_out);
        if (compare_cmd->parsed()) return cossl::run_compare(compare_dirs, std::cout);
        if (defaults_cmd->parsed()) {
            std::fputs(cossl::dump_config(cossl::TrainConfig{}).c_str(), stdout);
            return cossl::kExitOk;
        }
    } catch (const cossl::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return cossl::kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return cossl::kExitUsage;
    }
    return cossl::kExitUsage;
}
