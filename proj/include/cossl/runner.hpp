#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "cossl/train.hpp"

namespace cossl {

// Exit codes shared by the library runner and the CLI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;

std::string default_out_root();

// Rebuild parameter packs from checkpoint tensors ("g", "xi", "h_r", "h_c").
EncoderParams encoder_from_tensors(const std::vector<NamedTensor>& tensors,
                                   const std::string& prefix, Activation act);
HeadParams head_from_tensors(const std::vector<NamedTensor>& tensors, const std::string& prefix);

// Full experiment: manifest.json, metrics.csv, summary.json, checkpoint.bin,
// and sweep CSVs when enabled.
int run_experiment(const TrainConfig& cfg, const std::string& out_dir, bool export_splits = false);

// Shifted sweep over a previously trained checkpoint.
int run_sweep(const TrainConfig& cfg, const std::string& checkpoint_path,
              const std::string& out_dir, PcMode mode);

// Classifier retraining over a previously trained checkpoint.
int run_crt(TrainConfig cfg, const std::string& checkpoint_path, const std::string& out_dir);

// Named degraded variants for the ablation harness.
int run_ablate(TrainConfig cfg, const std::string& ablation, const std::string& out_dir);
const std::vector<std::string>& ablation_names();

// Mean +/- std of every numeric summary field across run directories.
int run_compare(const std::vector<std::string>& run_dirs, std::ostream& out);

void write_metrics_csv(const std::string& path, const std::vector<EpochRecord>& history);

}  // namespace cossl
