#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "cossl/config.hpp"
#include "cossl/eval.hpp"
#include "cossl/tfe.hpp"

namespace cossl {

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t salt);

// FNV-1a over the raw tensor bytes; used to prove which losses touched which
// parameters.
std::uint64_t params_checksum(const EncoderParams& p);
std::uint64_t params_checksum(const HeadParams& p);

struct TrainData {
    Dataset labeled;    // X
    Dataset unlabeled;  // U (labels hidden)
    Dataset remainder;  // disjoint test pool
    Dataset eval_test;  // uniform test set drawn from the remainder
    ClassDistribution labeled_counts;
    ClassDistribution unlabeled_counts;
    std::vector<double> source_prior;
};

TrainData build_train_data(const TrainConfig& cfg);

struct StepLosses {
    double lx = 0.0;
    double lu = 0.0;
    double lc = 0.0;
    double accept_rate = 0.0;
    double precision = 0.0;
};

struct EpochRecord {
    int epoch = 0;
    double lx = 0.0;
    double lu = 0.0;
    double lc = 0.0;
    double uniform_acc = 0.0;
    double avg_class_recall = 0.0;
    std::vector<double> per_class_recall;
    double pseudo_accept_rate = 0.0;
    double pseudo_precision = 0.0;
};

// One training run: encoder g, heads h_r / h_c, EMA shadow xi, per-role rng
// streams. The classifier loss updates h_c only and the SSL losses update
// (g, h_r) only; the two sides meet through xi and pseudo-labels.
class Trainer {
public:
    Trainer(const TrainConfig& cfg, const TrainData& data);

    // One full step of the phase the run is in; advances the step counter and
    // handles the warm-up -> co-learning transition.
    StepLosses step();

    StepLosses warmup_step();
    StepLosses cossl_step();

    // cossl_step decomposed, for harnesses that checksum between sub-steps.
    struct PlBatch {
        Batch batch;
        std::vector<PseudoLabel> pls;
    };
    double classifier_substep();
    PlBatch pseudo_label_substep();
    std::pair<double, double> representation_substep(const PlBatch& pl);
    void ema_substep();

    // Fresh h_c and classifier optimizer (used at the phase boundary).
    void reinit_classifier();
    void activate_colearning();

    long current_step() const { return step_; }
    long boundary() const { return boundary_; }
    bool colearning_active() const { return cossl_active_; }

    const EncoderParams& encoder() const { return g_; }
    const EncoderParams& ema_encoder() const { return ema_.shadow; }
    const HeadParams& rep_head() const { return h_r_; }
    const HeadParams& cls_head() const { return h_c_; }

    // (encoder, head) pair to evaluate at the current phase.
    std::pair<const EncoderParams*, const HeadParams*> eval_model() const;
    EvalResult evaluate_uniform() const;

private:
    StepLosses run_phase_step(bool colearn);

    const TrainConfig cfg_;
    const TrainData* data_;
    TfeConfig tfe_cfg_;
    RngStreams rngs_;

    EncoderParams g_;
    HeadParams h_r_;
    HeadParams h_c_;
    EmaState ema_;
    AdamState opt_rep_;
    AdamState opt_cls_;
    AdamState opt_enc_allow_grad_;  // allow_grad ablation only

    long step_ = 0;
    long boundary_ = 0;
    bool cossl_active_ = false;
};

struct TrainResult {
    TrainMode mode = TrainMode::Cossl;
    std::vector<EpochRecord> history;
    double final_uniform_acc = 0.0;        // last-k epoch mean
    double final_avg_class_recall = 0.0;   // last-k epoch mean
    std::vector<double> final_per_class_recall;

    EncoderParams g;
    EncoderParams xi;
    HeadParams h_r;
    HeadParams h_c;  // crt mode: the retrained head

    // Model returned for evaluation: (xi, h_c) for cossl/crt, (xi or g, h_r)
    // for vanilla.
    const EncoderParams& eval_encoder(bool use_ema = true) const;
    const HeadParams& eval_head() const;
};

TrainResult train(const TrainConfig& cfg, const TrainData& data);
TrainResult train(const TrainConfig& cfg);

// Reinitializes a fresh head and trains it on the frozen encoder with
// class-balanced batches (plain) or TFE batches. The encoder is untouched.
HeadParams crt_retrain(const EncoderParams& frozen_encoder, const Dataset& labeled,
                       const Dataset* unlabeled, const TrainConfig& cfg, int epochs, bool use_tfe,
                       std::uint64_t seed, const Dataset* eval_test = nullptr,
                       std::vector<EvalResult>* epoch_evals = nullptr);

std::vector<NamedTensor> collect_tensors(const TrainResult& result);

}  // namespace cossl
