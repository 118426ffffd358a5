#pragma once

#include <vector>

#include "cossl/ssl.hpp"

namespace cossl {

struct TfeConfig {
    // Overrides exist solely for the ablation harness; None is the shipped
    // behavior.
    enum class BlendOverride { None, AllZero, AllOne };

    double mu = 0.6;                  // lower bound of the fusion-factor interval
    std::vector<double> blend_probs;  // P_k = (N_1 - N_k) / N_1 per class
    BlendOverride blend_override = BlendOverride::None;
    bool label_blending = false;    // mix targets with the unlabeled pseudo-label
    bool input_level_blend = false; // blend raw inputs instead of features

    void validate(int k) const;
    double prob_for_class(int cls) const;
};

// P_k = (N_1 - N_k) / N_1; head class never blends.
double blend_probability(int n1, int nk);

TfeConfig make_tfe_config(const ClassDistribution& labeled_counts, double mu);

// lambda ~ Uniform(mu, 1).
double sample_fusion_factor(double mu, Rng& rng);

// Sampling, augmentation, and blend decisions for one classifier batch;
// feature extraction is kept separate so the stop-gradient ablation can
// re-encode these slots through the live encoder.
struct TfeSlots {
    Matrix x_aug;                      // B x d, strong-augmented labeled inputs
    Matrix u_aug;                      // B x d, strong-augmented unlabeled inputs
    std::vector<int> labels;           // y_i per slot
    std::vector<std::uint8_t> blended; // blend decision per slot
    std::vector<double> lambda;        // fusion factor; 1 where not blended
};

TfeSlots tfe_slots(const Dataset& x_set, const Dataset& u_set, const AugmentConfig& aug,
                   const TfeConfig& cfg, int batch, TfeStreams& rngs);

struct BlendedBatch {
    Matrix features;                   // B x feature_dim
    std::vector<int> labels;           // always the labeled source's label
    std::vector<std::uint8_t> blended;
    Matrix soft_targets;               // rows over K; label_blending only
    bool has_soft_targets = false;
};

// Encode slots with the (EMA) encoder and apply the feature blend.
BlendedBatch blend_features(const TfeSlots& slots, const EncoderParams& encoder,
                            const TfeConfig& cfg,
                            const HeadParams* label_blend_head = nullptr);

// Full classifier-batch construction: slots + blend via the EMA encoder xi.
BlendedBatch tfe_batch(const Dataset& x_set, const Dataset& u_set, const EncoderParams& xi,
                       const AugmentConfig& aug, const TfeConfig& cfg, int batch, TfeStreams& rngs,
                       const HeadParams* label_blend_head = nullptr);

// One Adam step on h_c only; returns the pre-step loss.
double classifier_step(HeadParams& h_c, AdamState& opt, const BlendedBatch& blended, long step);

}  // namespace cossl
