#pragma once

#include <span>
#include <vector>

#include "cossl/sampling.hpp"
#include "cossl/tinynn.hpp"

namespace cossl {

// Vector-space stand-ins for image augmentation: additive Gaussian noise and
// per-coordinate zero masking.
struct AugmentConfig {
    double weak_sigma = 0.05;
    double strong_sigma = 0.25;
    double mask_prob = 0.1;

    void validate() const;
};

void weak_augment(std::span<const double> x, const AugmentConfig& cfg, Rng& rng,
                  std::span<double> out);
void strong_augment(std::span<const double> x, const AugmentConfig& cfg, Rng& rng,
                    std::span<double> out);

Matrix weak_augment_batch(const Batch& batch, const AugmentConfig& cfg, Rng& rng);
Matrix strong_augment_batch(const Batch& batch, const AugmentConfig& cfg, Rng& rng);

struct PseudoLabel {
    int cls = 0;
    double confidence = 0.0;
    bool accepted = false;
};

// Softmax of head(encoder(weak_augment(u))); accepted iff confidence >= tau.
// Read-only on all parameters.
PseudoLabel pseudo_label(const EncoderParams& encoder, const HeadParams& head,
                         std::span<const double> u, double tau, const AugmentConfig& cfg, Rng& rng);

std::vector<PseudoLabel> pseudo_label_batch(const EncoderParams& encoder, const HeadParams& head,
                                            const Batch& batch, double tau,
                                            const AugmentConfig& cfg, Rng& rng);

struct RepLoss {
    double loss = 0.0;
    EncoderGrads encoder;
    HeadGrads head;
};

// L_x: mean CE of weakly augmented labeled examples through (g, h_r).
RepLoss supervised_loss(const EncoderParams& g, const HeadParams& h_r, const Batch& batch,
                        const AugmentConfig& cfg, Rng& rng, long step);

// L_u: mean CE of strongly augmented examples against accepted pseudo-labels;
// rejected slots contribute nothing, the mean stays over the full batch.
RepLoss unlabeled_loss(const EncoderParams& g, const HeadParams& h_r, const Batch& batch,
                       std::span<const PseudoLabel> pseudo, const AugmentConfig& cfg, Rng& rng,
                       long step);

double pseudo_accept_rate(std::span<const PseudoLabel> pseudo);
// Fraction of accepted pseudo-labels matching hidden truth (diagnostic only).
double pseudo_precision(std::span<const PseudoLabel> pseudo, const Batch& batch);

}  // namespace cossl
