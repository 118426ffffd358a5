#include "cossl/ssl.hpp"

#include <algorithm>
#include <cmath>

namespace cossl {

void AugmentConfig::validate() const {
    if (weak_sigma < 0.0) throw ValidationError("weak_sigma must be >= 0");
    if (strong_sigma < weak_sigma) throw ValidationError("strong_sigma must be >= weak_sigma");
    if (mask_prob < 0.0 || mask_prob > 1.0) throw ValidationError("mask_prob must lie in [0, 1]");
}

void weak_augment(std::span<const double> x, const AugmentConfig& cfg, Rng& rng,
                  std::span<double> out) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + cfg.weak_sigma * rng.normal();
}

void strong_augment(std::span<const double> x, const AugmentConfig& cfg, Rng& rng,
                    std::span<double> out) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + cfg.strong_sigma * rng.normal();
    for (std::size_t i = 0; i < x.size(); ++i)
        if (rng.uniform01() < cfg.mask_prob) out[i] = 0.0;
}

namespace {

template <typename F>
Matrix augment_batch(const Batch& batch, F&& aug) {
    const int d = batch.source->dim();
    Matrix m(static_cast<int>(batch.size()), d);
    for (std::size_t i = 0; i < batch.size(); ++i)
        aug(batch.source->feature(batch.indices[i]), m.row(static_cast<int>(i)));
    return m;
}

}  // namespace

Matrix weak_augment_batch(const Batch& batch, const AugmentConfig& cfg, Rng& rng) {
    return augment_batch(batch, [&](std::span<const double> x, std::span<double> out) {
        weak_augment(x, cfg, rng, out);
    });
}

Matrix strong_augment_batch(const Batch& batch, const AugmentConfig& cfg, Rng& rng) {
    return augment_batch(batch, [&](std::span<const double> x, std::span<double> out) {
        strong_augment(x, cfg, rng, out);
    });
}

PseudoLabel pseudo_label(const EncoderParams& encoder, const HeadParams& head,
                         std::span<const double> u, double tau, const AugmentConfig& cfg, Rng& rng) {
    if (tau < 0.0 || tau > 1.0) throw ValidationError("tau must lie in [0, 1]");
    std::vector<double> view(u.size());
    weak_augment(u, cfg, rng, view);
    const std::vector<double> logits = classify(head, encode(encoder, view));
    const std::vector<double> probs = softmax(logits);
    PseudoLabel pl;
    pl.cls = 1;
    pl.confidence = probs[0];
    for (std::size_t j = 1; j < probs.size(); ++j) {
        if (probs[j] > pl.confidence) {
            pl.confidence = probs[j];
            pl.cls = static_cast<int>(j) + 1;
        }
    }
    pl.accepted = pl.confidence >= tau;
    return pl;
}

std::vector<PseudoLabel> pseudo_label_batch(const EncoderParams& encoder, const HeadParams& head,
                                            const Batch& batch, double tau,
                                            const AugmentConfig& cfg, Rng& rng) {
    std::vector<PseudoLabel> out;
    out.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i)
        out.push_back(pseudo_label(encoder, head, batch.source->feature(batch.indices[i]), tau, cfg, rng));
    return out;
}

RepLoss supervised_loss(const EncoderParams& g, const HeadParams& h_r, const Batch& batch,
                        const AugmentConfig& cfg, Rng& rng, long step) {
    Matrix inputs = weak_augment_batch(batch, cfg, rng);
    std::vector<int> targets(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i)
        targets[i] = batch.source->label(batch.indices[i]);
    CeResult ce = cross_entropy_and_grads(g, h_r, inputs, targets, nullptr,
                                          static_cast<double>(batch.size()), false, step);
    return RepLoss{ce.loss, std::move(ce.encoder), std::move(ce.head)};
}

RepLoss unlabeled_loss(const EncoderParams& g, const HeadParams& h_r, const Batch& batch,
                       std::span<const PseudoLabel> pseudo, const AugmentConfig& cfg, Rng& rng,
                       long step) {
    if (pseudo.size() != batch.size()) throw ValidationError("pseudo-labels not aligned with batch");
    Matrix inputs = strong_augment_batch(batch, cfg, rng);
    std::vector<int> targets(batch.size(), 1);
    std::vector<double> weights(batch.size(), 0.0);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (pseudo[i].accepted) {
            targets[i] = pseudo[i].cls;
            weights[i] = 1.0;
        }
    }
    CeResult ce = cross_entropy_and_grads(g, h_r, inputs, targets, &weights,
                                          static_cast<double>(batch.size()), false, step);
    return RepLoss{ce.loss, std::move(ce.encoder), std::move(ce.head)};
}

double pseudo_accept_rate(std::span<const PseudoLabel> pseudo) {
    if (pseudo.empty()) return 0.0;
    std::size_t n = 0;
    for (const PseudoLabel& pl : pseudo) n += pl.accepted ? 1 : 0;
    return static_cast<double>(n) / static_cast<double>(pseudo.size());
}

double pseudo_precision(std::span<const PseudoLabel> pseudo, const Batch& batch) {
    std::size_t accepted = 0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pseudo.size(); ++i) {
        if (!pseudo[i].accepted) continue;
        ++accepted;
        if (pseudo[i].cls == batch.source->diagnostic_label(batch.indices[i])) ++correct;
    }
    if (accepted == 0) return 0.0;
    return static_cast<double>(correct) / static_cast<double>(accepted);
}

}  // namespace cossl
