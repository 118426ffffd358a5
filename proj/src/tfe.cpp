#include "cossl/tfe.hpp"

#include <algorithm>
#include <cmath>

namespace cossl {

void TfeConfig::validate(int k) const {
    if (mu < 0.0 || mu > 1.0) throw ValidationError("mu must lie in [0, 1]");
    if (static_cast<int>(blend_probs.size()) != k)
        throw ValidationError("blend_probs must have K entries");
    for (double p : blend_probs)
        if (p < 0.0 || p > 1.0) throw ValidationError("blend probabilities must lie in [0, 1]");
}

double TfeConfig::prob_for_class(int cls) const {
    switch (blend_override) {
        case BlendOverride::AllZero: return 0.0;
        case BlendOverride::AllOne: return 1.0;
        case BlendOverride::None: break;
    }
    return blend_probs[static_cast<std::size_t>(cls - 1)];
}

double blend_probability(int n1, int nk) {
    if (nk < 1) throw ValidationError("blend_probability: nk must be >= 1");
    if (nk > n1) throw ValidationError("blend_probability: nk must not exceed n1");
    return static_cast<double>(n1 - nk) / static_cast<double>(n1);
}

TfeConfig make_tfe_config(const ClassDistribution& labeled_counts, double mu) {
    TfeConfig cfg;
    cfg.mu = mu;
    const int n1 = labeled_counts.counts.front();
    cfg.blend_probs.reserve(labeled_counts.counts.size());
    for (int nk : labeled_counts.counts) cfg.blend_probs.push_back(blend_probability(n1, nk));
    cfg.validate(labeled_counts.num_classes());
    return cfg;
}

double sample_fusion_factor(double mu, Rng& rng) {
    if (mu < 0.0 || mu > 1.0) throw ValidationError("mu must lie in [0, 1]");
    return mu + (1.0 - mu) * rng.uniform01();
}

TfeSlots tfe_slots(const Dataset& x_set, const Dataset& u_set, const AugmentConfig& aug,
                   const TfeConfig& cfg, int batch, TfeStreams& rngs) {
    if (u_set.size() == 0) throw ValidationError("tfe_slots: unlabeled set is empty");
    cfg.validate(x_set.num_classes());

    const Batch xb = sample_batch(x_set, SamplerKind::class_balanced(), batch, rngs.labeled);
    const Batch ub = sample_batch(u_set, SamplerKind::random(), batch, rngs.unlabeled);

    TfeSlots slots;
    slots.x_aug = strong_augment_batch(xb, aug, rngs.augment);
    slots.u_aug = strong_augment_batch(ub, aug, rngs.augment);
    slots.labels.resize(static_cast<std::size_t>(batch));
    slots.blended.resize(static_cast<std::size_t>(batch));
    slots.lambda.assign(static_cast<std::size_t>(batch), 1.0);
    for (int i = 0; i < batch; ++i) {
        const int y = x_set.label(xb.indices[static_cast<std::size_t>(i)]);
        slots.labels[static_cast<std::size_t>(i)] = y;
        const bool blend = rngs.blend.uniform01() <= cfg.prob_for_class(y);
        slots.blended[static_cast<std::size_t>(i)] = blend ? 1 : 0;
        // The unlabeled draw above happens unconditionally; only lambda is
        // skipped when the blend is skipped.
        if (blend) slots.lambda[static_cast<std::size_t>(i)] = sample_fusion_factor(cfg.mu, rngs.blend);
    }
    return slots;
}

BlendedBatch blend_features(const TfeSlots& slots, const EncoderParams& encoder,
                            const TfeConfig& cfg, const HeadParams* label_blend_head) {
    BlendedBatch out;
    out.labels = slots.labels;
    out.blended = slots.blended;

    if (cfg.input_level_blend) {
        // Ablation: blend in input space, then encode once.
        Matrix mixed = slots.x_aug;
        for (int i = 0; i < mixed.rows; ++i) {
            if (!slots.blended[static_cast<std::size_t>(i)]) continue;
            const double lam = slots.lambda[static_cast<std::size_t>(i)];
            for (int j = 0; j < mixed.cols; ++j)
                mixed(i, j) = lam * slots.x_aug(i, j) + (1.0 - lam) * slots.u_aug(i, j);
        }
        out.features = encode_batch(encoder, mixed);
    } else {
        const Matrix zx = encode_batch(encoder, slots.x_aug);
        const Matrix zu = encode_batch(encoder, slots.u_aug);
        out.features = zx;
        for (int i = 0; i < zx.rows; ++i) {
            if (!slots.blended[static_cast<std::size_t>(i)]) continue;
            const double lam = slots.lambda[static_cast<std::size_t>(i)];
            for (int j = 0; j < zx.cols; ++j)
                out.features(i, j) = lam * zx(i, j) + (1.0 - lam) * zu(i, j);
        }
    }

    if (cfg.label_blending) {
        if (!label_blend_head) throw ValidationError("label blending requires a head for pseudo-labels");
        // Ablation: soft target mixes the label with the argmax prediction on
        // the unlabeled feature.
        const Matrix zu = encode_batch(encoder, slots.u_aug);
        const Matrix logits = classify_batch(*label_blend_head, zu);
        const int k = label_blend_head->num_classes();
        out.soft_targets = Matrix(out.features.rows, k);
        for (int i = 0; i < out.features.rows; ++i) {
            int u_cls = 0;
            for (int j = 1; j < k; ++j)
                if (logits(i, j) > logits(i, u_cls)) u_cls = j;
            const double lam = slots.blended[static_cast<std::size_t>(i)]
                                   ? slots.lambda[static_cast<std::size_t>(i)]
                                   : 1.0;
            out.soft_targets(i, out.labels[static_cast<std::size_t>(i)] - 1) += lam;
            out.soft_targets(i, u_cls) += 1.0 - lam;
        }
        out.has_soft_targets = true;
    }
    return out;
}

BlendedBatch tfe_batch(const Dataset& x_set, const Dataset& u_set, const EncoderParams& xi,
                       const AugmentConfig& aug, const TfeConfig& cfg, int batch, TfeStreams& rngs,
                       const HeadParams* label_blend_head) {
    const TfeSlots slots = tfe_slots(x_set, u_set, aug, cfg, batch, rngs);
    return blend_features(slots, xi, cfg, label_blend_head);
}

double classifier_step(HeadParams& h_c, AdamState& opt, const BlendedBatch& blended, long step) {
    if (blended.features.rows == 0) throw ValidationError("classifier_step: empty batch");
    const double denom = static_cast<double>(blended.features.rows);
    HeadCeResult ce = blended.has_soft_targets
                          ? head_cross_entropy_soft(h_c, blended.features, blended.soft_targets,
                                                    denom, step)
                          : head_cross_entropy_and_grads(h_c, blended.features, blended.labels,
                                                         denom, step);
    opt.step(tensor_views(h_c), tensor_views(ce.grads));
    return ce.loss;
}

}  // namespace cossl
