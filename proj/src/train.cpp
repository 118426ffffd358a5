#include "cossl/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace cossl {

namespace {

std::uint64_t fnv1a_bytes(const void* data, std::size_t n, std::uint64_t h) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

template <typename P>
std::uint64_t checksum_views(const P& p) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto view : tensor_views(p))
        h = fnv1a_bytes(view.data(), view.size() * sizeof(double), h);
    return h;
}

std::vector<std::span<double>> joined_views(EncoderParams& enc, HeadParams& head) {
    std::vector<std::span<double>> v = tensor_views(enc);
    for (auto s : tensor_views(head)) v.push_back(s);
    return v;
}

std::vector<std::span<const double>> joined_views(const EncoderGrads& enc, const HeadGrads& head) {
    std::vector<std::span<const double>> v = tensor_views(enc);
    for (auto s : tensor_views(head)) v.push_back(s);
    return v;
}

TfeConfig build_tfe_config(const TrainConfig& cfg, const ClassDistribution& labeled_counts) {
    TfeConfig t = make_tfe_config(labeled_counts, cfg.tfe.mu);
    t.blend_override = cfg.tfe.blend_override;
    t.label_blending = cfg.tfe.label_blending;
    t.input_level_blend = cfg.tfe.input_level_blend;
    return t;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t salt) {
    std::uint64_t s = master ^ (salt * 0x9e3779b97f4a7c15ull);
    return splitmix64(s);
}

std::uint64_t params_checksum(const EncoderParams& p) { return checksum_views(p); }
std::uint64_t params_checksum(const HeadParams& p) { return checksum_views(p); }

TrainData build_train_data(const TrainConfig& cfg) {
    MixtureSpec mix{cfg.data.k, cfg.data.d, cfg.data.separation, cfg.data.noise_sigma,
                    cfg.data.pool_per_class};
    const Dataset pool = make_mixture_pool(mix, derive_seed(cfg.cossl.seed, 101));

    const ImbalanceSpec spec = cfg.imbalance_spec();
    spec.validate();
    TrainData data;
    data.labeled_counts = long_tail_counts(spec.n1, spec.gamma_l, spec.k);
    data.unlabeled_counts = long_tail_counts(spec.m1, spec.gamma_u, spec.k);
    Splits splits = carve_splits(pool, data.labeled_counts, data.unlabeled_counts,
                                 derive_seed(cfg.cossl.seed, 102));
    data.labeled = std::move(splits.labeled);
    data.unlabeled = std::move(splits.unlabeled);
    data.remainder = std::move(splits.remainder);

    ClassDistribution eval_counts;
    eval_counts.counts.assign(static_cast<std::size_t>(cfg.data.k), cfg.eval.test_per_class);
    data.eval_test = build_test_set(data.remainder, eval_counts, derive_seed(cfg.cossl.seed, 103));
    data.source_prior = counts_to_prior(data.labeled_counts);
    return data;
}

Trainer::Trainer(const TrainConfig& cfg, const TrainData& data)
    : cfg_(cfg),
      data_(&data),
      tfe_cfg_(build_tfe_config(cfg, data.labeled_counts)),
      rngs_(RngStreams::from_master(cfg.cossl.seed)) {
    const ModelConfig mc = cfg_.model_config();
    g_ = init_encoder(mc, rngs_.init);
    h_r_ = init_head(mc.feature_dim, mc.num_classes, rngs_.init);
    h_c_ = init_head(mc.feature_dim, mc.num_classes, rngs_.init);
    ema_ = make_ema(g_, cfg_.cossl.ema_momentum);
    opt_rep_ = AdamState(cfg_.rep_adam(), joined_views(g_, h_r_));
    opt_cls_ = AdamState(cfg_.cls_adam(), tensor_views(h_c_));
    opt_enc_allow_grad_ = AdamState(cfg_.rep_adam(), tensor_views(g_));
    boundary_ = cfg_.cossl.mode == TrainMode::Cossl ? cfg_.warmup_boundary()
                                                    : cfg_.cossl.total_steps;
}

void Trainer::reinit_classifier() {
    const ModelConfig mc = cfg_.model_config();
    h_c_ = init_head(mc.feature_dim, mc.num_classes, rngs_.init);
    opt_cls_ = AdamState(cfg_.cls_adam(), tensor_views(h_c_));
    opt_enc_allow_grad_ = AdamState(cfg_.rep_adam(), tensor_views(g_));
}

void Trainer::activate_colearning() {
    if (cossl_active_) return;
    reinit_classifier();
    cossl_active_ = true;
}

StepLosses Trainer::step() {
    if (cfg_.cossl.mode == TrainMode::Cossl && step_ >= boundary_ && !cossl_active_)
        activate_colearning();
    return cossl_active_ ? cossl_step() : warmup_step();
}

StepLosses Trainer::warmup_step() { return run_phase_step(false); }

StepLosses Trainer::cossl_step() {
    if (!cossl_active_) activate_colearning();
    return run_phase_step(true);
}

StepLosses Trainer::run_phase_step(bool colearn) {
    StepLosses losses;
    if (colearn) losses.lc = classifier_substep();
    PlBatch pl = pseudo_label_substep();
    losses.accept_rate = pseudo_accept_rate(pl.pls);
    losses.precision = pseudo_precision(pl.pls, pl.batch);
    if (cfg_.cossl.ema_before_update) ema_substep();
    const auto [lx, lu] = representation_substep(pl);
    losses.lx = lx;
    losses.lu = lu;
    if (!cfg_.cossl.ema_before_update) ema_substep();
    ++step_;
    return losses;
}

double Trainer::classifier_substep() {
    const HeadParams* blend_head = tfe_cfg_.label_blending ? &h_c_ : nullptr;

    if (!cfg_.cossl.allow_grad) {
        const BlendedBatch blended = tfe_batch(data_->labeled, data_->unlabeled, ema_.shadow,
                                               cfg_.ssl.augment, tfe_cfg_, cfg_.cossl.batch,
                                               rngs_.tfe, blend_head);
        return classifier_step(h_c_, opt_cls_, blended, step_);
    }

    // Ablation: the classifier loss also updates the encoder. Features come
    // from the live g (the EMA snapshot has no gradient path).
    const TfeSlots slots = tfe_slots(data_->labeled, data_->unlabeled, cfg_.ssl.augment, tfe_cfg_,
                                     cfg_.cossl.batch, rngs_.tfe);
    const int batch = slots.x_aug.rows;
    const double denom = static_cast<double>(batch);

    EncodeCache cache_x;
    EncodeCache cache_u;
    BlendedBatch blended;
    Matrix zx;
    Matrix zu;
    if (tfe_cfg_.input_level_blend) {
        Matrix mixed = slots.x_aug;
        for (int i = 0; i < batch; ++i) {
            if (!slots.blended[static_cast<std::size_t>(i)]) continue;
            const double lam = slots.lambda[static_cast<std::size_t>(i)];
            for (int j = 0; j < mixed.cols; ++j)
                mixed(i, j) = lam * slots.x_aug(i, j) + (1.0 - lam) * slots.u_aug(i, j);
        }
        blended.features = encode_batch(g_, mixed, &cache_x);
    } else {
        zx = encode_batch(g_, slots.x_aug, &cache_x);
        zu = encode_batch(g_, slots.u_aug, &cache_u);
        blended.features = zx;
        for (int i = 0; i < batch; ++i) {
            if (!slots.blended[static_cast<std::size_t>(i)]) continue;
            const double lam = slots.lambda[static_cast<std::size_t>(i)];
            for (int j = 0; j < zx.cols; ++j)
                blended.features(i, j) = lam * zx(i, j) + (1.0 - lam) * zu(i, j);
        }
    }
    blended.labels = slots.labels;
    blended.blended = slots.blended;

    // Head loss and gradient w.r.t. the blended features.
    Matrix logits = classify_batch(h_c_, blended.features);
    Matrix logp;
    log_softmax_rows(logits, logp);
    double loss_sum = 0.0;
    Matrix d_logits(batch, logits.cols);
    for (int i = 0; i < batch; ++i) {
        const int y = blended.labels[static_cast<std::size_t>(i)] - 1;
        loss_sum += -logp(i, y);
        for (int j = 0; j < logits.cols; ++j)
            d_logits(i, j) = (std::exp(logp(i, j)) - (j == y ? 1.0 : 0.0)) / denom;
    }
    const double loss = loss_sum / denom;
    if (!std::isfinite(loss)) throw NumericalFailure(step_, loss);

    HeadGrads hg = zero_head_grads(h_c_);
    {
        // dW = features^T * d_logits
        for (int i = 0; i < batch; ++i)
            for (int k = 0; k < blended.features.cols; ++k)
                for (int j = 0; j < logits.cols; ++j)
                    hg.w(k, j) += blended.features(i, k) * d_logits(i, j);
        for (int i = 0; i < batch; ++i)
            for (int j = 0; j < logits.cols; ++j) hg.b[static_cast<std::size_t>(j)] += d_logits(i, j);
    }

    Matrix dz(batch, blended.features.cols);
    for (int i = 0; i < batch; ++i)
        for (int k = 0; k < blended.features.cols; ++k) {
            double s = 0.0;
            for (int j = 0; j < logits.cols; ++j) s += d_logits(i, j) * h_c_.w(k, j);
            dz(i, k) = s;
        }

    EncoderGrads eg;
    if (tfe_cfg_.input_level_blend) {
        eg = encoder_backward(g_, cache_x, dz);
    } else {
        Matrix dzx = dz;
        Matrix dzu(batch, dz.cols);
        for (int i = 0; i < batch; ++i) {
            if (!slots.blended[static_cast<std::size_t>(i)]) continue;
            const double lam = slots.lambda[static_cast<std::size_t>(i)];
            for (int j = 0; j < dz.cols; ++j) {
                dzx(i, j) = lam * dz(i, j);
                dzu(i, j) = (1.0 - lam) * dz(i, j);
            }
        }
        eg = encoder_backward(g_, cache_x, dzx);
        EncoderGrads eg_u = encoder_backward(g_, cache_u, dzu);
        accumulate(eg, eg_u);
    }

    opt_cls_.step(tensor_views(h_c_), tensor_views(hg));
    opt_enc_allow_grad_.step(tensor_views(g_), tensor_views(eg));
    return loss;
}

Trainer::PlBatch Trainer::pseudo_label_substep() {
    PlBatch pl;
    pl.batch = sample_batch(data_->unlabeled, SamplerKind::random(), cfg_.cossl.batch,
                            rngs_.unlabeled_sampler);
    const bool use_ema = cossl_active_ || cfg_.cossl.warmup_pl_from_ema;
    const EncoderParams& enc = use_ema ? ema_.shadow : g_;
    const HeadParams& head = (cossl_active_ && !cfg_.cossl.pl_from_hr) ? h_c_ : h_r_;
    pl.pls = pseudo_label_batch(enc, head, pl.batch, cfg_.ssl.tau, cfg_.ssl.augment, rngs_.augment);
    return pl;
}

std::pair<double, double> Trainer::representation_substep(const PlBatch& pl) {
    const Batch xb = sample_batch(data_->labeled, SamplerKind::random(), cfg_.cossl.batch,
                                  rngs_.labeled_sampler);
    RepLoss sup = supervised_loss(g_, h_r_, xb, cfg_.ssl.augment, rngs_.augment, step_);
    RepLoss uns = unlabeled_loss(g_, h_r_, pl.batch, pl.pls, cfg_.ssl.augment, rngs_.augment, step_);
    accumulate(sup.encoder, uns.encoder);
    accumulate(sup.head, uns.head);
    opt_rep_.step(joined_views(g_, h_r_), joined_views(sup.encoder, sup.head));
    return {sup.loss, uns.loss};
}

void Trainer::ema_substep() { ema_update(ema_, g_); }

std::pair<const EncoderParams*, const HeadParams*> Trainer::eval_model() const {
    const EncoderParams* enc = cfg_.cossl.use_ema_for_eval || cossl_active_ ? &ema_.shadow : &g_;
    const HeadParams* head = cossl_active_ ? &h_c_ : &h_r_;
    return {enc, head};
}

EvalResult Trainer::evaluate_uniform() const {
    const auto [enc, head] = eval_model();
    return evaluate(*enc, *head, data_->eval_test);
}

namespace {

EpochRecord summarize_epoch(int epoch, const std::vector<StepLosses>& steps, const EvalResult& ev) {
    EpochRecord rec;
    rec.epoch = epoch;
    for (const StepLosses& s : steps) {
        rec.lx += s.lx;
        rec.lu += s.lu;
        rec.lc += s.lc;
        rec.pseudo_accept_rate += s.accept_rate;
        rec.pseudo_precision += s.precision;
    }
    if (!steps.empty()) {
        const double n = static_cast<double>(steps.size());
        rec.lx /= n;
        rec.lu /= n;
        rec.lc /= n;
        rec.pseudo_accept_rate /= n;
        rec.pseudo_precision /= n;
    }
    rec.uniform_acc = ev.overall_accuracy;
    rec.avg_class_recall = ev.averaged_class_recall;
    rec.per_class_recall = ev.per_class_recall;
    return rec;
}

void finalize_metrics(TrainResult& result, int tail_epochs) {
    const int k_avail = static_cast<int>(result.history.size());
    const int k = std::min(tail_epochs, k_avail);
    if (k < 1) return;
    std::vector<double> acc;
    std::vector<double> rec;
    for (const EpochRecord& e : result.history) {
        acc.push_back(e.uniform_acc);
        rec.push_back(e.avg_class_recall);
    }
    result.final_uniform_acc = last_k_average(acc, k);
    result.final_avg_class_recall = last_k_average(rec, k);
    const std::size_t classes = result.history.back().per_class_recall.size();
    result.final_per_class_recall.assign(classes, 0.0);
    for (int i = k_avail - k; i < k_avail; ++i)
        for (std::size_t c = 0; c < classes; ++c)
            result.final_per_class_recall[c] +=
                result.history[static_cast<std::size_t>(i)].per_class_recall[c] / k;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const TrainData& data) {
    validate_config(cfg);
    Trainer trainer(cfg, data);

    TrainResult result;
    result.mode = cfg.cossl.mode;
    std::vector<StepLosses> epoch_steps;
    int epoch = 0;
    for (long t = 0; t < cfg.cossl.total_steps; ++t) {
        epoch_steps.push_back(trainer.step());
        if ((t + 1) % cfg.cossl.steps_per_epoch == 0 || t + 1 == cfg.cossl.total_steps) {
            ++epoch;
            result.history.push_back(summarize_epoch(epoch, epoch_steps, trainer.evaluate_uniform()));
            epoch_steps.clear();
        }
    }

    result.g = trainer.encoder();
    result.xi = trainer.ema_encoder();
    result.h_r = trainer.rep_head();
    result.h_c = trainer.cls_head();

    int tail = cfg.cossl.eval_epochs_tail;
    if (cfg.cossl.mode == TrainMode::Crt) {
        // Two-stage baseline: freeze the (EMA) encoder, retrain a fresh head.
        std::vector<EvalResult> evals;
        result.h_c = crt_retrain(result.xi, data.labeled,
                                 cfg.cossl.crt_use_tfe ? &data.unlabeled : nullptr, cfg,
                                 cfg.cossl.crt_epochs, cfg.cossl.crt_use_tfe,
                                 derive_seed(cfg.cossl.seed, 104), &data.eval_test, &evals);
        for (std::size_t i = 0; i < evals.size(); ++i) {
            EpochRecord rec;
            rec.epoch = ++epoch;
            rec.uniform_acc = evals[i].overall_accuracy;
            rec.avg_class_recall = evals[i].averaged_class_recall;
            rec.per_class_recall = evals[i].per_class_recall;
            result.history.push_back(std::move(rec));
        }
        tail = std::min(tail, cfg.cossl.crt_epochs);
    }
    finalize_metrics(result, tail);
    return result;
}

TrainResult train(const TrainConfig& cfg) {
    validate_config(cfg);
    return train(cfg, build_train_data(cfg));
}

HeadParams crt_retrain(const EncoderParams& frozen_encoder, const Dataset& labeled,
                       const Dataset* unlabeled, const TrainConfig& cfg, int epochs, bool use_tfe,
                       std::uint64_t seed, const Dataset* eval_test,
                       std::vector<EvalResult>* epoch_evals) {
    if (labeled.size() == 0) throw ValidationError("crt_retrain: labeled set is empty");
    std::uint64_t s = seed;
    Rng init_rng(splitmix64(s));
    TfeStreams streams = TfeStreams::from_seed(splitmix64(s));

    const ClassDistribution counts = labeled.class_counts();
    TfeConfig tfe_cfg = build_tfe_config(cfg, counts);
    if (!use_tfe) tfe_cfg.blend_override = TfeConfig::BlendOverride::AllZero;

    // Plain cRT shares the TFE pipeline with blending disabled; the unlabeled
    // draws become inert. Any non-empty set can stand in when U is absent.
    const Dataset& u_set = unlabeled && unlabeled->size() > 0 ? *unlabeled : labeled;
    if (use_tfe && (!unlabeled || unlabeled->size() == 0))
        throw ValidationError("crt_retrain: TFE retraining requires an unlabeled set");

    HeadParams head = init_head(frozen_encoder.feature_dim(), labeled.num_classes(), init_rng);
    AdamState opt(cfg.cls_adam(), tensor_views(head));

    long step = 0;
    for (int e = 0; e < epochs; ++e) {
        for (int i = 0; i < cfg.cossl.steps_per_epoch; ++i) {
            const BlendedBatch blended = tfe_batch(labeled, u_set, frozen_encoder, cfg.ssl.augment,
                                                   tfe_cfg, cfg.cossl.batch, streams);
            classifier_step(head, opt, blended, step++);
        }
        if (eval_test && epoch_evals)
            epoch_evals->push_back(evaluate(frozen_encoder, head, *eval_test));
    }
    return head;
}

const EncoderParams& TrainResult::eval_encoder(bool use_ema) const {
    if (mode == TrainMode::Vanilla && !use_ema) return g;
    return xi;
}

const HeadParams& TrainResult::eval_head() const {
    return mode == TrainMode::Vanilla ? h_r : h_c;
}

std::vector<NamedTensor> collect_tensors(const TrainResult& result) {
    std::vector<NamedTensor> out;
    auto add_encoder = [&out](const std::string& prefix, const EncoderParams& p) {
        for (std::size_t l = 0; l < p.w.size(); ++l) {
            out.push_back(NamedTensor{prefix + ".w" + std::to_string(l),
                                      {p.w[l].rows, p.w[l].cols}, p.w[l].data});
            out.push_back(NamedTensor{prefix + ".b" + std::to_string(l),
                                      {static_cast<int>(p.b[l].size())}, p.b[l]});
        }
    };
    auto add_head = [&out](const std::string& prefix, const HeadParams& p) {
        out.push_back(NamedTensor{prefix + ".w", {p.w.rows, p.w.cols}, p.w.data});
        out.push_back(NamedTensor{prefix + ".b", {static_cast<int>(p.b.size())}, p.b});
    };
    add_encoder("g", result.g);
    add_encoder("xi", result.xi);
    add_head("h_r", result.h_r);
    add_head("h_c", result.h_c);
    return out;
}

}  // namespace cossl
