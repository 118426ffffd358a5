#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cossl/datagen.hpp"
#include "cossl/ssl.hpp"
#include "cossl/tfe.hpp"

namespace cossl {

enum class TrainMode { Cossl, Vanilla, Crt };

struct DataConfig {
    int k = 10;
    int d = 16;
    double separation = 2.0;
    double noise_sigma = 1.0;
    int pool_per_class = 2400;
    int n1 = 150;
    int m1 = 1500;
    double gamma_l = 100.0;
    double gamma_u = 100.0;
};

struct ModelSection {
    std::vector<int> hidden = {64, 64};
    int feature_dim = 32;
    Activation activation = Activation::Tanh;
};

struct SslSection {
    double tau = 0.95;
    AugmentConfig augment;
};

struct TfeSection {
    double mu = 0.6;
    TfeConfig::BlendOverride blend_override = TfeConfig::BlendOverride::None;
    bool label_blending = false;
    bool input_level_blend = false;
};

struct CosslSection {
    TrainMode mode = TrainMode::Cossl;
    std::uint64_t seed = 1;
    long total_steps = 20000;
    int steps_per_epoch = 200;
    int batch = 64;
    double warmup_fraction = 0.8;  // fraction of steps before co-learning activates
    double ema_momentum = 0.999;
    double lr = 0.002;
    double lr_classifier = 0.002;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int eval_epochs_tail = 20;
    bool allow_grad = false;       // ablation: classifier loss updates the encoder
    bool pl_from_hr = false;       // ablation: pseudo-labels from h_r in the co-learning phase
    bool ema_before_update = false;  // EMA absorbs g before instead of after the step
    bool use_ema_for_eval = true;
    bool warmup_pl_from_ema = true;
    int crt_epochs = 20;
    bool crt_use_tfe = false;
};

struct EvalSection {
    int test_per_class = 200;
    bool sweep_enabled = false;
    int sweep_cap = 512;
    std::vector<int> sweep_gammas = {64, 16, 4, 1, -4, -16, -64};
    bool pc_unknown_uniform = false;
};

struct TrainConfig {
    DataConfig data;
    ModelSection model;
    SslSection ssl;
    TfeSection tfe;
    CosslSection cossl;
    EvalSection eval;

    ModelConfig model_config() const {
        return ModelConfig{data.d, model.hidden, model.feature_dim, data.k, model.activation};
    }
    ImbalanceSpec imbalance_spec() const {
        return ImbalanceSpec{data.n1, data.m1, data.gamma_l, data.gamma_u, data.k};
    }
    AdamConfig rep_adam() const {
        return AdamConfig{cossl.lr, cossl.beta1, cossl.beta2, cossl.adam_eps};
    }
    AdamConfig cls_adam() const {
        return AdamConfig{cossl.lr_classifier, cossl.beta1, cossl.beta2, cossl.adam_eps};
    }
    long warmup_boundary() const {
        return static_cast<long>(cossl.warmup_fraction * static_cast<double>(cossl.total_steps));
    }
};

// Parse errors carry the line number; validation errors name the field.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

TrainConfig parse_config_text(const std::string& text);
TrainConfig load_config(const std::string& path);
// Apply one "section.key=value" override to an already-parsed config.
void apply_override(TrainConfig& cfg, const std::string& assignment);
std::string dump_config(const TrainConfig& cfg);
void validate_config(const TrainConfig& cfg);

std::string to_string(TrainMode mode);
TrainMode train_mode_from_string(const std::string& s);

}  // namespace cossl
