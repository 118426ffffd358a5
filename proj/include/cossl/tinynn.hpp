#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cossl/rng.hpp"

namespace cossl {

// Raised when a loss turns non-finite; carries the training step.
class NumericalFailure : public std::runtime_error {
public:
    NumericalFailure(long step, double value)
        : std::runtime_error("non-finite loss " + std::to_string(value) +
                             " at step " + std::to_string(step)),
          step(step),
          value(value) {}

    long step;
    double value;
};

class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Dense row-major matrix.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

    double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

    std::span<double> row(int r) { return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)}; }
    std::span<const double> row(int r) const { return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)}; }
};

enum class Activation { Tanh, Relu };

struct ModelConfig {
    int input_dim = 16;
    std::vector<int> hidden = {64, 64};
    int feature_dim = 32;
    int num_classes = 10;
    Activation activation = Activation::Tanh;
};

// MLP encoder g: input -> hidden... -> feature_dim, activation after every layer.
struct EncoderParams {
    std::vector<Matrix> w;               // layer i maps dims[i] -> dims[i+1]
    std::vector<std::vector<double>> b;
    Activation act = Activation::Tanh;

    int num_layers() const { return static_cast<int>(w.size()); }
    int input_dim() const { return w.front().rows; }
    int feature_dim() const { return w.back().cols; }
};

// Single linear layer feature_dim -> K, no activation.
struct HeadParams {
    Matrix w;
    std::vector<double> b;

    int input_dim() const { return w.rows; }
    int num_classes() const { return w.cols; }
};

struct EncoderGrads {
    std::vector<Matrix> w;
    std::vector<std::vector<double>> b;
};

struct HeadGrads {
    Matrix w;
    std::vector<double> b;
};

EncoderParams init_encoder(const ModelConfig& cfg, Rng& rng);
HeadParams init_head(int feature_dim, int num_classes, Rng& rng);
EncoderGrads zero_encoder_grads(const EncoderParams& p);
HeadGrads zero_head_grads(const HeadParams& p);
void accumulate(EncoderGrads& into, const EncoderGrads& from);
void accumulate(HeadGrads& into, const HeadGrads& from);

// Forward-pass state kept for backprop.
struct EncodeCache {
    Matrix input;
    std::vector<Matrix> post;  // post-activation per layer; back() holds the features
};

Matrix encode_batch(const EncoderParams& enc, const Matrix& x, EncodeCache* cache = nullptr);
std::vector<double> encode(const EncoderParams& enc, std::span<const double> x);
Matrix classify_batch(const HeadParams& head, const Matrix& z);
std::vector<double> classify(const HeadParams& head, std::span<const double> z);

// Backprop d_features through the encoder. d_input, when given, receives the
// gradient w.r.t. the raw inputs.
EncoderGrads encoder_backward(const EncoderParams& enc, const EncodeCache& cache,
                              const Matrix& d_features, Matrix* d_input = nullptr);

// Numerically stable per-row log-softmax.
void log_softmax_rows(const Matrix& logits, Matrix& out);
std::vector<double> softmax(std::span<const double> logits);

struct CeResult {
    double loss = 0.0;
    HeadGrads head;
    EncoderGrads encoder;
    bool has_encoder_grads = false;
};

// Mean cross entropy of inputs against hard targets (1..K) through
// (enc, head). example_weights scales each example's contribution (nullptr =
// all ones); the sum is divided by denom. freeze_encoder skips all encoder
// gradients. Throws NumericalFailure when the loss is non-finite.
CeResult cross_entropy_and_grads(const EncoderParams& enc, const HeadParams& head,
                                 const Matrix& inputs, const std::vector<int>& targets,
                                 const std::vector<double>* example_weights, double denom,
                                 bool freeze_encoder, long step);

struct HeadCeResult {
    double loss = 0.0;
    HeadGrads grads;
};

// Head-only cross entropy on precomputed features.
HeadCeResult head_cross_entropy_and_grads(const HeadParams& head, const Matrix& features,
                                          const std::vector<int>& targets, double denom, long step);
// Soft-target variant; each row of soft_targets is a distribution over K.
HeadCeResult head_cross_entropy_soft(const HeadParams& head, const Matrix& features,
                                     const Matrix& soft_targets, double denom, long step);

// Flat views over every tensor of a parameter/gradient pack, in a fixed order.
std::vector<std::span<double>> tensor_views(EncoderParams& p);
std::vector<std::span<double>> tensor_views(HeadParams& p);
std::vector<std::span<const double>> tensor_views(const EncoderParams& p);
std::vector<std::span<const double>> tensor_views(const HeadParams& p);
std::vector<std::span<const double>> tensor_views(const EncoderGrads& g);
std::vector<std::span<const double>> tensor_views(const HeadGrads& g);

struct AdamConfig {
    double lr = 0.002;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam with bias correction over a fixed list of tensors.
class AdamState {
public:
    AdamState() = default;
    AdamState(AdamConfig cfg, const std::vector<std::span<double>>& params);

    void step(const std::vector<std::span<double>>& params,
              const std::vector<std::span<const double>>& grads);

    long step_count() const { return t_; }
    AdamConfig& config() { return cfg_; }
    const AdamConfig& config() const { return cfg_; }

private:
    AdamConfig cfg_;
    long t_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

// EMA shadow of the encoder: xi <- m*xi + (1-m)*g, with xi_0 = g_0.
struct EmaState {
    EncoderParams shadow;
    double momentum = 0.999;
};

EmaState make_ema(const EncoderParams& g, double momentum);
void ema_update(EmaState& ema, const EncoderParams& g);

// Checkpoint I/O: named tensors with shapes, bit-exact round trip.
struct NamedTensor {
    std::string name;
    std::vector<int> shape;
    std::vector<double> data;
};

void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_checkpoint(const std::string& path);

}  // namespace cossl
