#include "cossl/tinynn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>

namespace cossl {

namespace {

// C (B x n) += A (B x m) * W (m x n)
void matmul_add(const Matrix& a, const Matrix& w, Matrix& c) {
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = a.data.data() + static_cast<std::size_t>(i) * a.cols;
        double* crow = c.data.data() + static_cast<std::size_t>(i) * c.cols;
        for (int k = 0; k < a.cols; ++k) {
            const double av = arow[k];
            const double* wrow = w.data.data() + static_cast<std::size_t>(k) * w.cols;
            for (int j = 0; j < w.cols; ++j) crow[j] += av * wrow[j];
        }
    }
}

// dW (m x n) += A^T (m x B) * dC (B x n)
void grad_weights(const Matrix& a, const Matrix& dc, Matrix& dw) {
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = a.data.data() + static_cast<std::size_t>(i) * a.cols;
        const double* drow = dc.data.data() + static_cast<std::size_t>(i) * dc.cols;
        for (int k = 0; k < a.cols; ++k) {
            const double av = arow[k];
            double* wrow = dw.data.data() + static_cast<std::size_t>(k) * dw.cols;
            for (int j = 0; j < dc.cols; ++j) wrow[j] += av * drow[j];
        }
    }
}

// dA (B x m) = dC (B x n) * W^T; row-of-W dot row-of-dC keeps both unit stride.
void grad_inputs(const Matrix& dc, const Matrix& w, Matrix& da) {
    for (int i = 0; i < dc.rows; ++i) {
        const double* drow = dc.data.data() + static_cast<std::size_t>(i) * dc.cols;
        double* arow = da.data.data() + static_cast<std::size_t>(i) * da.cols;
        for (int k = 0; k < w.rows; ++k) {
            const double* wrow = w.data.data() + static_cast<std::size_t>(k) * w.cols;
            double s = 0.0;
            for (int j = 0; j < w.cols; ++j) s += drow[j] * wrow[j];
            arow[k] = s;
        }
    }
}

void add_bias_rows(Matrix& m, const std::vector<double>& b) {
    for (int i = 0; i < m.rows; ++i) {
        double* row = m.data.data() + static_cast<std::size_t>(i) * m.cols;
        for (int j = 0; j < m.cols; ++j) row[j] += b[j];
    }
}

void apply_activation(Matrix& m, Activation act) {
    if (act == Activation::Tanh) {
        for (double& x : m.data) x = std::tanh(x);
    } else {
        for (double& x : m.data) x = x > 0.0 ? x : 0.0;
    }
}

// d_pre = d_post * act'(pre), computed from the post-activation values.
void activation_backward(const Matrix& post, Matrix& d, Activation act) {
    if (act == Activation::Tanh) {
        for (std::size_t i = 0; i < d.data.size(); ++i) d.data[i] *= 1.0 - post.data[i] * post.data[i];
    } else {
        for (std::size_t i = 0; i < d.data.size(); ++i)
            if (post.data[i] <= 0.0) d.data[i] = 0.0;
    }
}

std::vector<double> column_sums(const Matrix& m) {
    std::vector<double> s(m.cols, 0.0);
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j) s[j] += m(i, j);
    return s;
}

Matrix init_weight(int fan_in, int fan_out, Rng& rng) {
    Matrix w(fan_in, fan_out);
    const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& x : w.data) x = rng.uniform(-a, a);
    return w;
}

void write_u64(std::ofstream& f, std::uint64_t v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::ifstream& f) {
    std::uint64_t v = 0;
    f.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

}  // namespace

EncoderParams init_encoder(const ModelConfig& cfg, Rng& rng) {
    if (cfg.input_dim < 1 || cfg.feature_dim < 1)
        throw ValidationError("model dimensions must be positive");
    std::vector<int> dims;
    dims.push_back(cfg.input_dim);
    dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
    dims.push_back(cfg.feature_dim);

    EncoderParams p;
    p.act = cfg.activation;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        if (dims[i] < 1 || dims[i + 1] < 1) throw ValidationError("layer sizes must be positive");
        p.w.push_back(init_weight(dims[i], dims[i + 1], rng));
        std::vector<double> b(dims[i + 1]);
        const double a = 1.0 / std::sqrt(static_cast<double>(dims[i]));
        for (double& x : b) x = rng.uniform(-a, a);
        p.b.push_back(std::move(b));
    }
    return p;
}

HeadParams init_head(int feature_dim, int num_classes, Rng& rng) {
    if (feature_dim < 1 || num_classes < 1) throw ValidationError("head dimensions must be positive");
    HeadParams h;
    h.w = init_weight(feature_dim, num_classes, rng);
    h.b.resize(num_classes);
    const double a = 1.0 / std::sqrt(static_cast<double>(feature_dim));
    for (double& x : h.b) x = rng.uniform(-a, a);
    return h;
}

EncoderGrads zero_encoder_grads(const EncoderParams& p) {
    EncoderGrads g;
    for (const Matrix& w : p.w) g.w.emplace_back(w.rows, w.cols);
    for (const std::vector<double>& b : p.b) g.b.emplace_back(b.size(), 0.0);
    return g;
}

HeadGrads zero_head_grads(const HeadParams& p) {
    HeadGrads g;
    g.w = Matrix(p.w.rows, p.w.cols);
    g.b.assign(p.b.size(), 0.0);
    return g;
}

void accumulate(EncoderGrads& into, const EncoderGrads& from) {
    for (std::size_t l = 0; l < into.w.size(); ++l) {
        for (std::size_t i = 0; i < into.w[l].data.size(); ++i) into.w[l].data[i] += from.w[l].data[i];
        for (std::size_t i = 0; i < into.b[l].size(); ++i) into.b[l][i] += from.b[l][i];
    }
}

void accumulate(HeadGrads& into, const HeadGrads& from) {
    for (std::size_t i = 0; i < into.w.data.size(); ++i) into.w.data[i] += from.w.data[i];
    for (std::size_t i = 0; i < into.b.size(); ++i) into.b[i] += from.b[i];
}

Matrix encode_batch(const EncoderParams& enc, const Matrix& x, EncodeCache* cache) {
    if (x.cols != enc.input_dim()) throw ValidationError("encoder input dimension mismatch");
    if (cache) {
        cache->input = x;
        cache->post.clear();
    }
    Matrix cur = x;
    for (int l = 0; l < enc.num_layers(); ++l) {
        Matrix next(cur.rows, enc.w[l].cols);
        add_bias_rows(next, enc.b[l]);
        matmul_add(cur, enc.w[l], next);
        apply_activation(next, enc.act);
        cur = std::move(next);
        if (cache) cache->post.push_back(cur);
    }
    return cur;
}

std::vector<double> encode(const EncoderParams& enc, std::span<const double> x) {
    Matrix m(1, static_cast<int>(x.size()));
    std::copy(x.begin(), x.end(), m.data.begin());
    Matrix z = encode_batch(enc, m);
    return z.data;
}

Matrix classify_batch(const HeadParams& head, const Matrix& z) {
    if (z.cols != head.input_dim()) throw ValidationError("head input dimension mismatch");
    Matrix logits(z.rows, head.num_classes());
    add_bias_rows(logits, head.b);
    matmul_add(z, head.w, logits);
    return logits;
}

std::vector<double> classify(const HeadParams& head, std::span<const double> z) {
    Matrix m(1, static_cast<int>(z.size()));
    std::copy(z.begin(), z.end(), m.data.begin());
    return classify_batch(head, m).data;
}

EncoderGrads encoder_backward(const EncoderParams& enc, const EncodeCache& cache,
                              const Matrix& d_features, Matrix* d_input) {
    EncoderGrads grads = zero_encoder_grads(enc);
    Matrix d = d_features;
    for (int l = enc.num_layers() - 1; l >= 0; --l) {
        activation_backward(cache.post[l], d, enc.act);
        const Matrix& prev = l == 0 ? cache.input : cache.post[l - 1];
        grad_weights(prev, d, grads.w[l]);
        grads.b[l] = column_sums(d);
        if (l > 0 || d_input) {
            Matrix dprev(d.rows, enc.w[l].rows);
            grad_inputs(d, enc.w[l], dprev);
            d = std::move(dprev);
        }
    }
    if (d_input) *d_input = std::move(d);
    return grads;
}

void log_softmax_rows(const Matrix& logits, Matrix& out) {
    out = logits;
    for (int i = 0; i < logits.rows; ++i) {
        double mx = logits(i, 0);
        for (int j = 1; j < logits.cols; ++j) mx = std::max(mx, logits(i, j));
        double sum = 0.0;
        for (int j = 0; j < logits.cols; ++j) sum += std::exp(logits(i, j) - mx);
        const double lse = mx + std::log(sum);
        for (int j = 0; j < logits.cols; ++j) out(i, j) = logits(i, j) - lse;
    }
}

std::vector<double> softmax(std::span<const double> logits) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t j = 0; j < logits.size(); ++j) {
        p[j] = std::exp(logits[j] - mx);
        sum += p[j];
    }
    for (double& v : p) v /= sum;
    return p;
}

namespace {

struct CeCore {
    double loss = 0.0;
    Matrix d_logits;
};

// Shared CE core: hard targets with per-example weights, sum/denom reduction.
CeCore ce_core(const Matrix& logits, const std::vector<int>& targets,
               const std::vector<double>* weights, double denom, long step) {
    CeCore out;
    Matrix logp;
    log_softmax_rows(logits, logp);
    out.d_logits = Matrix(logits.rows, logits.cols);
    double loss_sum = 0.0;
    for (int i = 0; i < logits.rows; ++i) {
        const int y = targets[static_cast<std::size_t>(i)] - 1;
        if (y < 0 || y >= logits.cols) throw ValidationError("target class out of range");
        const double w = weights ? (*weights)[static_cast<std::size_t>(i)] : 1.0;
        if (w == 0.0) continue;
        loss_sum += -w * logp(i, y);
        for (int j = 0; j < logits.cols; ++j) {
            const double p = std::exp(logp(i, j));
            out.d_logits(i, j) = w * (p - (j == y ? 1.0 : 0.0)) / denom;
        }
    }
    out.loss = loss_sum / denom;
    if (!std::isfinite(out.loss)) throw NumericalFailure(step, out.loss);
    return out;
}

}  // namespace

CeResult cross_entropy_and_grads(const EncoderParams& enc, const HeadParams& head,
                                 const Matrix& inputs, const std::vector<int>& targets,
                                 const std::vector<double>* example_weights, double denom,
                                 bool freeze_encoder, long step) {
    EncodeCache cache;
    Matrix z = encode_batch(enc, inputs, freeze_encoder ? nullptr : &cache);
    Matrix logits = classify_batch(head, z);
    CeCore core = ce_core(logits, targets, example_weights, denom, step);

    CeResult res;
    res.loss = core.loss;
    res.head = zero_head_grads(head);
    grad_weights(z, core.d_logits, res.head.w);
    res.head.b = column_sums(core.d_logits);

    if (!freeze_encoder) {
        Matrix dz(z.rows, z.cols);
        grad_inputs(core.d_logits, head.w, dz);
        res.encoder = encoder_backward(enc, cache, dz);
        res.has_encoder_grads = true;
    }
    return res;
}

HeadCeResult head_cross_entropy_and_grads(const HeadParams& head, const Matrix& features,
                                          const std::vector<int>& targets, double denom, long step) {
    Matrix logits = classify_batch(head, features);
    CeCore core = ce_core(logits, targets, nullptr, denom, step);
    HeadCeResult res;
    res.loss = core.loss;
    res.grads = zero_head_grads(head);
    grad_weights(features, core.d_logits, res.grads.w);
    res.grads.b = column_sums(core.d_logits);
    return res;
}

HeadCeResult head_cross_entropy_soft(const HeadParams& head, const Matrix& features,
                                     const Matrix& soft_targets, double denom, long step) {
    Matrix logits = classify_batch(head, features);
    Matrix logp;
    log_softmax_rows(logits, logp);
    Matrix d(logits.rows, logits.cols);
    double loss_sum = 0.0;
    for (int i = 0; i < logits.rows; ++i) {
        for (int j = 0; j < logits.cols; ++j) {
            const double q = soft_targets(i, j);
            loss_sum += -q * logp(i, j);
            d(i, j) = (std::exp(logp(i, j)) - q) / denom;
        }
    }
    HeadCeResult res;
    res.loss = loss_sum / denom;
    if (!std::isfinite(res.loss)) throw NumericalFailure(step, res.loss);
    res.grads = zero_head_grads(head);
    grad_weights(features, d, res.grads.w);
    res.grads.b = column_sums(d);
    return res;
}

std::vector<std::span<double>> tensor_views(EncoderParams& p) {
    std::vector<std::span<double>> v;
    for (std::size_t l = 0; l < p.w.size(); ++l) {
        v.emplace_back(p.w[l].data);
        v.emplace_back(p.b[l]);
    }
    return v;
}

std::vector<std::span<double>> tensor_views(HeadParams& p) {
    return {std::span<double>(p.w.data), std::span<double>(p.b)};
}

namespace {
template <typename T>
std::vector<std::span<const double>> const_views_enc(const T& p) {
    std::vector<std::span<const double>> v;
    for (std::size_t l = 0; l < p.w.size(); ++l) {
        v.emplace_back(p.w[l].data);
        v.emplace_back(p.b[l]);
    }
    return v;
}
}  // namespace

std::vector<std::span<const double>> tensor_views(const EncoderParams& p) { return const_views_enc(p); }
std::vector<std::span<const double>> tensor_views(const EncoderGrads& g) { return const_views_enc(g); }

std::vector<std::span<const double>> tensor_views(const HeadParams& p) {
    return {std::span<const double>(p.w.data), std::span<const double>(p.b)};
}

std::vector<std::span<const double>> tensor_views(const HeadGrads& g) {
    return {std::span<const double>(g.w.data), std::span<const double>(g.b)};
}

AdamState::AdamState(AdamConfig cfg, const std::vector<std::span<double>>& params) : cfg_(cfg) {
    for (const auto& p : params) {
        m_.emplace_back(p.size(), 0.0);
        v_.emplace_back(p.size(), 0.0);
    }
}

void AdamState::step(const std::vector<std::span<double>>& params,
                     const std::vector<std::span<const double>>& grads) {
    if (params.size() != m_.size() || grads.size() != m_.size())
        throw ValidationError("adam tensor count mismatch");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (params[k].size() != m_[k].size() || grads[k].size() != m_[k].size())
            throw ValidationError("adam tensor shape mismatch");
        double* m = m_[k].data();
        double* v = v_[k].data();
        double* p = params[k].data();
        const double* g = grads[k].data();
        for (std::size_t i = 0; i < params[k].size(); ++i) {
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

EmaState make_ema(const EncoderParams& g, double momentum) {
    if (momentum < 0.0 || momentum >= 1.0) throw ValidationError("ema momentum must lie in [0, 1)");
    return EmaState{g, momentum};
}

void ema_update(EmaState& ema, const EncoderParams& g) {
    const double m = ema.momentum;
    auto dst = tensor_views(ema.shadow);
    auto src = tensor_views(g);
    for (std::size_t k = 0; k < dst.size(); ++k) {
        if (dst[k].size() != src[k].size()) throw ValidationError("ema shape mismatch");
        for (std::size_t i = 0; i < dst[k].size(); ++i)
            dst[k][i] = m * dst[k][i] + (1.0 - m) * src[k][i];
    }
}

void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& tensors) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    f.write("CSLCKPT1", 8);
    write_u64(f, tensors.size());
    for (const NamedTensor& t : tensors) {
        write_u64(f, t.name.size());
        f.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        write_u64(f, t.shape.size());
        for (int s : t.shape) write_u64(f, static_cast<std::uint64_t>(s));
        write_u64(f, t.data.size());
        f.write(reinterpret_cast<const char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    }
    if (!f) throw std::runtime_error("checkpoint write failed: " + path);
}

std::vector<NamedTensor> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, "CSLCKPT1", 8) != 0)
        throw std::runtime_error("bad checkpoint magic in " + path);
    std::vector<NamedTensor> out(read_u64(f));
    for (NamedTensor& t : out) {
        t.name.resize(read_u64(f));
        f.read(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        t.shape.resize(read_u64(f));
        for (int& s : t.shape) s = static_cast<int>(read_u64(f));
        t.data.resize(read_u64(f));
        f.read(reinterpret_cast<char*>(t.data.data()),
               static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    }
    if (!f) throw std::runtime_error("truncated checkpoint: " + path);
    return out;
}

}  // namespace cossl
