// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "rdsense/metrics.hpp"
#include "rdsense/rdmap.hpp"

namespace rdsense::learn {

struct ConvLayerSpec {
    std::size_t out_channels = 16;
    std::size_t kernel = 3;
    std::size_t stride = 2;
};

/// Frame-wise 2D CNN followed by a GRU over the frame sequence, a dropout on
/// the final hidden state and an affine classifier head.
struct CnnGruSpec {
    std::vector<ConvLayerSpec> conv = {{16, 3, 2}, {32, 3, 2}};
    std::size_t pool = 2;  // average pool after the last conv layer
    std::size_t gru_hidden = 64;
    double dropout_rate = 0.2;
    std::size_t num_classes = 5;
    std::size_t input_hw = 64;
    std::size_t clip_frames = 32;

    void validate() const;
    /// Spatial size after each conv layer (same padding k/2, given stride).
    std::vector<std::size_t> conv_out_hw() const;
    /// Flattened per-frame feature size feeding the GRU.
    std::size_t feature_size() const;
};

struct ModelStats {
    std::size_t params = 0;
    double gflops = 0.0;  // forward pass, one clip, multiply-adds x 2
};
ModelStats count_params_flops(const CnnGruSpec& spec);

/// Offsets of every parameter tensor inside the flat parameter vector.
struct ModelLayout {
    struct Tensor {
        std::size_t offset = 0;
        std::size_t rows = 0;
        std::size_t cols = 0;
        std::size_t size() const { return rows * cols; }
    };
    std::vector<Tensor> conv_w;  // [out_ch x in_ch*k*k]
    std::vector<Tensor> conv_b;  // [out_ch]
    Tensor w_reset, w_update, w_cand;  // [H x Z]
    Tensor u_reset, u_update, u_cand;  // [H x H]
    Tensor b_reset, b_update, b_cand;  // [H]
    Tensor head_w;  // [C x H]
    Tensor head_b;  // [C]
    std::size_t total = 0;

    static ModelLayout build(const CnnGruSpec& spec);
};

namespace detail {

template <class T>
T dot(const T* a, const T* b, std::size_t n) {
    T acc{};
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

template <class T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace detail

/// Forward activations kept for the exact backward pass.
template <class T>
struct ForwardCache {
    std::size_t batch = 0;
    std::vector<T> input;       // [B][F][hw*hw]
    std::vector<std::vector<T>> conv_out;  // per layer: [B][F][C*hw*hw], post-ReLU
    std::vector<T> features;    // [F][B][Z]
    std::vector<T> hidden;      // [F+1][B][H]; hidden[0] = 0
    std::vector<T> gate_reset, gate_update, gate_cand;  // [F][B][H]
    std::vector<T> dropout_mask;  // [B][H]; empty in eval mode
    bool train_mode = false;
    bool valid = false;
};

/// The classifier network. Parameters live in one flat vector so the
/// optimizer and the finite-difference oracle can treat them uniformly.
template <class T>
class CnnGru {
public:
    explicit CnnGru(const CnnGruSpec& spec) : spec_(spec), layout_(ModelLayout::build(spec)) {
        spec.validate();
    }

    const CnnGruSpec& spec() const { return spec_; }
    const ModelLayout& layout() const { return layout_; }

    /// Seeded scaled-uniform initialization: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    std::vector<T> init_params(std::uint64_t seed) const;

    /// Logits for a batch of clips (batch-major, frames*hw*hw floats each).
    /// In train mode the dropout mask is drawn from dropout_seed and the
    /// cache is populated for backward().
    std::vector<T> forward(std::span<const float* const> clips, std::span<const T> params,
                           bool train_mode, std::uint64_t dropout_seed, ForwardCache<T>* cache) const;

    /// Mean cross-entropy over the batch plus dlogits (softmax - onehot)/B.
    static T softmax_cross_entropy(std::span<const T> logits, std::span<const int> labels,
                                   std::size_t num_classes, std::vector<T>* dlogits);

    /// Exact gradients of the mean cross-entropy w.r.t. every parameter.
    std::vector<T> backward(const ForwardCache<T>& cache, std::span<const T> params,
                            std::span<const T> dlogits) const;

private:
    void conv_forward(const T* in, std::size_t in_ch, std::size_t in_hw, const T* w, const T* b,
                      std::size_t out_ch, std::size_t k, std::size_t s, std::size_t out_hw,
                      T* out, T* col_buf) const;
    void im2col(const T* in, std::size_t in_ch, std::size_t in_hw, std::size_t k, std::size_t s,
                std::size_t out_hw, T* col) const;

    CnnGruSpec spec_;
    ModelLayout layout_;
};

struct TrainConfig {
    double learning_rate = 1e-3;
    double weight_decay = 1e-3;  // decoupled, applied outside the moment update
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t batch_size = 16;
    std::size_t max_epochs = 100;
    std::size_t runs = 5;
    std::size_t early_stop_patience = 8;  // epochs without val improvement; 0 disables
    std::uint64_t rng_seed = 1;

    void validate() const;
};

/// Adam with decoupled weight decay. A zero gradient leaves parameters
/// unchanged except for the decay shrinkage.
template <class T>
struct AdamState {
    std::vector<T> m, v;
    std::size_t step = 0;

    explicit AdamState(std::size_t n) : m(n, T{}), v(n, T{}) {}

    void update(std::vector<T>& params, std::span<const T> grads, const TrainConfig& cfg) {
        ++step;
        const T lr = static_cast<T>(cfg.learning_rate);
        const T b1 = static_cast<T>(cfg.beta1);
        const T b2 = static_cast<T>(cfg.beta2);
        const T eps = static_cast<T>(cfg.epsilon);
        const T wd = static_cast<T>(cfg.weight_decay);
        const T bc1 = static_cast<T>(1.0 - std::pow(cfg.beta1, static_cast<double>(step)));
        const T bc2 = static_cast<T>(1.0 - std::pow(cfg.beta2, static_cast<double>(step)));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i] = b1 * m[i] + (T{1} - b1) * grads[i];
            v[i] = b2 * v[i] + (T{1} - b2) * grads[i] * grads[i];
            const T m_hat = m[i] / bc1;
            const T v_hat = v[i] / bc2;
            params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
            if (wd != T{}) params[i] -= lr * wd * params[i];
        }
    }
};

struct RunSummary {
    std::size_t run = 0;
    double best_val_accuracy_pct = 0.0;
    std::size_t best_epoch = 0;
    std::size_t epochs_run = 0;
    std::vector<double> train_loss;    // per epoch
    std::vector<double> val_accuracy;  // per epoch, percent
};

struct TrainResult {
    std::vector<float> params;  // of the selected run, at its best epoch
    EvalReport report;          // test metrics of the selected run
    std::vector<RunSummary> runs;
    std::size_t selected_run = 0;
};

/// The training protocol: `cfg.runs` independent seeded trainings, selection
/// by validation accuracy, test metrics reported for the selected run.
TrainResult train(const std::vector<rd::RDClip>& clips, const std::vector<std::size_t>& train_idx,
                  const std::vector<std::size_t>& val_idx, const std::vector<std::size_t>& test_idx,
                  const CnnGruSpec& spec, const TrainConfig& cfg);

std::vector<int> predict(const CnnGruSpec& spec, std::span<const float> params,
                         const std::vector<rd::RDClip>& clips, const std::vector<std::size_t>& idx,
                         std::size_t batch_size = 16);

/// Classify by Euclidean distance between clip mean-frames and class
/// centroids computed on the training split.
EvalReport nearest_centroid(const std::vector<rd::RDClip>& clips,
                            const std::vector<std::size_t>& train_idx,
                            const std::vector<std::size_t>& test_idx, std::size_t num_classes = 5);

void save_checkpoint(const std::filesystem::path& path, const CnnGruSpec& spec,
                     std::span<const float> params);
std::pair<CnnGruSpec, std::vector<float>> load_checkpoint(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// template implementation

template <class T>
void CnnGru<T>::im2col(const T* in, std::size_t in_ch, std::size_t in_hw, std::size_t k, std::size_t s,
                       std::size_t out_hw, T* col) const {
    const long pad = static_cast<long>(k / 2);
    const std::size_t plane = in_hw * in_hw;
    std::size_t row = 0;
    for (std::size_t c = 0; c < in_ch; ++c) {
        for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx, ++row) {
                T* dst = col + row * out_hw * out_hw;
                for (std::size_t oy = 0; oy < out_hw; ++oy) {
                    const long iy = static_cast<long>(oy * s + ky) - pad;
                    if (iy < 0 || iy >= static_cast<long>(in_hw)) {
                        std::fill(dst + oy * out_hw, dst + (oy + 1) * out_hw, T{});
                        continue;
                    }
                    const T* src_row = in + c * plane + static_cast<std::size_t>(iy) * in_hw;
                    for (std::size_t ox = 0; ox < out_hw; ++ox) {
                        const long ix = static_cast<long>(ox * s + kx) - pad;
                        dst[oy * out_hw + ox] =
                            (ix < 0 || ix >= static_cast<long>(in_hw)) ? T{} : src_row[static_cast<std::size_t>(ix)];
                    }
                }
            }
        }
    }
}

template <class T>
void CnnGru<T>::conv_forward(const T* in, std::size_t in_ch, std::size_t in_hw, const T* w, const T* b,
                             std::size_t out_ch, std::size_t k, std::size_t s, std::size_t out_hw,
                             T* out, T* col_buf) const {
    const std::size_t kk = in_ch * k * k;
    const std::size_t n_out = out_hw * out_hw;
    im2col(in, in_ch, in_hw, k, s, out_hw, col_buf);
    for (std::size_t co = 0; co < out_ch; ++co) {
        T* dst = out + co * n_out;
        std::fill(dst, dst + n_out, b[co]);
        const T* wrow = w + co * kk;
        for (std::size_t r = 0; r < kk; ++r) {
            detail::axpy(wrow[r], col_buf + r * n_out, dst, n_out);
        }
        for (std::size_t i = 0; i < n_out; ++i) dst[i] = dst[i] > T{} ? dst[i] : T{};  // ReLU
    }
}

template <class T>
std::vector<T> CnnGru<T>::init_params(std::uint64_t seed) const {
    std::vector<T> params(layout_.total);
    std::mt19937_64 rng(seed);
    auto fill_tensor = [&](const ModelLayout::Tensor& t, double fan_in) {
        const double bound = 1.0 / std::sqrt(std::max(1.0, fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (std::size_t i = 0; i < t.size(); ++i) params[t.offset + i] = static_cast<T>(dist(rng));
    };
    std::size_t in_ch = 1;
    for (std::size_t l = 0; l < spec_.conv.size(); ++l) {
        const double fan = static_cast<double>(in_ch * spec_.conv[l].kernel * spec_.conv[l].kernel);
        fill_tensor(layout_.conv_w[l], fan);
        fill_tensor(layout_.conv_b[l], fan);
        in_ch = spec_.conv[l].out_channels;
    }
    const auto z = static_cast<double>(spec_.feature_size());
    const auto h = static_cast<double>(spec_.gru_hidden);
    fill_tensor(layout_.w_reset, z);
    fill_tensor(layout_.w_update, z);
    fill_tensor(layout_.w_cand, z);
    fill_tensor(layout_.u_reset, h);
    fill_tensor(layout_.u_update, h);
    fill_tensor(layout_.u_cand, h);
    fill_tensor(layout_.b_reset, h);
    fill_tensor(layout_.b_update, h);
    fill_tensor(layout_.b_cand, h);
    fill_tensor(layout_.head_w, h);
    fill_tensor(layout_.head_b, h);
    return params;
}

template <class T>
std::vector<T> CnnGru<T>::forward(std::span<const float* const> clips, std::span<const T> params,
                                  bool train_mode, std::uint64_t dropout_seed,
                                  ForwardCache<T>* cache) const {
    if (params.size() != layout_.total) throw std::invalid_argument("forward: parameter vector size mismatch");
    for (const T p : params) {
        if (!std::isfinite(static_cast<double>(p))) throw std::invalid_argument("forward: non-finite parameter");
    }
    const std::size_t batch = clips.size();
    if (batch == 0) throw std::invalid_argument("forward: empty batch");
    if (train_mode && cache == nullptr) throw std::invalid_argument("forward: train mode requires a cache");

    const std::size_t frames = spec_.clip_frames;
    const std::size_t hw = spec_.input_hw;
    const std::size_t in_plane = hw * hw;
    const std::size_t z_dim = spec_.feature_size();
    const std::size_t h_dim = spec_.gru_hidden;
    const std::size_t n_classes = spec_.num_classes;
    const auto out_hw = spec_.conv_out_hw();
    const std::size_t n_layers = spec_.conv.size();
    const std::size_t last_hw = out_hw.back();
    const std::size_t pooled_hw = last_hw / spec_.pool;

    ForwardCache<T> local;
    ForwardCache<T>& c = cache ? *cache : local;
    c.batch = batch;
    c.train_mode = train_mode;
    c.input.resize(batch * frames * in_plane);
    c.conv_out.assign(n_layers, {});
    for (std::size_t l = 0; l < n_layers; ++l) {
        c.conv_out[l].resize(batch * frames * spec_.conv[l].out_channels * out_hw[l] * out_hw[l]);
    }
    c.features.assign(frames * batch * z_dim, T{});
    c.hidden.assign((frames + 1) * batch * h_dim, T{});
    c.gate_reset.assign(frames * batch * h_dim, T{});
    c.gate_update.assign(frames * batch * h_dim, T{});
    c.gate_cand.assign(frames * batch * h_dim, T{});

    // scratch: im2col for the widest layer
    std::size_t max_col = 0;
    std::size_t in_ch = 1;
    for (std::size_t l = 0; l < n_layers; ++l) {
        max_col = std::max(max_col, in_ch * spec_.conv[l].kernel * spec_.conv[l].kernel * out_hw[l] * out_hw[l]);
        in_ch = spec_.conv[l].out_channels;
    }
    std::vector<T> col_buf(max_col);

    // per-frame CNN + flatten
    for (std::size_t b = 0; b < batch; ++b) {
        const float* src = clips[b];
        T* dst = c.input.data() + b * frames * in_plane;
        for (std::size_t i = 0; i < frames * in_plane; ++i) dst[i] = static_cast<T>(src[i]);
    }
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t f = 0; f < frames; ++f) {
            const T* frame_in = c.input.data() + (b * frames + f) * in_plane;
            std::size_t cur_ch = 1;
            std::size_t cur_hw = hw;
            const T* cur = frame_in;
            for (std::size_t l = 0; l < n_layers; ++l) {
                const auto& cl = spec_.conv[l];
                T* out = c.conv_out[l].data() + (b * frames + f) * cl.out_channels * out_hw[l] * out_hw[l];
                conv_forward(cur, cur_ch, cur_hw, params.data() + layout_.conv_w[l].offset,
                             params.data() + layout_.conv_b[l].offset, cl.out_channels, cl.kernel, cl.stride,
                             out_hw[l], out, col_buf.data());
                cur = out;
                cur_ch = cl.out_channels;
                cur_hw = out_hw[l];
            }
            // average pool + flatten into [f][b][z]
            T* feat = c.features.data() + (f * batch + b) * z_dim;
            const std::size_t pool = spec_.pool;
            const T inv = static_cast<T>(1.0 / static_cast<double>(pool * pool));
            std::size_t zi = 0;
            for (std::size_t ch = 0; ch < cur_ch; ++ch) {
                const T* plane = cur + ch * last_hw * last_hw;
                for (std::size_t py = 0; py < pooled_hw; ++py) {
                    for (std::size_t px = 0; px < pooled_hw; ++px, ++zi) {
                        T acc{};
                        for (std::size_t dy = 0; dy < pool; ++dy) {
                            for (std::size_t dx = 0; dx < pool; ++dx) {
                                acc += plane[(py * pool + dy) * last_hw + (px * pool + dx)];
                            }
                        }
                        feat[zi] = acc * inv;
                    }
                }
            }
        }
    }

    // GRU over frames, batched per step
    const T* w_r = params.data() + layout_.w_reset.offset;
    const T* w_u = params.data() + layout_.w_update.offset;
    const T* w_c = params.data() + layout_.w_cand.offset;
    const T* u_r = params.data() + layout_.u_reset.offset;
    const T* u_u = params.data() + layout_.u_update.offset;
    const T* u_c = params.data() + layout_.u_cand.offset;
    const T* b_r = params.data() + layout_.b_reset.offset;
    const T* b_u = params.data() + layout_.b_update.offset;
    const T* b_c = params.data() + layout_.b_cand.offset;

    auto sigmoid = [](T x) { return T{1} / (T{1} + std::exp(-x)); };
    for (std::size_t f = 0; f < frames; ++f) {
        for (std::size_t b = 0; b < batch; ++b) {
            const T* z_t = c.features.data() + (f * batch + b) * z_dim;
            const T* h_prev = c.hidden.data() + (f * batch + b) * h_dim;
            T* h_next = c.hidden.data() + ((f + 1) * batch + b) * h_dim;
            T* r_g = c.gate_reset.data() + (f * batch + b) * h_dim;
            T* u_g = c.gate_update.data() + (f * batch + b) * h_dim;
            T* c_g = c.gate_cand.data() + (f * batch + b) * h_dim;
            for (std::size_t h = 0; h < h_dim; ++h) {
                const T ar = detail::dot(w_r + h * z_dim, z_t, z_dim) + detail::dot(u_r + h * h_dim, h_prev, h_dim) + b_r[h];
                const T au = detail::dot(w_u + h * z_dim, z_t, z_dim) + detail::dot(u_u + h * h_dim, h_prev, h_dim) + b_u[h];
                r_g[h] = sigmoid(ar);
                u_g[h] = sigmoid(au);
            }
            for (std::size_t h = 0; h < h_dim; ++h) {
                const T ac = detail::dot(w_c + h * z_dim, z_t, z_dim) +
                             r_g[h] * detail::dot(u_c + h * h_dim, h_prev, h_dim) + b_c[h];
                c_g[h] = std::tanh(ac);
                h_next[h] = (T{1} - u_g[h]) * c_g[h] + u_g[h] * h_prev[h];
            }
        }
    }

    // dropout on the final hidden state (train only, inverted scaling)
    const T* h_final = c.hidden.data() + frames * batch * h_dim;
    std::vector<T> head_in(h_final, h_final + batch * h_dim);
    if (train_mode && spec_.dropout_rate > 0.0) {
        c.dropout_mask.resize(batch * h_dim);
        std::mt19937_64 rng(dropout_seed);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const T keep_scale = static_cast<T>(1.0 / (1.0 - spec_.dropout_rate));
        for (std::size_t i = 0; i < head_in.size(); ++i) {
            const bool keep = unit(rng) >= spec_.dropout_rate;
            c.dropout_mask[i] = keep ? keep_scale : T{};
            head_in[i] *= c.dropout_mask[i];
        }
    } else {
        c.dropout_mask.clear();
    }

    std::vector<T> logits(batch * n_classes);
    const T* a_w = params.data() + layout_.head_w.offset;
    const T* a_b = params.data() + layout_.head_b.offset;
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t k = 0; k < n_classes; ++k) {
            logits[b * n_classes + k] = detail::dot(a_w + k * h_dim, head_in.data() + b * h_dim, h_dim) + a_b[k];
        }
    }

    if (cache) {
        // stash the dropout-scaled head input at the tail of `hidden`
        c.valid = true;
        if (train_mode && !c.dropout_mask.empty()) {
            T* slot = c.hidden.data() + frames * batch * h_dim;
            std::copy(head_in.begin(), head_in.end(), slot);
        }
    }
    return logits;
}

template <class T>
T CnnGru<T>::softmax_cross_entropy(std::span<const T> logits, std::span<const int> labels,
                                   std::size_t num_classes, std::vector<T>* dlogits) {
    const std::size_t batch = labels.size();
    if (logits.size() != batch * num_classes) throw std::invalid_argument("softmax_cross_entropy: shape mismatch");
    if (dlogits) dlogits->assign(logits.begin(), logits.end());
    T loss{};
    for (std::size_t b = 0; b < batch; ++b) {
        const T* row = logits.data() + b * num_classes;
        const int y = labels[b];
        if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
            throw std::invalid_argument("softmax_cross_entropy: label out of range");
        }
        T max_logit = row[0];
        for (std::size_t k = 1; k < num_classes; ++k) max_logit = std::max(max_logit, row[k]);
        T sum_exp{};
        for (std::size_t k = 0; k < num_classes; ++k) sum_exp += std::exp(row[k] - max_logit);
        const T lse = max_logit + std::log(sum_exp);
        loss += lse - row[static_cast<std::size_t>(y)];
        if (dlogits) {
            T* drow = dlogits->data() + b * num_classes;
            for (std::size_t k = 0; k < num_classes; ++k) {
                drow[k] = std::exp(row[k] - lse);
            }
            drow[static_cast<std::size_t>(y)] -= T{1};
        }
    }
    const T inv_b = T{1} / static_cast<T>(batch);
    if (dlogits) {
        for (auto& v : *dlogits) v *= inv_b;
    }
    return loss * inv_b;
}

template <class T>
std::vector<T> CnnGru<T>::backward(const ForwardCache<T>& cache, std::span<const T> params,
                                   std::span<const T> dlogits) const {
    if (!cache.valid || !cache.train_mode) throw std::invalid_argument("backward: stale or eval-mode cache");
    if (params.size() != layout_.total) throw std::invalid_argument("backward: parameter vector size mismatch");

    const std::size_t batch = cache.batch;
    const std::size_t frames = spec_.clip_frames;
    const std::size_t hw = spec_.input_hw;
    const std::size_t z_dim = spec_.feature_size();
    const std::size_t h_dim = spec_.gru_hidden;
    const std::size_t n_classes = spec_.num_classes;
    const auto out_hw = spec_.conv_out_hw();
    const std::size_t n_layers = spec_.conv.size();
    const std::size_t last_hw = out_hw.back();
    const std::size_t pooled_hw = last_hw / spec_.pool;

    std::vector<T> grads(layout_.total, T{});

    // head
    const T* head_in = cache.hidden.data() + frames * batch * h_dim;  // dropout-scaled
    const T* a_w = params.data() + layout_.head_w.offset;
    T* d_aw = grads.data() + layout_.head_w.offset;
    T* d_ab = grads.data() + layout_.head_b.offset;
    std::vector<T> dh(batch * h_dim, T{});
    for (std::size_t b = 0; b < batch; ++b) {
        const T* drow = dlogits.data() + b * n_classes;
        const T* hrow = head_in + b * h_dim;
        T* dh_row = dh.data() + b * h_dim;
        for (std::size_t k = 0; k < n_classes; ++k) {
            detail::axpy(drow[k], hrow, d_aw + k * h_dim, h_dim);
            d_ab[k] += drow[k];
            detail::axpy(drow[k], a_w + k * h_dim, dh_row, h_dim);
        }
    }
    if (!cache.dropout_mask.empty()) {
        for (std::size_t i = 0; i < dh.size(); ++i) dh[i] *= cache.dropout_mask[i];
    }

    // GRU backward through time
    const T* w_r = params.data() + layout_.w_reset.offset;
    const T* w_u = params.data() + layout_.w_update.offset;
    const T* w_c = params.data() + layout_.w_cand.offset;
    const T* u_r = params.data() + layout_.u_reset.offset;
    const T* u_u = params.data() + layout_.u_update.offset;
    const T* u_c = params.data() + layout_.u_cand.offset;
    T* d_wr = grads.data() + layout_.w_reset.offset;
    T* d_wu = grads.data() + layout_.w_update.offset;
    T* d_wc = grads.data() + layout_.w_cand.offset;
    T* d_ur = grads.data() + layout_.u_reset.offset;
    T* d_uu = grads.data() + layout_.u_update.offset;
    T* d_uc = grads.data() + layout_.u_cand.offset;
    T* d_br = grads.data() + layout_.b_reset.offset;
    T* d_bu = grads.data() + layout_.b_update.offset;
    T* d_bc = grads.data() + layout_.b_cand.offset;

    std::vector<T> d_features(frames * batch * z_dim, T{});
    std::vector<T> dh_prev(batch * h_dim);
    for (std::size_t fi = frames; fi-- > 0;) {
        std::fill(dh_prev.begin(), dh_prev.end(), T{});
        for (std::size_t b = 0; b < batch; ++b) {
            const T* z_t = cache.features.data() + (fi * batch + b) * z_dim;
            const T* h_prev = cache.hidden.data() + (fi * batch + b) * h_dim;
            const T* r_g = cache.gate_reset.data() + (fi * batch + b) * h_dim;
            const T* u_g = cache.gate_update.data() + (fi * batch + b) * h_dim;
            const T* c_g = cache.gate_cand.data() + (fi * batch + b) * h_dim;
            const T* dh_row = dh.data() + b * h_dim;
            T* dh_prev_row = dh_prev.data() + b * h_dim;
            T* dz_row = d_features.data() + (fi * batch + b) * z_dim;
            for (std::size_t h = 0; h < h_dim; ++h) {
                const T g = dh_row[h];
                if (g == T{}) continue;
                const T dc = g * (T{1} - u_g[h]);
                const T du = g * (h_prev[h] - c_g[h]);
                dh_prev_row[h] += g * u_g[h];

                const T dac = dc * (T{1} - c_g[h] * c_g[h]);
                const T uc_h = detail::dot(u_c + h * h_dim, h_prev, h_dim);
                const T dr = dac * uc_h;
                const T dau = du * u_g[h] * (T{1} - u_g[h]);
                const T dar = dr * r_g[h] * (T{1} - r_g[h]);

                detail::axpy(dac, z_t, d_wc + h * z_dim, z_dim);
                d_bc[h] += dac;
                detail::axpy(dac * r_g[h], h_prev, d_uc + h * h_dim, h_dim);
                detail::axpy(dac * r_g[h], u_c + h * h_dim, dh_prev_row, h_dim);
                detail::axpy(dac, w_c + h * z_dim, dz_row, z_dim);

                detail::axpy(dau, z_t, d_wu + h * z_dim, z_dim);
                d_bu[h] += dau;
                detail::axpy(dau, h_prev, d_uu + h * h_dim, h_dim);
                detail::axpy(dau, u_u + h * h_dim, dh_prev_row, h_dim);
                detail::axpy(dau, w_u + h * z_dim, dz_row, z_dim);

                detail::axpy(dar, z_t, d_wr + h * z_dim, z_dim);
                d_br[h] += dar;
                detail::axpy(dar, h_prev, d_ur + h * h_dim, h_dim);
                detail::axpy(dar, u_r + h * h_dim, dh_prev_row, h_dim);
                detail::axpy(dar, w_r + h * z_dim, dz_row, z_dim);
            }
        }
        dh.swap(dh_prev);
    }

    // conv stack backward, per sample and frame
    const std::size_t in_plane = hw * hw;
    std::size_t max_col = 0, max_din = 0;
    {
        std::size_t in_ch = 1, in_sz = hw;
        for (std::size_t l = 0; l < n_layers; ++l) {
            max_col = std::max(max_col, in_ch * spec_.conv[l].kernel * spec_.conv[l].kernel * out_hw[l] * out_hw[l]);
            max_din = std::max(max_din, in_ch * in_sz * in_sz);
            in_ch = spec_.conv[l].out_channels;
            in_sz = out_hw[l];
        }
    }
    std::vector<T> col_buf(max_col), dcol_buf(max_col);
    std::vector<T> d_out_buf, d_in_buf(max_din);

    const std::size_t pool = spec_.pool;
    const T inv_pool = static_cast<T>(1.0 / static_cast<double>(pool * pool));
    const std::size_t last_ch = spec_.conv.back().out_channels;

    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t f = 0; f < frames; ++f) {
            // unpool dz into the last conv layer's output gradient
            const T* dz = d_features.data() + (f * batch + b) * z_dim;
            d_out_buf.assign(last_ch * last_hw * last_hw, T{});
            std::size_t zi = 0;
            for (std::size_t ch = 0; ch < last_ch; ++ch) {
                T* plane = d_out_buf.data() + ch * last_hw * last_hw;
                for (std::size_t py = 0; py < pooled_hw; ++py) {
                    for (std::size_t px = 0; px < pooled_hw; ++px, ++zi) {
                        const T g = dz[zi] * inv_pool;
                        for (std::size_t dy = 0; dy < pool; ++dy) {
                            for (std::size_t dx = 0; dx < pool; ++dx) {
                                plane[(py * pool + dy) * last_hw + (px * pool + dx)] = g;
                            }
                        }
                    }
                }
            }

            for (std::size_t l = n_layers; l-- > 0;) {
                const auto& cl = spec_.conv[l];
                const std::size_t o_hw = out_hw[l];
                const std::size_t n_out = o_hw * o_hw;
                const std::size_t i_ch = l == 0 ? 1 : spec_.conv[l - 1].out_channels;
                const std::size_t i_hw = l == 0 ? hw : out_hw[l - 1];
                const std::size_t kk = i_ch * cl.kernel * cl.kernel;
                const T* layer_out = cache.conv_out[l].data() + (b * frames + f) * (cl.out_channels * n_out);
                const T* layer_in = l == 0 ? cache.input.data() + (b * frames + f) * in_plane
                                           : cache.conv_out[l - 1].data() + (b * frames + f) * (i_ch * i_hw * i_hw);

                // ReLU gate
                for (std::size_t i = 0; i < cl.out_channels * n_out; ++i) {
                    if (layer_out[i] <= T{}) d_out_buf[i] = T{};
                }

                im2col(layer_in, i_ch, i_hw, cl.kernel, cl.stride, o_hw, col_buf.data());
                T* d_w = grads.data() + layout_.conv_w[l].offset;
                T* d_b = grads.data() + layout_.conv_b[l].offset;
                const T* w = params.data() + layout_.conv_w[l].offset;
                for (std::size_t co = 0; co < cl.out_channels; ++co) {
                    const T* drow = d_out_buf.data() + co * n_out;
                    for (std::size_t r = 0; r < kk; ++r) {
                        d_w[co * kk + r] += detail::dot(drow, col_buf.data() + r * n_out, n_out);
                    }
                    for (std::size_t i = 0; i < n_out; ++i) d_b[co] += drow[i];
                }

                if (l > 0) {
                    std::fill(dcol_buf.begin(), dcol_buf.begin() + static_cast<std::ptrdiff_t>(kk * n_out), T{});
                    for (std::size_t co = 0; co < cl.out_channels; ++co) {
                        const T* drow = d_out_buf.data() + co * n_out;
                        const T* wrow = w + co * kk;
                        for (std::size_t r = 0; r < kk; ++r) {
                            detail::axpy(wrow[r], drow, dcol_buf.data() + r * n_out, n_out);
                        }
                    }
                    // col2im accumulate
                    std::fill(d_in_buf.begin(), d_in_buf.begin() + static_cast<std::ptrdiff_t>(i_ch * i_hw * i_hw), T{});
                    const long pad = static_cast<long>(cl.kernel / 2);
                    std::size_t row = 0;
                    for (std::size_t ci = 0; ci < i_ch; ++ci) {
                        for (std::size_t ky = 0; ky < cl.kernel; ++ky) {
                            for (std::size_t kx = 0; kx < cl.kernel; ++kx, ++row) {
                                const T* src = dcol_buf.data() + row * n_out;
                                for (std::size_t oy = 0; oy < o_hw; ++oy) {
                                    const long iy = static_cast<long>(oy * cl.stride + ky) - pad;
                                    if (iy < 0 || iy >= static_cast<long>(i_hw)) continue;
                                    T* dst_row = d_in_buf.data() + ci * i_hw * i_hw + static_cast<std::size_t>(iy) * i_hw;
                                    for (std::size_t ox = 0; ox < o_hw; ++ox) {
                                        const long ix = static_cast<long>(ox * cl.stride + kx) - pad;
                                        if (ix < 0 || ix >= static_cast<long>(i_hw)) continue;
                                        dst_row[static_cast<std::size_t>(ix)] += src[oy * o_hw + ox];
                                    }
                                }
                            }
                        }
                    }
                    d_out_buf.assign(d_in_buf.begin(),
                                     d_in_buf.begin() + static_cast<std::ptrdiff_t>(i_ch * i_hw * i_hw));
                }
            }
        }
    }
    return grads;
}

}  // namespace rdsense::learn
