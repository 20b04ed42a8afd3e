// SPDX-License-Identifier: Apache-2.0
#include "rdsense/model.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>

namespace rdsense::learn {

void CnnGruSpec::validate() const {
    if (conv.empty()) throw std::invalid_argument("CnnGruSpec: need at least one conv layer");
    for (const auto& l : conv) {
        if (l.out_channels == 0 || l.stride == 0) throw std::invalid_argument("CnnGruSpec: bad conv layer");
        if (l.kernel % 2 == 0) throw std::invalid_argument("CnnGruSpec: kernels must be odd (same padding)");
    }
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw std::invalid_argument("CnnGruSpec: dropout must be in [0, 1)");
    if (gru_hidden == 0 || num_classes == 0 || clip_frames == 0) throw std::invalid_argument("CnnGruSpec: zero dimension");
    const auto hw = conv_out_hw();
    if (pool == 0 || hw.back() % pool != 0) {
        throw std::invalid_argument("CnnGruSpec: pool must divide the final conv output size");
    }
}

std::vector<std::size_t> CnnGruSpec::conv_out_hw() const {
    std::vector<std::size_t> out;
    std::size_t cur = input_hw;
    for (const auto& l : conv) {
        const std::size_t pad = l.kernel / 2;
        cur = (cur + 2 * pad - l.kernel) / l.stride + 1;
        out.push_back(cur);
    }
    return out;
}

std::size_t CnnGruSpec::feature_size() const {
    const auto hw = conv_out_hw();
    const std::size_t pooled = hw.back() / pool;
    return conv.back().out_channels * pooled * pooled;
}

ModelLayout ModelLayout::build(const CnnGruSpec& spec) {
    ModelLayout l;
    std::size_t off = 0;
    auto add = [&off](std::size_t rows, std::size_t cols) {
        Tensor t{off, rows, cols};
        off += rows * cols;
        return t;
    };
    std::size_t in_ch = 1;
    for (const auto& c : spec.conv) {
        l.conv_w.push_back(add(c.out_channels, in_ch * c.kernel * c.kernel));
        l.conv_b.push_back(add(c.out_channels, 1));
        in_ch = c.out_channels;
    }
    const std::size_t z = spec.feature_size();
    const std::size_t h = spec.gru_hidden;
    l.w_reset = add(h, z);
    l.w_update = add(h, z);
    l.w_cand = add(h, z);
    l.u_reset = add(h, h);
    l.u_update = add(h, h);
    l.u_cand = add(h, h);
    l.b_reset = add(h, 1);
    l.b_update = add(h, 1);
    l.b_cand = add(h, 1);
    l.head_w = add(spec.num_classes, h);
    l.head_b = add(spec.num_classes, 1);
    l.total = off;
    return l;
}

ModelStats count_params_flops(const CnnGruSpec& spec) {
    spec.validate();
    ModelStats stats;
    stats.params = ModelLayout::build(spec).total;

    double macs = 0.0;
    const auto hw = spec.conv_out_hw();
    std::size_t in_ch = 1;
    for (std::size_t l = 0; l < spec.conv.size(); ++l) {
        const auto& c = spec.conv[l];
        macs += static_cast<double>(hw[l] * hw[l]) * static_cast<double>(c.out_channels) *
                static_cast<double>(in_ch * c.kernel * c.kernel);
        in_ch = c.out_channels;
    }
    macs *= static_cast<double>(spec.clip_frames);
    const auto z = static_cast<double>(spec.feature_size());
    const auto h = static_cast<double>(spec.gru_hidden);
    macs += static_cast<double>(spec.clip_frames) * 3.0 * (h * z + h * h);
    macs += static_cast<double>(spec.num_classes) * h;
    stats.gflops = 2.0 * macs / 1e9;
    return stats;
}

void TrainConfig::validate() const {
    if (learning_rate <= 0.0 || beta1 <= 0.0 || beta1 >= 1.0 || beta2 <= 0.0 || beta2 >= 1.0 ||
        epsilon <= 0.0 || weight_decay < 0.0) {
        throw std::invalid_argument("TrainConfig: bad optimizer constants");
    }
    if (batch_size == 0 || max_epochs == 0 || runs == 0) throw std::invalid_argument("TrainConfig: zero size");
}

namespace {

int label_of(const rd::RDClip& clip) {
    if (!clip.label) throw std::invalid_argument("train/evaluate: unlabeled clip in a labeled split");
    return static_cast<int>(*clip.label);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    std::uint64_t x = a * 0x9E3779B97F4A7C15ull + b * 0xBF58476D1CE4E5B9ull + c * 0x94D049BB133111EBull + 1;
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ull;
    x ^= x >> 27;
    return x;
}

std::vector<int> predict_with_model(const CnnGru<float>& model, std::span<const float> params,
                                    const std::vector<rd::RDClip>& clips,
                                    const std::vector<std::size_t>& idx, std::size_t batch_size) {
    std::vector<int> out;
    out.reserve(idx.size());
    const std::size_t n_classes = model.spec().num_classes;
    for (std::size_t begin = 0; begin < idx.size(); begin += batch_size) {
        const std::size_t n = std::min(batch_size, idx.size() - begin);
        std::vector<const float*> ptrs(n);
        for (std::size_t i = 0; i < n; ++i) ptrs[i] = clips[idx[begin + i]].values.data();
        const auto logits = model.forward(ptrs, params, false, 0, nullptr);
        for (std::size_t i = 0; i < n; ++i) {
            const float* row = logits.data() + i * n_classes;
            out.push_back(static_cast<int>(std::max_element(row, row + n_classes) - row));
        }
    }
    return out;
}

}  // namespace

std::vector<int> predict(const CnnGruSpec& spec, std::span<const float> params,
                         const std::vector<rd::RDClip>& clips, const std::vector<std::size_t>& idx,
                         std::size_t batch_size) {
    CnnGru<float> model(spec);
    return predict_with_model(model, params, clips, idx, batch_size);
}

TrainResult train(const std::vector<rd::RDClip>& clips, const std::vector<std::size_t>& train_idx,
                  const std::vector<std::size_t>& val_idx, const std::vector<std::size_t>& test_idx,
                  const CnnGruSpec& spec, const TrainConfig& cfg) {
    spec.validate();
    cfg.validate();
    if (train_idx.empty() || val_idx.empty() || test_idx.empty()) {
        throw std::invalid_argument("train: every split must be non-empty");
    }
    const std::size_t expected = spec.clip_frames * spec.input_hw * spec.input_hw;
    for (auto i : train_idx) {
        if (clips.at(i).values.size() != expected) throw std::invalid_argument("train: clip shape mismatch");
    }

    CnnGru<float> model(spec);
    const std::size_t n_classes = spec.num_classes;

    std::vector<int> val_labels, test_labels;
    val_labels.reserve(val_idx.size());
    for (auto i : val_idx) val_labels.push_back(label_of(clips[i]));
    test_labels.reserve(test_idx.size());
    for (auto i : test_idx) test_labels.push_back(label_of(clips[i]));

    TrainResult result;
    double best_overall_val = -1.0;

    for (std::size_t run = 0; run < cfg.runs; ++run) {
        RunSummary summary;
        summary.run = run;
        const std::uint64_t run_seed = mix_seed(cfg.rng_seed, run, 0xACCE55ull);
        auto params = model.init_params(run_seed);
        AdamState<float> adam(params.size());

        std::vector<float> best_params = params;
        double best_val = -1.0;
        std::size_t best_epoch = 0;
        std::size_t stall = 0;

        std::vector<std::size_t> order(train_idx);
        ForwardCache<float> cache;

        for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
            std::mt19937_64 shuffle_rng(mix_seed(run_seed, epoch, 0x5A1ull));
            std::shuffle(order.begin(), order.end(), shuffle_rng);

            double epoch_loss = 0.0;
            std::size_t seen = 0;
            for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
                const std::size_t n = std::min(cfg.batch_size, order.size() - begin);
                std::vector<const float*> ptrs(n);
                std::vector<int> labels(n);
                for (std::size_t i = 0; i < n; ++i) {
                    ptrs[i] = clips[order[begin + i]].values.data();
                    labels[i] = label_of(clips[order[begin + i]]);
                }
                const auto logits = model.forward(ptrs, params, true, mix_seed(run_seed, epoch, begin), &cache);
                std::vector<float> dlogits;
                const float loss = CnnGru<float>::softmax_cross_entropy(logits, labels, n_classes, &dlogits);
                const auto grads = model.backward(cache, params, dlogits);
                adam.update(params, grads, cfg);
                epoch_loss += static_cast<double>(loss) * static_cast<double>(n);
                seen += n;
            }
            epoch_loss /= static_cast<double>(seen);
            summary.train_loss.push_back(epoch_loss);

            const auto val_pred = predict_with_model(model, params, clips, val_idx, cfg.batch_size);
            const auto val_rep = evaluate(val_pred, val_labels, n_classes);
            summary.val_accuracy.push_back(val_rep.accuracy_pct);

            if (val_rep.accuracy_pct > best_val) {
                best_val = val_rep.accuracy_pct;
                best_params = params;
                best_epoch = epoch;
                stall = 0;
            } else {
                ++stall;
                if (cfg.early_stop_patience > 0 && stall >= cfg.early_stop_patience) break;
            }
        }
        summary.best_val_accuracy_pct = best_val;
        summary.best_epoch = best_epoch;
        summary.epochs_run = summary.train_loss.size();
        result.runs.push_back(summary);

        if (best_val > best_overall_val) {
            best_overall_val = best_val;
            result.selected_run = run;
            result.params = std::move(best_params);
        }
    }

    const auto test_pred = predict_with_model(model, result.params, clips, test_idx, cfg.batch_size);
    result.report = evaluate(test_pred, test_labels, n_classes);
    const auto stats = count_params_flops(spec);
    result.report.params = stats.params;
    result.report.gflops = stats.gflops;
    result.report.loss_curve = result.runs[result.selected_run].train_loss;
    return result;
}

EvalReport nearest_centroid(const std::vector<rd::RDClip>& clips,
                            const std::vector<std::size_t>& train_idx,
                            const std::vector<std::size_t>& test_idx, std::size_t num_classes) {
    if (train_idx.empty() || test_idx.empty()) throw std::invalid_argument("nearest_centroid: empty split");
    const std::size_t hw = clips.at(train_idx.front()).frame_hw;
    const std::size_t plane = hw * hw;

    auto mean_frame = [&](const rd::RDClip& c) {
        std::vector<double> mean(plane, 0.0);
        for (std::size_t f = 0; f < c.num_frames; ++f) {
            const float* src = c.values.data() + f * plane;
            for (std::size_t i = 0; i < plane; ++i) mean[i] += static_cast<double>(src[i]);
        }
        const double inv = 1.0 / static_cast<double>(c.num_frames);
        for (auto& v : mean) v *= inv;
        return mean;
    };

    std::vector<std::vector<double>> centroids(num_classes, std::vector<double>(plane, 0.0));
    std::vector<std::size_t> counts(num_classes, 0);
    for (auto i : train_idx) {
        const int y = label_of(clips[i]);
        const auto m = mean_frame(clips[i]);
        for (std::size_t k = 0; k < plane; ++k) centroids[static_cast<std::size_t>(y)][k] += m[k];
        counts[static_cast<std::size_t>(y)]++;
    }
    for (std::size_t c = 0; c < num_classes; ++c) {
        if (counts[c] == 0) throw std::invalid_argument("nearest_centroid: class " + std::to_string(c) + " missing from train split");
        for (auto& v : centroids[c]) v /= static_cast<double>(counts[c]);
    }

    std::vector<int> pred, truth;
    for (auto i : test_idx) {
        const auto m = mean_frame(clips[i]);
        double best = std::numeric_limits<double>::max();
        int best_c = 0;
        for (std::size_t c = 0; c < num_classes; ++c) {
            double dist = 0.0;
            for (std::size_t k = 0; k < plane; ++k) {
                const double d = m[k] - centroids[c][k];
                dist += d * d;
            }
            if (dist < best) {
                best = dist;
                best_c = static_cast<int>(c);
            }
        }
        pred.push_back(best_c);
        truth.push_back(label_of(clips[i]));
    }
    return evaluate(pred, truth, num_classes);
}

namespace {
constexpr std::array<char, 4> kCheckpointMagic = {'R', 'D', 'C', 'K'};

std::uint64_t fnv1a_bytes(const void* data, std::size_t len, std::uint64_t state) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        state ^= p[i];
        state *= 0x100000001B3ull;
    }
    return state;
}
}  // namespace

void save_checkpoint(const std::filesystem::path& path, const CnnGruSpec& spec,
                     std::span<const float> params) {
    const auto layout = ModelLayout::build(spec);
    if (params.size() != layout.total) throw std::invalid_argument("save_checkpoint: parameter count mismatch");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
    os.write(kCheckpointMagic.data(), kCheckpointMagic.size());
    auto w32 = [&os](std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); };
    auto w64 = [&os](std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); };
    w32(1);  // version
    w32(static_cast<std::uint32_t>(spec.conv.size()));
    for (const auto& c : spec.conv) {
        w32(static_cast<std::uint32_t>(c.out_channels));
        w32(static_cast<std::uint32_t>(c.kernel));
        w32(static_cast<std::uint32_t>(c.stride));
    }
    w32(static_cast<std::uint32_t>(spec.pool));
    w32(static_cast<std::uint32_t>(spec.gru_hidden));
    const auto dropout = static_cast<float>(spec.dropout_rate);
    os.write(reinterpret_cast<const char*>(&dropout), 4);
    w32(static_cast<std::uint32_t>(spec.num_classes));
    w32(static_cast<std::uint32_t>(spec.input_hw));
    w32(static_cast<std::uint32_t>(spec.clip_frames));
    w64(params.size());
    os.write(reinterpret_cast<const char*>(params.data()), static_cast<std::streamsize>(params.size() * 4));
    w64(fnv1a_bytes(params.data(), params.size() * 4, 0xCBF29CE484222325ull));
    if (!os) throw std::runtime_error("save_checkpoint: write failed");
}

std::pair<CnnGruSpec, std::vector<float>> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
    std::array<char, 4> magic{};
    is.read(magic.data(), 4);
    if (!is || magic != kCheckpointMagic) throw std::runtime_error("load_checkpoint: bad magic");
    auto r32 = [&is]() {
        std::uint32_t v{};
        is.read(reinterpret_cast<char*>(&v), 4);
        if (!is) throw std::runtime_error("load_checkpoint: truncated");
        return v;
    };
    auto r64 = [&is]() {
        std::uint64_t v{};
        is.read(reinterpret_cast<char*>(&v), 8);
        if (!is) throw std::runtime_error("load_checkpoint: truncated");
        return v;
    };
    if (r32() != 1) throw std::runtime_error("load_checkpoint: unsupported version");
    CnnGruSpec spec;
    spec.conv.clear();
    const auto n_layers = r32();
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        ConvLayerSpec c;
        c.out_channels = r32();
        c.kernel = r32();
        c.stride = r32();
        spec.conv.push_back(c);
    }
    spec.pool = r32();
    spec.gru_hidden = r32();
    float dropout = 0.0f;
    is.read(reinterpret_cast<char*>(&dropout), 4);
    spec.dropout_rate = dropout;
    spec.num_classes = r32();
    spec.input_hw = r32();
    spec.clip_frames = r32();
    const auto count = r64();
    std::vector<float> params(count);
    is.read(reinterpret_cast<char*>(params.data()), static_cast<std::streamsize>(count * 4));
    if (!is) throw std::runtime_error("load_checkpoint: truncated parameters");
    const auto stored = r64();
    if (stored != fnv1a_bytes(params.data(), params.size() * 4, 0xCBF29CE484222325ull)) {
        throw std::runtime_error("load_checkpoint: checksum mismatch");
    }
    spec.validate();
    if (ModelLayout::build(spec).total != params.size()) {
        throw std::runtime_error("load_checkpoint: parameter count inconsistent with the layout");
    }
    return {spec, std::move(params)};
}

}  // namespace rdsense::learn
