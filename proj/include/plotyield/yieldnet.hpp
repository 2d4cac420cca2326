#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "plotyield/binio.hpp"
#include "plotyield/error.hpp"
#include "plotyield/image.hpp"
#include "plotyield/tensornet.hpp"

namespace plotyield {

template <typename T>
TensorT<T> image_to_tensor(const Image& img) {
    TensorT<T> t = TensorT<T>::zeros({1, img.channels, img.height, img.width});
    for (size_t i = 0; i < img.data.size(); ++i) t.data[i] = static_cast<T>(img.data[i]);
    return t;
}

// Feature backbone contract: stateless image -> (C, H', W') map with fixed
// channel count and downsample factor. Implementations stay frozen during
// yield training.
template <typename T>
class FeatureExtractorT {
public:
    virtual ~FeatureExtractorT() = default;
    virtual TensorT<T> extract(const Image& img) const = 0;
    virtual int channels() const = 0;
    virtual int downsample() const = 0;
};

// Small three-block conv stand-in for the real seed-counting backbone:
// 3 -> 16 -> 32 -> C, 3x3 kernels, stride 2 and ReLU per block, so the
// spatial dims shrink by 8 (ceil division per block).
template <typename T>
class ReferenceExtractorT final : public FeatureExtractorT<T> {
public:
    explicit ReferenceExtractorT(int out_channels = 32, uint64_t seed = 0)
        : out_channels_(out_channels) {
        require(out_channels >= 1, "extractor_channels", "output channels must be >= 1");
        std::mt19937_64 rng(seed);
        const int widths[4] = {3, 16, 32, out_channels};
        for (int i = 0; i < 3; ++i) {
            int cin = widths[i], cout = widths[i + 1];
            params_.emplace_back("conv" + std::to_string(i + 1) + ".w",
                                 he_uniform<T>({cout, cin, 3, 3}, int64_t{cin} * 9, rng));
            params_.emplace_back("conv" + std::to_string(i + 1) + ".b",
                                 TensorT<T>::zeros({cout}));
        }
    }

    TensorT<T> extract(const Image& img) const override {
        require(img.channels == 3, "extractor_channels",
                "reference extractor expects 3-channel images");
        TensorT<T> x = image_to_tensor<T>(img);
        for (int i = 0; i < 3; ++i)
            x = relu(conv2d(x, params_[2 * i].second, params_[2 * i + 1].second, 2, 1));
        // squeeze the unit batch dim
        return TensorT<T>({x.dim(1), x.dim(2), x.dim(3)}, std::move(x.data));
    }

    int channels() const override { return out_channels_; }
    int downsample() const override { return 8; }

    const std::vector<std::pair<std::string, TensorT<T>>>& named_parameters() const {
        return params_;
    }

    // Rebuild from checkpoint tensors named conv{1..3}.{w,b}.
    static ReferenceExtractorT from_tensors(
        const std::vector<std::pair<std::string, TensorT<T>>>& tensors) {
        ReferenceExtractorT ex(1, 0);
        ex.params_.clear();
        for (int i = 1; i <= 3; ++i)
            for (const char* kind : {"w", "b"}) {
                std::string name = "conv" + std::to_string(i) + "." + kind;
                const TensorT<T>* found = nullptr;
                for (const auto& [n, t] : tensors)
                    if (n == name) found = &t;
                require(found != nullptr, "ckpt_missing",
                        "extractor checkpoint is missing tensor '" + name + "'");
                ex.params_.emplace_back(name, *found);
            }
        const auto& w1 = ex.params_[0].second;
        const auto& w3 = ex.params_[4].second;
        require(w1.rank() == 4 && w1.dim(1) == 3 && w3.rank() == 4, "ckpt_shape",
                "extractor checkpoint tensors have unexpected shapes");
        ex.out_channels_ = w3.dim(0);
        return ex;
    }

private:
    int out_channels_;
    std::vector<std::pair<std::string, TensorT<T>>> params_;
};

using FeatureExtractor = FeatureExtractorT<double>;
using ReferenceExtractor = ReferenceExtractorT<double>;

// ---------------------------------------------------------------------------
// Feature map files: the FIMG container with (w, h, c) = (W, H, C); the f32
// payload is exactly the row-major (C, H, W) tensor.
// ---------------------------------------------------------------------------

template <typename T>
void save_feature_map(const std::string& path, const TensorT<T>& map) {
    require(map.rank() == 3, "feature_shape", "feature maps are 3-D (C,H,W)");
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("io_open", "cannot open feature map for writing: " + path);
    out.write("FIMG", 4);
    binio::put_u32le(out, static_cast<uint32_t>(map.dim(2)));
    binio::put_u32le(out, static_cast<uint32_t>(map.dim(1)));
    binio::put_u32le(out, static_cast<uint32_t>(map.dim(0)));
    for (T v : map.data) binio::put_f32le(out, static_cast<float>(v));
    if (!out) fail("io_write", "failed writing feature map: " + path);
}

template <typename T>
TensorT<T> load_feature_map(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("io_open", "cannot open feature map: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "FIMG", 4) != 0)
        fail("fimg_magic", "not a FIMG stream (bad magic)");
    uint32_t w = binio::get_u32le(in, "width");
    uint32_t h = binio::get_u32le(in, "height");
    uint32_t c = binio::get_u32le(in, "channels");
    require(w > 0 && h > 0 && c > 0 && w < (1u << 20) && h < (1u << 20) && c <= (1u << 16),
            "fimg_header", "implausible FIMG dimensions");
    TensorT<T> t = TensorT<T>::zeros({static_cast<int>(c), static_cast<int>(h),
                                      static_cast<int>(w)});
    for (auto& v : t.data) v = static_cast<T>(binio::get_f32le(in, "payload"));
    return t;
}

// ---------------------------------------------------------------------------
// Fusion
// ---------------------------------------------------------------------------

inline constexpr int kMapsPerSide = 10;

// Element-wise sum of the 10 maps of each side, concatenated along the
// channel axis: (C,H,W) x 20 -> (2C,H,W). The addends are summed in a
// canonical order so the result is exactly invariant under permutations
// within a side.
template <typename T>
TensorT<T> fuse(const std::vector<TensorT<T>>& side_a, const std::vector<TensorT<T>>& side_b) {
    require(side_a.size() == kMapsPerSide && side_b.size() == kMapsPerSide, "fuse_group_size",
            "fuse expects exactly 10 feature maps per side");
    const auto& shape = side_a.front().shape;
    require(shape.size() == 3, "fuse_shape", "feature maps must be 3-D (C,H,W)");
    for (const auto* group : {&side_a, &side_b})
        for (const auto& m : *group)
            require(m.shape == shape, "fuse_shape", "feature maps must share one shape");

    auto sorted_ptrs = [](const std::vector<TensorT<T>>& group) {
        std::vector<const TensorT<T>*> ptrs;
        for (const auto& m : group) ptrs.push_back(&m);
        std::sort(ptrs.begin(), ptrs.end(), [](const TensorT<T>* a, const TensorT<T>* b) {
            return std::lexicographical_compare(a->data.begin(), a->data.end(),
                                                b->data.begin(), b->data.end());
        });
        return ptrs;
    };

    const int c = shape[0], h = shape[1], w = shape[2];
    TensorT<T> out = TensorT<T>::zeros({2 * c, h, w});
    const int64_t plane = static_cast<int64_t>(c) * h * w;
    for (const TensorT<T>* m : sorted_ptrs(side_a))
        for (int64_t i = 0; i < plane; ++i) out.data[i] += m->data[i];
    for (const TensorT<T>* m : sorted_ptrs(side_b))
        for (int64_t i = 0; i < plane; ++i) out.data[plane + i] += m->data[i];
    return out;
}

// ---------------------------------------------------------------------------
// Yield Regression Module: conv(3x3, 2C->conv_out, stride 1, pad 1) -> ReLU ->
// maxpool(2x2, stride 2) -> flatten -> fc1 -> ReLU -> fc2 -> ReLU -> fc3 -> 1.
// ---------------------------------------------------------------------------

struct YieldRegressorConfig {
    int conv_out = 64;
    int fc1_width = 256;
    int fc2_width = 64;
};

template <typename T>
class YieldRegressionModuleT {
public:
    YieldRegressionModuleT(int in_channels, int in_h, int in_w,
                           const YieldRegressorConfig& cfg = {}, uint64_t seed = 1)
        : in_channels_(in_channels), in_h_(in_h), in_w_(in_w), cfg_(cfg) {
        require(in_channels >= 1 && in_h >= 2 && in_w >= 2, "yrm_shape",
                "fused map must be at least 2x2 with >= 1 channel");
        pooled_h_ = in_h / 2;
        pooled_w_ = in_w / 2;
        flat_ = cfg.conv_out * pooled_h_ * pooled_w_;

        std::mt19937_64 rng(seed);
        auto add = [&](const std::string& name, std::vector<int> shape, int64_t fan_in) {
            params_.emplace_back(name, he_uniform<T>(std::move(shape), fan_in, rng));
        };
        add("yrm.conv.w", {cfg.conv_out, in_channels, 3, 3}, int64_t{in_channels} * 9);
        params_.emplace_back("yrm.conv.b", TensorT<T>::zeros({cfg.conv_out}));
        add("yrm.fc1.w", {cfg.fc1_width, flat_}, flat_);
        params_.emplace_back("yrm.fc1.b", TensorT<T>::zeros({cfg.fc1_width}));
        add("yrm.fc2.w", {cfg.fc2_width, cfg.fc1_width}, cfg.fc1_width);
        params_.emplace_back("yrm.fc2.b", TensorT<T>::zeros({cfg.fc2_width}));
        add("yrm.fc3.w", {1, cfg.fc2_width}, cfg.fc2_width);
        params_.emplace_back("yrm.fc3.b", TensorT<T>::zeros({1}));
    }

    // Unclamped scalar output for one fused map (C,H,W).
    T forward(const TensorT<T>& fused) const {
        check_input(fused.shape);
        TensorT<T> x({1, in_channels_, in_h_, in_w_}, fused.data);
        x = relu(conv2d(x, p(0), p(1), 1, 1));
        x = maxpool2d(x, 2, 2);
        x = TensorT<T>({1, flat_}, std::move(x.data));
        x = relu(fc(x, p(2), p(3)));
        x = relu(fc(x, p(4), p(5)));
        x = fc(x, p(6), p(7));
        return x[0];
    }

    // Batched graph forward over an input node of shape (B, C, H, W); returns
    // the (B, 1) output node. Parameter node ids are appended to param_ids in
    // the same order as named_parameters().
    typename GraphT<T>::NodeId forward_graph(GraphT<T>& g, typename GraphT<T>::NodeId x,
                                             std::vector<typename GraphT<T>::NodeId>& param_ids) const {
        const int batch = g.value(x).dim(0);
        check_input({g.value(x).dim(1), g.value(x).dim(2), g.value(x).dim(3)});
        param_ids.clear();
        for (const auto& [name, t] : params_) param_ids.push_back(g.parameter(t));
        auto h = g.relu(g.conv2d(x, param_ids[0], param_ids[1], 1, 1));
        h = g.maxpool2d(h, 2, 2);
        h = g.reshape(h, {batch, flat_});
        h = g.relu(g.fc(h, param_ids[2], param_ids[3]));
        h = g.relu(g.fc(h, param_ids[4], param_ids[5]));
        return g.fc(h, param_ids[6], param_ids[7]);
    }

    const std::vector<std::pair<std::string, TensorT<T>>>& named_parameters() const {
        return params_;
    }
    std::vector<TensorT<T>*> parameter_ptrs() {
        std::vector<TensorT<T>*> out;
        for (auto& [name, t] : params_) out.push_back(&t);
        return out;
    }

    int in_channels() const { return in_channels_; }
    int in_h() const { return in_h_; }
    int in_w() const { return in_w_; }
    const YieldRegressorConfig& config() const { return cfg_; }

    void save(const std::string& path) const {
        auto tensors = params_;
        TensorT<T> meta({6}, {static_cast<T>(in_channels_), static_cast<T>(in_h_),
                              static_cast<T>(in_w_), static_cast<T>(cfg_.conv_out),
                              static_cast<T>(cfg_.fc1_width), static_cast<T>(cfg_.fc2_width)});
        tensors.emplace_back("yrm.meta", std::move(meta));
        save_checkpoint(path, tensors);
    }

    static YieldRegressionModuleT load(const std::string& path) {
        return from_tensors(load_checkpoint<T>(path));
    }

    static YieldRegressionModuleT from_tensors(
        const std::vector<std::pair<std::string, TensorT<T>>>& tensors) {
        const TensorT<T>* meta = nullptr;
        for (const auto& [name, t] : tensors)
            if (name == "yrm.meta") meta = &t;
        require(meta && meta->size() == 6, "ckpt_meta",
                "checkpoint is missing the yrm.meta tensor");
        YieldRegressorConfig cfg;
        cfg.conv_out = static_cast<int>((*meta)[3]);
        cfg.fc1_width = static_cast<int>((*meta)[4]);
        cfg.fc2_width = static_cast<int>((*meta)[5]);
        YieldRegressionModuleT yrm(static_cast<int>((*meta)[0]), static_cast<int>((*meta)[1]),
                                   static_cast<int>((*meta)[2]), cfg, /*seed=*/0);
        for (auto& [name, t] : yrm.params_) {
            bool found = false;
            for (const auto& [cname, ct] : tensors) {
                if (cname != name) continue;
                require(ct.shape == t.shape, "ckpt_shape",
                        "checkpoint tensor '" + name + "' has an unexpected shape");
                t = ct;
                found = true;
                break;
            }
            require(found, "ckpt_missing", "checkpoint is missing tensor '" + name + "'");
        }
        return yrm;
    }

private:
    void check_input(const std::vector<int>& shape) const {
        require(shape == std::vector<int>({in_channels_, in_h_, in_w_}), "yrm_shape",
                "fused map shape does not match the regressor configuration");
    }
    const TensorT<T>& p(size_t i) const { return params_[i].second; }

    int in_channels_, in_h_, in_w_;
    YieldRegressorConfig cfg_;
    int pooled_h_ = 0, pooled_w_ = 0, flat_ = 0;
    std::vector<std::pair<std::string, TensorT<T>>> params_;
};

using YieldRegressionModule = YieldRegressionModuleT<double>;

// ---------------------------------------------------------------------------
// Prediction and training
// ---------------------------------------------------------------------------

// The 20 sampled plot images, 10 per side.
struct PlotImages {
    std::vector<Image> side_a;
    std::vector<Image> side_b;
};

template <typename T>
TensorT<T> extract_and_fuse(const PlotImages& plot, const FeatureExtractorT<T>& extractor) {
    require(plot.side_a.size() == kMapsPerSide && plot.side_b.size() == kMapsPerSide,
            "fuse_group_size", "a plot needs exactly 10 sampled images per side");
    std::vector<TensorT<T>> a, b;
    a.reserve(kMapsPerSide);
    b.reserve(kMapsPerSide);
    for (const auto& img : plot.side_a) a.push_back(extractor.extract(img));
    for (const auto& img : plot.side_b) b.push_back(extractor.extract(img));
    return fuse(a, b);
}

// Plot-level yield prediction in t/ha, clamped at 0.
template <typename T>
T predict_yield(const PlotImages& plot, const FeatureExtractorT<T>& extractor,
                const YieldRegressionModuleT<T>& regressor) {
    T y = regressor.forward(extract_and_fuse(plot, extractor));
    return std::max(T(0), y);
}

template <typename T>
T predict_yield_from_fused(const TensorT<T>& fused, const YieldRegressionModuleT<T>& regressor) {
    return std::max(T(0), regressor.forward(fused));
}

struct TrainConfig {
    int batch_size = 8;
    int epochs = 50;
    double lr = 1e-4;
    uint64_t seed = 0;
    bool shuffle = true;
};

// Adam/MSE minimization over pre-fused plot maps. Returns the per-epoch mean
// training loss (squared-error mean over all plots seen in the epoch).
template <typename T>
std::vector<double> train_yield_on_features(const std::vector<TensorT<T>>& fused_maps,
                                            const std::vector<T>& targets,
                                            YieldRegressionModuleT<T>& regressor,
                                            const TrainConfig& cfg = {}) {
    require(!fused_maps.empty(), "empty_dataset", "training requires at least one plot");
    require(fused_maps.size() == targets.size(), "dataset_mismatch",
            "one target per fused map is required");
    require(cfg.batch_size >= 1 && cfg.epochs >= 1, "train_config",
            "batch size and epoch count must be >= 1");

    const int n = static_cast<int>(fused_maps.size());
    const int c = regressor.in_channels(), h = regressor.in_h(), w = regressor.in_w();
    const int64_t plane = static_cast<int64_t>(c) * h * w;
    for (const auto& m : fused_maps)
        require(m.shape == std::vector<int>({c, h, w}), "yrm_shape",
                "fused map shape does not match the regressor configuration");

    AdamState<T> adam;
    adam.lr = cfg.lr;
    std::vector<double> history;
    history.reserve(static_cast<size_t>(cfg.epochs));
    std::vector<int> order(fused_maps.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.shuffle) {
            std::mt19937_64 rng(cfg.seed + static_cast<uint64_t>(epoch) * 0x9e3779b9ull + 1);
            std::shuffle(order.begin(), order.end(), rng);
        }
        double sq_sum = 0.0;
        for (int start = 0; start < n; start += cfg.batch_size) {
            const int b = std::min(cfg.batch_size, n - start);
            TensorT<T> batch = TensorT<T>::zeros({b, c, h, w});
            TensorT<T> target = TensorT<T>::zeros({b, 1});
            for (int i = 0; i < b; ++i) {
                const auto& m = fused_maps[static_cast<size_t>(order[start + i])];
                std::copy(m.data.begin(), m.data.end(),
                          batch.data.begin() + static_cast<int64_t>(i) * plane);
                target.data[i] = targets[static_cast<size_t>(order[start + i])];
            }

            GraphT<T> g;
            std::vector<typename GraphT<T>::NodeId> pids;
            auto x = g.input(std::move(batch));
            auto out = regressor.forward_graph(g, x, pids);
            auto loss = g.mse(out, g.input(std::move(target)));
            g.backward(loss);

            std::vector<TensorT<T>*> params = regressor.parameter_ptrs();
            std::vector<const TensorT<T>*> grads;
            grads.reserve(pids.size());
            for (auto id : pids) grads.push_back(&g.grad(id));
            adam_step(params, grads, adam);

            sq_sum += static_cast<double>(g.value(loss)[0]) * b;
        }
        history.push_back(sq_sum / n);
    }
    return history;
}

template <typename T>
struct PlotTrainExample {
    PlotImages images;
    T target = T(0);
};

template <typename T>
struct TrainedYield {
    YieldRegressionModuleT<T> regressor;
    std::vector<double> epoch_loss;
};

// Image-level entry point: extracts with the frozen backbone, fuses per plot,
// then trains the regression head.
template <typename T>
TrainedYield<T> train_yield(const std::vector<PlotTrainExample<T>>& dataset,
                            const FeatureExtractorT<T>& extractor,
                            const TrainConfig& cfg = {},
                            const YieldRegressorConfig& yrm_cfg = {}) {
    require(!dataset.empty(), "empty_dataset", "training requires at least one plot");
    std::vector<TensorT<T>> fused;
    std::vector<T> targets;
    fused.reserve(dataset.size());
    targets.reserve(dataset.size());
    for (const auto& ex : dataset) {
        fused.push_back(extract_and_fuse(ex.images, extractor));
        targets.push_back(ex.target);
    }
    const auto& shape = fused.front().shape;
    TrainedYield<T> out{
        YieldRegressionModuleT<T>(shape[0], shape[1], shape[2], yrm_cfg, cfg.seed ^ 0x5eedull),
        {}};
    out.epoch_loss = train_yield_on_features(fused, targets, out.regressor, cfg);
    return out;
}

}  // namespace plotyield
