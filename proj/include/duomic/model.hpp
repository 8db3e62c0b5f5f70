#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "duomic/nn_ops.hpp"
#include "duomic/rng.hpp"

namespace duomic {

/// Residual-network description. block_counts follows the ResNet stage
/// pattern ([2,2,2,2] = 18-layer, [3,4,6,3] = 34-layer; with bottleneck
/// blocks [3,4,6,3] = 50-layer). base_width scales every stage.
struct ModelConfig {
    std::vector<int> block_counts{2, 2, 2, 2};
    int base_width = 16;
    int num_classes = 3;
    int head_hidden = 512;
    double head_dropout = 0.1;
    int input_channels = 3;
    bool bottleneck = false;

    void validate() const {
        if (block_counts.empty()) throw ValueError("model config: block_counts must be non-empty");
        for (int b : block_counts)
            if (b < 1) throw ValueError("model config: each stage needs >= 1 block");
        if (base_width < 4) throw ValueError("model config: base_width must be >= 4");
        if (num_classes < 2) throw ValueError("model config: num_classes must be >= 2");
        if (head_hidden < 1) throw ValueError("model config: head_hidden must be >= 1");
        if (head_dropout < 0.0 || head_dropout >= 1.0)
            throw ValueError("model config: head_dropout must be in [0,1)");
        if (input_channels < 1) throw ValueError("model config: input_channels must be >= 1");
    }

    bool operator==(const ModelConfig&) const = default;
};

enum class FreezeMode { full, frozen_backbone };
enum class RunMode { train, eval };

inline std::string freeze_mode_name(FreezeMode mode) {
    return mode == FreezeMode::full ? "full" : "frozen_backbone";
}
inline FreezeMode freeze_mode_from_name(const std::string& name) {
    if (name == "full") return FreezeMode::full;
    if (name == "frozen_backbone") return FreezeMode::frozen_backbone;
    throw ValueError("unknown freeze mode '" + name + "'");
}

/// Uniform additive probe on one captured layer's channel; used by the
/// Grad-CAM finite-difference check.
struct ChannelPerturbation {
    std::string layer;
    std::size_t channel = 0;
    double delta = 0.0;
};

/// Residual CNN over the autodiff graph: stem conv -> residual stages ->
/// global average pool -> 2-layer head. A model owns its parameters; forward
/// rebuilds the graph per call (define-by-run).
template <typename T>
class ResNetT {
public:
    ResNetT(ModelConfig cfg, std::uint64_t init_seed) : cfg_(std::move(cfg)) {
        cfg_.validate();
        build_plan();
        init_params(init_seed);
    }

    struct ForwardOptions {
        RunMode mode = RunMode::eval;
        std::uint64_t dropout_seed = 0;
        // filled with the named stage outputs when non-null
        std::map<std::string, NodePtr<T>>* captures = nullptr;
        const ChannelPerturbation* perturb = nullptr;
    };

    NodePtr<T> forward(const BasicTensor<T>& input, const ForwardOptions& opts = {}) {
        require_rank(input, 4, "model input");
        if (input.dim(1) != std::size_t(cfg_.input_channels))
            throw DimensionError("model input: expected " + std::to_string(cfg_.input_channels) +
                                 " channels, got " + std::to_string(input.dim(1)));
        auto x = make_const<T>(input);
        auto cur = block_io(relu(bn("stem.bn", conv("stem.conv", x, 1), opts)), "stem", opts);
        for (std::size_t s = 0; s < plan_.size(); ++s) {
            for (std::size_t b = 0; b < plan_[s].size(); ++b)
                cur = residual_block(cur, plan_[s][b], stage_block_prefix(s, b), opts);
            cur = block_io(cur, "s" + std::to_string(s), opts);
        }
        auto pooled = global_avg_pool(cur);
        auto hidden = relu(linear(pooled, node("head.fc1.weight"), node("head.fc1.bias")));
        auto dropped = dropout(hidden, cfg_.head_dropout,
                               opts.mode == RunMode::train ? DropoutMode::train : DropoutMode::eval,
                               mix_seed(opts.dropout_seed, {0xd20u}));
        return linear(dropped, node("head.fc2.weight"), node("head.fc2.bias"));
    }

    ParamStoreT<T>& params() { return params_; }
    const ParamStoreT<T>& params() const { return params_; }
    const ModelConfig& config() const { return cfg_; }
    FreezeMode freeze_mode() const { return freeze_; }

    static bool is_backbone_param(const std::string& name) {
        return name.rfind("head.", 0) != 0;
    }

    /// frozen_backbone: only the head trains, and backbone batchnorm runs on
    /// its running statistics (no updates). full: everything trains.
    void set_freeze(FreezeMode mode) {
        freeze_ = mode;
        const bool frozen = mode == FreezeMode::frozen_backbone;
        for (auto& e : params_.entries()) {
            if (!e.trainable) continue;
            e.frozen = frozen && is_backbone_param(e.name);
            e.node->requires_grad = !e.frozen;
        }
    }

    /// Stage outputs that can be captured / targeted by Grad-CAM.
    std::vector<std::string> capture_layers() const {
        std::vector<std::string> names{"stem"};
        for (std::size_t s = 0; s < plan_.size(); ++s) names.push_back("s" + std::to_string(s));
        return names;
    }

    std::size_t head_param_count() const {
        std::size_t n = 0;
        for (const auto& e : params_.entries())
            if (e.trainable && !is_backbone_param(e.name)) n += e.node->value.size();
        return n;
    }

private:
    struct BlockPlan {
        int in_ch = 0, planes = 0, out_ch = 0, stride = 1;
        bool projection = false;
    };

    void build_plan() {
        const int expansion = cfg_.bottleneck ? 4 : 1;
        int in_ch = cfg_.base_width;
        plan_.clear();
        for (std::size_t s = 0; s < cfg_.block_counts.size(); ++s) {
            const int planes = cfg_.base_width << s;
            std::vector<BlockPlan> stage;
            for (int b = 0; b < cfg_.block_counts[s]; ++b) {
                BlockPlan p;
                p.in_ch = in_ch;
                p.planes = planes;
                p.out_ch = planes * expansion;
                p.stride = (s > 0 && b == 0) ? 2 : 1;
                p.projection = p.stride != 1 || p.in_ch != p.out_ch;
                stage.push_back(p);
                in_ch = p.out_ch;
            }
            plan_.push_back(std::move(stage));
        }
        feature_dim_ = in_ch;
    }

    static std::string stage_block_prefix(std::size_t s, std::size_t b) {
        return "s" + std::to_string(s) + ".b" + std::to_string(b);
    }

    void add_conv(const std::string& name, int out_ch, int in_ch, int k, Rng& rng) {
        BasicTensor<T> w({std::size_t(out_ch), std::size_t(in_ch), std::size_t(k), std::size_t(k)});
        const double std = std::sqrt(2.0 / (double(in_ch) * k * k));
        for (auto& v : w.data) v = static_cast<T>(rng.normal(0.0, std));
        params_.add(name + ".weight", std::move(w));
    }

    void add_bn(const std::string& name, int ch) {
        params_.add(name + ".gamma", BasicTensor<T>({std::size_t(ch)}, T(1)));
        params_.add(name + ".beta", BasicTensor<T>({std::size_t(ch)}, T(0)));
        params_.add(name + ".running_mean", BasicTensor<T>({std::size_t(ch)}, T(0)), false);
        params_.add(name + ".running_var", BasicTensor<T>({std::size_t(ch)}, T(1)), false);
    }

    void add_linear(const std::string& name, int in_dim, int out_dim, Rng& rng) {
        BasicTensor<T> w({std::size_t(in_dim), std::size_t(out_dim)});
        const double std = std::sqrt(2.0 / double(in_dim));
        for (auto& v : w.data) v = static_cast<T>(rng.normal(0.0, std));
        params_.add(name + ".weight", std::move(w));
        params_.add(name + ".bias", BasicTensor<T>({std::size_t(out_dim)}, T(0)));
    }

    void init_params(std::uint64_t seed) {
        Rng rng(mix_seed(seed, {0x1417u}));
        add_conv("stem.conv", cfg_.base_width, cfg_.input_channels, 3, rng);
        add_bn("stem.bn", cfg_.base_width);
        for (std::size_t s = 0; s < plan_.size(); ++s)
            for (std::size_t b = 0; b < plan_[s].size(); ++b) {
                const auto& p = plan_[s][b];
                const std::string prefix = stage_block_prefix(s, b);
                if (cfg_.bottleneck) {
                    add_conv(prefix + ".conv1", p.planes, p.in_ch, 1, rng);
                    add_bn(prefix + ".bn1", p.planes);
                    add_conv(prefix + ".conv2", p.planes, p.planes, 3, rng);
                    add_bn(prefix + ".bn2", p.planes);
                    add_conv(prefix + ".conv3", p.out_ch, p.planes, 1, rng);
                    add_bn(prefix + ".bn3", p.out_ch);
                } else {
                    add_conv(prefix + ".conv1", p.planes, p.in_ch, 3, rng);
                    add_bn(prefix + ".bn1", p.planes);
                    add_conv(prefix + ".conv2", p.out_ch, p.planes, 3, rng);
                    add_bn(prefix + ".bn2", p.out_ch);
                }
                if (p.projection) {
                    add_conv(prefix + ".down.conv", p.out_ch, p.in_ch, 1, rng);
                    add_bn(prefix + ".down.bn", p.out_ch);
                }
            }
        add_linear("head.fc1", feature_dim_, cfg_.head_hidden, rng);
        add_linear("head.fc2", cfg_.head_hidden, cfg_.num_classes, rng);
    }

    NodePtr<T> node(const std::string& name) { return params_.node(name); }

    NodePtr<T> conv(const std::string& name, NodePtr<T> x, int stride) {
        const auto& w = params_.value(name + ".weight");
        const std::size_t k = w.dim(2);
        return conv2d<T>(x, node(name + ".weight"), nullptr, std::size_t(stride), k / 2);
    }

    NodePtr<T> bn(const std::string& name, NodePtr<T> x, const ForwardOptions& opts) {
        const bool frozen_bn =
            freeze_ == FreezeMode::frozen_backbone && is_backbone_param(name);
        const BnMode mode =
            (opts.mode == RunMode::train && !frozen_bn) ? BnMode::train : BnMode::eval;
        return batchnorm2d<T>(x, node(name + ".gamma"), node(name + ".beta"),
                              params_.value(name + ".running_mean"),
                              params_.value(name + ".running_var"), mode);
    }

    NodePtr<T> residual_block(NodePtr<T> x, const BlockPlan& p, const std::string& prefix,
                              const ForwardOptions& opts) {
        NodePtr<T> out;
        if (cfg_.bottleneck) {
            out = relu(bn(prefix + ".bn1", conv(prefix + ".conv1", x, 1), opts));
            out = relu(bn(prefix + ".bn2", conv(prefix + ".conv2", out, p.stride), opts));
            out = bn(prefix + ".bn3", conv(prefix + ".conv3", out, 1), opts);
        } else {
            out = relu(bn(prefix + ".bn1", conv(prefix + ".conv1", x, p.stride), opts));
            out = bn(prefix + ".bn2", conv(prefix + ".conv2", out, 1), opts);
        }
        NodePtr<T> shortcut = x;
        if (p.projection)
            shortcut = bn(prefix + ".down.bn", conv(prefix + ".down.conv", x, p.stride), opts);
        return relu(add(out, shortcut));
    }

    /// Capture hook + optional uniform channel perturbation at a stage output.
    NodePtr<T> block_io(NodePtr<T> x, const std::string& name, const ForwardOptions& opts) {
        if (opts.perturb && opts.perturb->layer == name) {
            if (opts.perturb->channel >= x->value.dim(1))
                throw DimensionError("perturbation channel out of range at layer " + name);
            BasicTensor<T> shifted = x->value;
            const std::size_t hw = shifted.dim(2) * shifted.dim(3);
            for (std::size_t n = 0; n < shifted.dim(0); ++n) {
                T* p = shifted.ptr() + (n * shifted.dim(1) + opts.perturb->channel) * hw;
                for (std::size_t i = 0; i < hw; ++i) p[i] += static_cast<T>(opts.perturb->delta);
            }
            x = make_const<T>(std::move(shifted));
        }
        if (opts.captures) (*opts.captures)[name] = x;
        return x;
    }

    ModelConfig cfg_;
    ParamStoreT<T> params_;
    std::vector<std::vector<BlockPlan>> plan_;
    FreezeMode freeze_ = FreezeMode::full;
    int feature_dim_ = 0;
};

using Model = ResNetT<float>;

/// Double-precision copy (used by the finite-difference oracles).
inline ResNetT<double> to_double(const ResNetT<float>& model) {
    ResNetT<double> out(model.config(), 0);
    for (const auto& e : model.params().entries()) {
        auto& dst = out.params().value(e.name);
        const auto& src = e.node->value;
        for (std::size_t i = 0; i < src.size(); ++i) dst[i] = double(src[i]);
    }
    out.set_freeze(model.freeze_mode());
    return out;
}

/// Maps a depth label to the matching stage pattern.
inline ModelConfig depth_preset(int depth, int base_width, int num_classes) {
    ModelConfig cfg;
    cfg.base_width = base_width;
    cfg.num_classes = num_classes;
    switch (depth) {
        case 18: cfg.block_counts = {2, 2, 2, 2}; break;
        case 34: cfg.block_counts = {3, 4, 6, 3}; break;
        case 50:
            cfg.block_counts = {3, 4, 6, 3};
            cfg.bottleneck = true;
            break;
        default: throw ValueError("unsupported depth " + std::to_string(depth) + " (18/34/50)");
    }
    return cfg;
}

}  // namespace duomic
