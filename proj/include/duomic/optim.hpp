#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "duomic/graph.hpp"
#include "duomic/tensor.hpp"

namespace duomic {

/// Scales the given gradients in place so their joint L2 norm does not exceed
/// max_norm. Returns the observed (pre-clip) global norm.
template <typename T>
double clip_global_norm(const std::vector<BasicTensor<T>*>& grads, double max_norm) {
    if (max_norm <= 0.0) throw ValueError("clip_global_norm: max_norm must be > 0");
    double sq = 0;
    for (const auto* g : grads)
        for (std::size_t i = 0; i < g->size(); ++i) {
            const double v = (*g)[i];
            sq += v * v;
        }
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const T scale = static_cast<T>(max_norm / norm);
        for (auto* g : grads)
            for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] *= scale;
    }
    return norm;
}

/// Clips the gradients of all live (trainable, unfrozen) parameters.
template <typename T>
double clip_global_norm(ParamStoreT<T>& params, double max_norm) {
    std::vector<BasicTensor<T>*> grads;
    for (auto& e : params.entries()) {
        if (!e.trainable || e.frozen) continue;
        ensure_grad(*e.node);
        grads.push_back(&e.node->grad);
    }
    return clip_global_norm(grads, max_norm);
}

/// Current global L2 gradient norm over live parameters.
template <typename T>
double grad_global_norm(ParamStoreT<T>& params) {
    double sq = 0;
    for (auto& e : params.entries()) {
        if (!e.trainable || e.frozen) continue;
        ensure_grad(*e.node);
        for (std::size_t i = 0; i < e.node->grad.size(); ++i) {
            const double v = e.node->grad[i];
            sq += v * v;
        }
    }
    return std::sqrt(sq);
}

struct AdamWConfig {
    double lr = 1e-4;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with decoupled weight decay. Frozen and non-trainable entries are
/// skipped entirely (no moment state, no decay).
template <typename T>
class AdamWT {
public:
    explicit AdamWT(AdamWConfig cfg = {}) : cfg_(cfg) {}

    const AdamWConfig& config() const { return cfg_; }
    std::int64_t step_count() const { return t_; }

    void step(ParamStoreT<T>& params) {
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (auto& e : params.entries()) {
            if (!e.trainable || e.frozen) continue;
            ensure_grad(*e.node);
            auto& st = state_[e.name];
            if (st.m.size() == 0) {
                st.m = BasicTensor<T>(e.node->value.shape);
                st.v = BasicTensor<T>(e.node->value.shape);
            } else if (!st.m.same_shape(e.node->value)) {
                throw DimensionError("adamw_step: moment shape " + st.m.shape_str() +
                                     " does not match parameter '" + e.name + "' " +
                                     e.node->value.shape_str());
            }
            BasicTensor<T>& theta = e.node->value;
            const BasicTensor<T>& g = e.node->grad;
            for (std::size_t i = 0; i < theta.size(); ++i) {
                const double gi = g[i];
                const double m = cfg_.beta1 * st.m[i] + (1.0 - cfg_.beta1) * gi;
                const double v = cfg_.beta2 * st.v[i] + (1.0 - cfg_.beta2) * gi * gi;
                st.m[i] = static_cast<T>(m);
                st.v[i] = static_cast<T>(v);
                const double update = cfg_.lr * (m / bc1) / (std::sqrt(v / bc2) + cfg_.eps) +
                                      cfg_.lr * cfg_.weight_decay * static_cast<double>(theta[i]);
                theta[i] = static_cast<T>(static_cast<double>(theta[i]) - update);
            }
            theta.check_finite("adamw_step");
        }
    }

    struct Moments {
        BasicTensor<T> m, v;
    };
    std::unordered_map<std::string, Moments>& state() { return state_; }
    const std::unordered_map<std::string, Moments>& state() const { return state_; }
    void set_step_count(std::int64_t t) { t_ = t; }

private:
    AdamWConfig cfg_;
    std::int64_t t_ = 0;
    std::unordered_map<std::string, Moments> state_;
};

using AdamW = AdamWT<float>;

}  // namespace duomic
