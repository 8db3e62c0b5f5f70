#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "duomic/image.hpp"
#include "duomic/model.hpp"

namespace duomic {

/// Class-activation map: layer-resolution values plus the bilinear upsample
/// aligned to the input, both normalized to [0,1] (an all-zero map stays
/// zero rather than dividing by zero).
struct Heatmap {
    std::size_t h = 0, w = 0;
    std::vector<float> values;
    std::size_t up_h = 0, up_w = 0;
    std::vector<float> upsampled;
};

/// Bilinear resampling of a single float plane (pixel-center convention).
std::vector<float> bilinear_resize_plane(const std::vector<float>& src, std::size_t h,
                                         std::size_t w, std::size_t out_h, std::size_t out_w);

/// The Grad-CAM combination step: alpha_k = spatial mean of grad channel k,
/// raw map = ReLU(sum_k alpha_k * A_k), normalized by its max.
template <typename T>
Heatmap cam_from_activation(const BasicTensor<T>& activation, const BasicTensor<T>& gradient,
                            std::size_t out_h, std::size_t out_w,
                            std::vector<double>* alphas_out = nullptr) {
    if (!activation.same_shape(gradient))
        throw DimensionError("grad_cam: gradient shape " + gradient.shape_str() +
                             " != activation shape " + activation.shape_str());
    require_rank(activation, 4, "grad_cam activation");
    const std::size_t c = activation.dim(1), h = activation.dim(2), w = activation.dim(3);
    const std::size_t hw = h * w;

    std::vector<double> alphas(c, 0.0);
    for (std::size_t ch = 0; ch < c; ++ch) {
        const T* g = gradient.ptr() + ch * hw;
        double acc = 0;
        for (std::size_t i = 0; i < hw; ++i) acc += double(g[i]);
        alphas[ch] = acc / double(hw);
    }
    if (alphas_out) *alphas_out = alphas;

    Heatmap map;
    map.h = h;
    map.w = w;
    map.values.assign(hw, 0.0f);
    double peak = 0;
    for (std::size_t i = 0; i < hw; ++i) {
        double v = 0;
        for (std::size_t ch = 0; ch < c; ++ch)
            v += alphas[ch] * double(activation.ptr()[ch * hw + i]);
        v = std::max(0.0, v);
        map.values[i] = float(v);
        peak = std::max(peak, v);
    }
    if (peak > 0)
        for (auto& v : map.values) v = float(double(v) / peak);

    map.up_h = out_h;
    map.up_w = out_w;
    map.upsampled = bilinear_resize_plane(map.values, h, w, out_h, out_w);
    for (auto& v : map.upsampled) v = std::min(1.0f, std::max(0.0f, v));
    return map;
}

/// Runs eval-mode forward + a seeded backward from the target-class logit
/// (pre-softmax) and assembles the heatmap at the named stage output.
/// input is a single image [1, C, H, W].
template <typename T>
Heatmap grad_cam(ResNetT<T>& model, const BasicTensor<T>& input, int target_class,
                 const std::string& layer_id, std::vector<double>* alphas_out = nullptr) {
    require_rank(input, 4, "grad_cam input");
    if (input.dim(0) != 1) throw ValueError("grad_cam: expects a single-image batch");
    if (target_class < 0 || target_class >= model.config().num_classes)
        throw ValueError("grad_cam: target class " + std::to_string(target_class) +
                         " out of range");
    const auto layers = model.capture_layers();
    if (std::find(layers.begin(), layers.end(), layer_id) == layers.end())
        throw ValueError("grad_cam: unknown layer '" + layer_id + "'");

    // gradients must flow through the backbone even on frozen models
    const FreezeMode prev = model.freeze_mode();
    model.set_freeze(FreezeMode::full);
    std::map<std::string, NodePtr<T>> captures;
    typename ResNetT<T>::ForwardOptions opts;
    opts.mode = RunMode::eval;
    opts.captures = &captures;
    NodePtr<T> logits;
    try {
        logits = model.forward(input, opts);
        BasicTensor<T> seed(logits->value.shape, T(0));
        seed.at2(0, std::size_t(target_class)) = T(1);
        backward_seed(logits, seed);
    } catch (...) {
        model.set_freeze(prev);
        throw;
    }
    model.set_freeze(prev);

    auto node = captures.at(layer_id);
    ensure_grad(*node);
    return cam_from_activation(node->value, node->grad, input.dim(2), input.dim(3), alphas_out);
}

/// Side-by-side panel: original | colorized heatmap (blue->red ramp) |
/// 0.5-alpha overlay, with one separator column between panels
/// (output width = 3*W + 2).
FusedImage render_overlay(const FusedImage& image, const Heatmap& heatmap);

/// Raw upsampled heatmap as a CSV grid (one row per image row).
void write_heatmap_csv(const std::filesystem::path& path, const Heatmap& heatmap);

}  // namespace duomic
