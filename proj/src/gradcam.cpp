#include "duomic/gradcam.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace duomic {

std::vector<float> bilinear_resize_plane(const std::vector<float>& src, std::size_t h,
                                         std::size_t w, std::size_t out_h, std::size_t out_w) {
    if (src.size() != h * w) throw DimensionError("bilinear_resize_plane: size mismatch");
    std::vector<float> out(out_h * out_w);
    const double sy = double(h) / double(out_h), sx = double(w) / double(out_w);
    for (std::size_t y = 0; y < out_h; ++y) {
        const double src_y = (double(y) + 0.5) * sy - 0.5;
        const long y0 = long(std::floor(src_y));
        const double fy = src_y - double(y0);
        const long yy0 = std::clamp(y0, 0l, long(h) - 1), yy1 = std::clamp(y0 + 1, 0l, long(h) - 1);
        for (std::size_t x = 0; x < out_w; ++x) {
            const double src_x = (double(x) + 0.5) * sx - 0.5;
            const long x0 = long(std::floor(src_x));
            const double fx = src_x - double(x0);
            const long xx0 = std::clamp(x0, 0l, long(w) - 1),
                       xx1 = std::clamp(x0 + 1, 0l, long(w) - 1);
            const double v = (1 - fy) * ((1 - fx) * src[yy0 * w + xx0] + fx * src[yy0 * w + xx1]) +
                             fy * ((1 - fx) * src[yy1 * w + xx0] + fx * src[yy1 * w + xx1]);
            out[y * out_w + x] = float(v);
        }
    }
    return out;
}

namespace {

/// Blue (cold) to red (hot) ramp.
void ramp_color(float v, std::uint8_t rgb[3]) {
    const double t = std::clamp(double(v), 0.0, 1.0);
    rgb[0] = std::uint8_t(std::lround(255.0 * t));
    rgb[1] = 0;
    rgb[2] = std::uint8_t(std::lround(255.0 * (1.0 - t)));
}

}  // namespace

FusedImage render_overlay(const FusedImage& image, const Heatmap& heatmap) {
    if (heatmap.up_h != image.h || heatmap.up_w != image.w)
        throw DimensionError("render_overlay: heatmap " + std::to_string(heatmap.up_h) + "x" +
                             std::to_string(heatmap.up_w) + " does not match image " +
                             std::to_string(image.h) + "x" + std::to_string(image.w));
    const std::size_t w = image.w, h = image.h;
    FusedImage out(h, 3 * w + 2);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            std::uint8_t hot[3];
            ramp_color(heatmap.upsampled[y * w + x], hot);
            for (std::size_t c = 0; c < 3; ++c) {
                const std::uint8_t orig = image.at(y, x, c);
                out.at(y, x, c) = orig;
                out.at(y, w + 1 + x, c) = hot[c];
                out.at(y, 2 * w + 2 + x, c) =
                    std::uint8_t(std::lround(0.5 * double(orig) + 0.5 * double(hot[c])));
            }
        }
        for (std::size_t c = 0; c < 3; ++c) {
            out.at(y, w, c) = 0;
            out.at(y, 2 * w + 1, c) = 0;
        }
    }
    return out;
}

void write_heatmap_csv(const std::filesystem::path& path, const Heatmap& heatmap) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write heatmap " + path.string());
    for (std::size_t y = 0; y < heatmap.up_h; ++y) {
        for (std::size_t x = 0; x < heatmap.up_w; ++x) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.6g", double(heatmap.upsampled[y * heatmap.up_w + x]));
            out << (x ? "," : "") << buf;
        }
        out << '\n';
    }
}

}  // namespace duomic
