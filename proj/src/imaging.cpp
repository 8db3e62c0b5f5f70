#include "duomic/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "duomic/rng.hpp"

namespace duomic {

namespace {

std::uint8_t round_half_away(double v) {
    const double r = v >= 0 ? std::floor(v + 0.5) : std::ceil(v - 0.5);
    return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}

/// Reflects an index into [0, n): -1 -> 0, -2 -> 1, n -> n-1, ...
long reflect_index(long i, long n) {
    if (n == 1) return 0;
    const long period = 2 * n;
    i = ((i % period) + period) % period;
    return i < n ? i : period - 1 - i;
}

}  // namespace

PlaneU8 normalize_channel(const PlaneF& raw) {
    if (raw.size() == 0) throw ValueError("normalize_channel: empty plane");
    float lo = raw.v[0], hi = raw.v[0];
    for (float x : raw.v) {
        if (!std::isfinite(x)) throw ValueError("normalize_channel: non-finite input value");
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    PlaneU8 out(raw.h, raw.w);
    if (hi == lo) return out;  // constant plane -> zeros
    const double span = double(hi) - double(lo);
    for (std::size_t i = 0; i < raw.size(); ++i)
        out.v[i] = round_half_away((double(raw.v[i]) - double(lo)) * 255.0 / span);
    return out;
}

FusedImage fuse_channels(const PlaneU8& af, const PlaneU8& shg) {
    if (af.h != shg.h || af.w != shg.w)
        throw DimensionError("fuse_channels: af " + std::to_string(af.h) + "x" +
                             std::to_string(af.w) + " vs shg " + std::to_string(shg.h) + "x" +
                             std::to_string(shg.w));
    FusedImage out(af.h, af.w);
    for (std::size_t i = 0; i < af.size(); ++i) {
        out.rgb[i * 3 + 0] = 0;
        out.rgb[i * 3 + 1] = round_half_away(1.3 * double(shg.v[i]));
        out.rgb[i * 3 + 2] = af.v[i];
    }
    return out;
}

FusedImage rotate(const FusedImage& image, double angle_deg) {
    const double a = angle_deg * std::numbers::pi / 180.0;
    const double c = std::cos(a), s = std::sin(a);
    const double cy = (double(image.h) - 1.0) / 2.0;
    const double cx = (double(image.w) - 1.0) / 2.0;
    const long h = long(image.h), w = long(image.w);

    FusedImage out(image.h, image.w);
    for (long y = 0; y < h; ++y) {
        for (long x = 0; x < w; ++x) {
            // inverse map: destination -> source
            const double dy = double(y) - cy, dx = double(x) - cx;
            const double sy = c * dy + s * dx + cy;
            const double sx = -s * dy + c * dx + cx;
            const long y0 = long(std::floor(sy)), x0 = long(std::floor(sx));
            const double fy = sy - double(y0), fx = sx - double(x0);
            const long yy0 = reflect_index(y0, h), yy1 = reflect_index(y0 + 1, h);
            const long xx0 = reflect_index(x0, w), xx1 = reflect_index(x0 + 1, w);
            for (std::size_t ch = 0; ch < 3; ++ch) {
                const double v00 = image.at(yy0, xx0, ch), v01 = image.at(yy0, xx1, ch);
                const double v10 = image.at(yy1, xx0, ch), v11 = image.at(yy1, xx1, ch);
                const double v = (1 - fy) * ((1 - fx) * v00 + fx * v01) +
                                 fy * ((1 - fx) * v10 + fx * v11);
                out.at(y, x, ch) = round_half_away(v);
            }
        }
    }
    return out;
}

double sample_rotation_angle(const AugmentParams& params) {
    if (!params.enable_rotation) return 0.0;
    Rng rng(params.seed);
    return rng.uniform(-params.rotation_limit_deg, params.rotation_limit_deg);
}

FusedImage augment(const FusedImage& image, const AugmentParams& params) {
    const double angle = sample_rotation_angle(params);
    if (angle == 0.0) return image;
    return rotate(image, angle);
}

FusedImage resize(const FusedImage& image, std::size_t target_h, std::size_t target_w) {
    if (target_h < 8 || target_w < 8) throw ValueError("resize: targets must be >= 8");
    if (target_h == image.h && target_w == image.w) return image;
    const double sy = double(image.h) / double(target_h);
    const double sx = double(image.w) / double(target_w);
    const long h = long(image.h), w = long(image.w);

    FusedImage out(target_h, target_w);
    for (std::size_t y = 0; y < target_h; ++y) {
        // pixel-center convention
        const double src_y = (double(y) + 0.5) * sy - 0.5;
        const long y0 = long(std::floor(src_y));
        const double fy = src_y - double(y0);
        const long yy0 = std::clamp(y0, 0l, h - 1), yy1 = std::clamp(y0 + 1, 0l, h - 1);
        for (std::size_t x = 0; x < target_w; ++x) {
            const double src_x = (double(x) + 0.5) * sx - 0.5;
            const long x0 = long(std::floor(src_x));
            const double fx = src_x - double(x0);
            const long xx0 = std::clamp(x0, 0l, w - 1), xx1 = std::clamp(x0 + 1, 0l, w - 1);
            for (std::size_t ch = 0; ch < 3; ++ch) {
                const double v00 = image.at(yy0, xx0, ch), v01 = image.at(yy0, xx1, ch);
                const double v10 = image.at(yy1, xx0, ch), v11 = image.at(yy1, xx1, ch);
                const double v = (1 - fy) * ((1 - fx) * v00 + fx * v01) +
                                 fy * ((1 - fx) * v10 + fx * v11);
                out.at(y, x, ch) = round_half_away(v);
            }
        }
    }
    return out;
}

FusedImage preprocess(const DualModalImage& image) {
    image.validate();
    return fuse_channels(normalize_channel(image.af), normalize_channel(image.shg));
}

}  // namespace duomic
