#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "duomic/errors.hpp"

namespace duomic {

/// Single-channel intensity plane, row-major.
template <typename T>
struct Plane {
    std::size_t h = 0, w = 0;
    std::vector<T> v;

    Plane() = default;
    Plane(std::size_t h_, std::size_t w_, T fill = T(0)) : h(h_), w(w_), v(h_ * w_, fill) {}

    T& at(std::size_t y, std::size_t x) { return v[y * w + x]; }
    const T& at(std::size_t y, std::size_t x) const { return v[y * w + x]; }
    std::size_t size() const { return v.size(); }
};

using PlaneU8 = Plane<std::uint8_t>;
using PlaneU16 = Plane<std::uint16_t>;
using PlaneF = Plane<float>;

/// Paired autofluorescence + SHG intensity planes for one sample.
struct DualModalImage {
    PlaneF af;
    PlaneF shg;
    std::string sample_id;
    int source_bit_depth = 16;

    void validate() const {
        if (af.h != shg.h || af.w != shg.w)
            throw DimensionError("dual-modal image '" + sample_id + "': af " +
                                 std::to_string(af.h) + "x" + std::to_string(af.w) + " vs shg " +
                                 std::to_string(shg.h) + "x" + std::to_string(shg.w));
        if (af.h < 32 || af.w < 32)
            throw DimensionError("dual-modal image '" + sample_id + "': planes must be >= 32x32");
    }
};

/// Fused RGB image, 8-bit interleaved. Red plane stays zero by construction;
/// green carries SHG, blue carries autofluorescence.
struct FusedImage {
    std::size_t h = 0, w = 0;
    std::vector<std::uint8_t> rgb;  // h*w*3 interleaved

    FusedImage() = default;
    FusedImage(std::size_t h_, std::size_t w_) : h(h_), w(w_), rgb(h_ * w_ * 3, 0) {}

    std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c) { return rgb[(y * w + x) * 3 + c]; }
    const std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c) const {
        return rgb[(y * w + x) * 3 + c];
    }
};

}  // namespace duomic
