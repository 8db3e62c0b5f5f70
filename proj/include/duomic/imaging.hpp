#pragma once

#include <cstdint>

#include "duomic/image.hpp"

namespace duomic {

/// Augmentation policy. Only rotation is active by default; the flag exists
/// so the whole step can be switched off.
struct AugmentParams {
    double rotation_limit_deg = 30.0;
    bool enable_rotation = true;
    std::uint64_t seed = 0;
};

/// Linear min-max map of a plane onto [0,255], rounded half-away-from-zero.
/// A constant plane maps to all zeros. NaN/Inf input is rejected.
PlaneU8 normalize_channel(const PlaneF& raw);

/// Combines normalized planes into the fused RGB image:
/// G = clamp(round(1.3 * shg)), B = af, R = 0.
FusedImage fuse_channels(const PlaneU8& af, const PlaneU8& shg);

/// The angle augment() will apply for the given params.
double sample_rotation_angle(const AugmentParams& params);

/// Rotates by an angle drawn uniformly from [-limit, +limit] about the image
/// center, bilinear interpolation, reflected borders. Deterministic per seed.
FusedImage augment(const FusedImage& image, const AugmentParams& params);

/// Rotation by a fixed angle (degrees); augment() delegates here.
FusedImage rotate(const FusedImage& image, double angle_deg);

/// Bilinear resize (aspect distortion allowed). Targets must be >= 8.
FusedImage resize(const FusedImage& image, std::size_t target_h, std::size_t target_w);

/// End-to-end per-sample preprocessing: normalize both planes and fuse.
FusedImage preprocess(const DualModalImage& image);

}  // namespace duomic
