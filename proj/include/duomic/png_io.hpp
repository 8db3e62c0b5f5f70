#pragma once

#include <filesystem>

#include "duomic/image.hpp"

namespace duomic {

/// Reads a single-channel PNG or uncompressed TIFF plane (8- or 16-bit) into
/// float intensities. The format is chosen by file magic, not extension.
/// Returns the plane and the source bit depth.
std::pair<PlaneF, int> read_gray_plane(const std::filesystem::path& path);

/// Writes a 16-bit grayscale PNG.
void write_gray16_png(const std::filesystem::path& path, const PlaneU16& plane);

/// Writes an 8-bit RGB PNG.
void write_rgb8_png(const std::filesystem::path& path, const FusedImage& img);

/// Reads an 8-bit RGB PNG (gray input is expanded to RGB).
FusedImage read_rgb8_png(const std::filesystem::path& path);

}  // namespace duomic
