#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "duomic/dataset.hpp"
#include "duomic/image.hpp"

namespace duomic {

/// Per-class appearance of the procedural tissue generator. SHG planes are
/// built from oriented fiber segments, AF planes from soft cellular blobs.
struct ClassSynthParams {
    int fiber_count = 20;
    double fiber_len_frac = 0.5;   // mean length / image side
    double kappa = 0.0;            // orientation concentration (0 = isotropic)
    double fiber_thickness = 1.2;  // px
    int blob_count = 12;
    double blob_radius_min = 2.0;  // px
    double blob_radius_max = 6.0;
};

struct SynthSpec {
    std::size_t height = 64;
    std::size_t width = 64;
    std::map<std::string, int> counts{{"cancer", 102}, {"fibrosis", 101}, {"normal", 36}};
    std::map<std::string, ClassSynthParams> class_params = default_class_params();
    double noise_level = 0.04;  // additive Gaussian sigma, fraction of full scale
    std::uint64_t seed = 0;
    int images_per_patient = 8;

    /// Aligned dense fibers for cancer, dense medium-aligned for fibrosis,
    /// sparse isotropic for normal.
    static std::map<std::string, ClassSynthParams> default_class_params();

    void validate() const;
};

/// One synthetic dual-modality sample, deterministic per (params, seed).
DualModalImage synth_tissue_sample(const ClassSynthParams& params, std::size_t height,
                                   std::size_t width, double noise_level, double mean_angle,
                                   std::uint64_t seed);

/// Generates the labeled dataset: 16-bit grayscale PNG planes under
/// out_dir/planes plus out_dir/manifest.csv. Returns the manifest.
DatasetManifest generate_dataset(const SynthSpec& spec, const std::filesystem::path& out_dir);

/// Pretext label families used to pretrain a backbone in place of ImageNet.
/// The stripes/segments pair spans the aligned-vs-isotropic fiber axis the
/// tissue classes ride on; grid and noise add unrelated structure.
inline const std::vector<std::string>& pretext_labels() {
    static const std::vector<std::string> labels{"grid", "noise", "segments", "stripes"};
    return labels;
}

/// 4-class texture dataset (per_class images per family) in the same on-disk
/// layout as generate_dataset.
DatasetManifest generate_pretext_dataset(int per_class, std::size_t image_size,
                                         std::uint64_t seed,
                                         const std::filesystem::path& out_dir);

/// Circular variance of Sobel gradient orientations (angles doubled so the
/// statistic is orientation- not direction-sensitive), magnitude-weighted.
/// 0 = perfectly aligned structure, 1 = isotropic.
double orientation_circular_variance(const PlaneF& plane);

}  // namespace duomic
