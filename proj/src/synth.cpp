#include "duomic/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "duomic/png_io.hpp"
#include "duomic/rng.hpp"

namespace duomic {

namespace {

constexpr double kPi = std::numbers::pi;

/// Adds a soft anti-aliased segment: intensity falls off linearly with the
/// distance to the segment, reaching zero at `thickness`.
void draw_segment(PlaneF& img, double x0, double y0, double x1, double y1, double thickness,
                  double amplitude) {
    const double lo_x = std::min(x0, x1) - thickness - 1, hi_x = std::max(x0, x1) + thickness + 1;
    const double lo_y = std::min(y0, y1) - thickness - 1, hi_y = std::max(y0, y1) + thickness + 1;
    const long ys = std::max(0l, long(std::floor(lo_y))), ye = std::min(long(img.h) - 1, long(std::ceil(hi_y)));
    const long xs = std::max(0l, long(std::floor(lo_x))), xe = std::min(long(img.w) - 1, long(std::ceil(hi_x)));
    const double dx = x1 - x0, dy = y1 - y0;
    const double len2 = dx * dx + dy * dy;
    for (long y = ys; y <= ye; ++y)
        for (long x = xs; x <= xe; ++x) {
            double t = len2 > 0 ? ((x - x0) * dx + (y - y0) * dy) / len2 : 0.0;
            t = std::clamp(t, 0.0, 1.0);
            const double px = x0 + t * dx, py = y0 + t * dy;
            const double d = std::hypot(x - px, y - py);
            if (d < thickness) img.at(y, x) += float(amplitude * (1.0 - d / thickness));
        }
}

void draw_blob(PlaneF& img, double cx, double cy, double radius, double amplitude) {
    const long ys = std::max(0l, long(cy - 3 * radius)), ye = std::min(long(img.h) - 1, long(cy + 3 * radius));
    const long xs = std::max(0l, long(cx - 3 * radius)), xe = std::min(long(img.w) - 1, long(cx + 3 * radius));
    const double inv2r2 = 1.0 / (2.0 * radius * radius / 4.0);
    for (long y = ys; y <= ye; ++y)
        for (long x = xs; x <= xe; ++x) {
            const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
            img.at(y, x) += float(amplitude * std::exp(-d2 * inv2r2));
        }
}

/// Orientation in [0, pi): uniform when kappa ~ 0, else a wrapped normal
/// around mu with spread 1/sqrt(kappa) (von-Mises-like concentration).
double sample_orientation(Rng& rng, double mu, double kappa) {
    if (kappa < 1e-9) return rng.uniform(0.0, kPi);
    const double sigma = 1.0 / std::sqrt(kappa);
    double a = std::fmod(mu + sigma * rng.normal(), kPi);
    if (a < 0) a += kPi;
    return a;
}

/// Scales accumulated intensities to 16-bit with additive Gaussian noise.
void finalize_plane(PlaneF& img, Rng& rng, double noise_level) {
    const double scale_ref = 2.0;  // fixed reference so density stays a signal
    for (auto& v : img.v) {
        double u = v / scale_ref + noise_level * rng.normal();
        v = float(std::clamp(u, 0.0, 1.0) * 65535.0);
    }
}

PlaneF make_stripes(std::size_t n, Rng& rng) {
    PlaneF img(n, n);
    const double angle = rng.uniform(0.0, kPi);
    const double spacing = rng.uniform(5.0, 10.0);
    const double c = std::cos(angle), s = std::sin(angle);
    const int lines = int(2.0 * n / spacing);
    for (int i = -lines; i <= lines; ++i) {
        const double off = i * spacing;
        const double cx = n / 2.0 + off * -s, cy = n / 2.0 + off * c;
        draw_segment(img, cx - 1.5 * n * c, cy - 1.5 * n * s, cx + 1.5 * n * c, cy + 1.5 * n * s,
                     1.5, rng.uniform(0.6, 1.0));
    }
    return img;
}

PlaneF make_blob_field(std::size_t n, Rng& rng) {
    PlaneF img(n, n);
    const int count = 10 + int(rng.uniform_int(10));
    for (int i = 0; i < count; ++i)
        draw_blob(img, rng.uniform(0, double(n)), rng.uniform(0, double(n)), rng.uniform(2.0, 6.0),
                  rng.uniform(0.6, 1.2));
    return img;
}

PlaneF make_segments(std::size_t n, Rng& rng) {
    PlaneF img(n, n);
    const int count = 25 + int(rng.uniform_int(20));
    for (int i = 0; i < count; ++i) {
        const double angle = rng.uniform(0.0, kPi);
        const double len = rng.uniform(0.15, 0.4) * double(n);
        const double cx = rng.uniform(0.0, double(n)), cy = rng.uniform(0.0, double(n));
        const double dx = std::cos(angle) * len / 2.0, dy = std::sin(angle) * len / 2.0;
        draw_segment(img, cx - dx, cy - dy, cx + dx, cy + dy, 1.6, rng.uniform(0.6, 1.0));
    }
    return img;
}

PlaneF make_grid(std::size_t n, Rng& rng) {
    PlaneF img(n, n);
    const double spacing = rng.uniform(6.0, 12.0);
    const double phase = rng.uniform(0.0, spacing);
    for (double p = phase; p < n; p += spacing) {
        draw_segment(img, p, 0, p, double(n - 1), 1.2, 0.8);
        draw_segment(img, 0, p, double(n - 1), p, 1.2, 0.8);
    }
    return img;
}

PlaneF make_lowfreq_noise(std::size_t n, Rng& rng) {
    PlaneF img(n, n);
    for (int k = 0; k < 4; ++k) {
        const double fx = rng.uniform(0.5, 2.5) * 2 * kPi / n;
        const double fy = rng.uniform(0.5, 2.5) * 2 * kPi / n;
        const double ph = rng.uniform(0.0, 2 * kPi);
        const double amp = rng.uniform(0.2, 0.5);
        for (std::size_t y = 0; y < n; ++y)
            for (std::size_t x = 0; x < n; ++x)
                img.at(y, x) += float(amp * (1.0 + std::sin(fx * x + fy * y + ph)) / 2.0);
    }
    return img;
}

PlaneF make_pretext_plane(const std::string& family, std::size_t n, Rng& rng) {
    if (family == "stripes") return make_stripes(n, rng);
    if (family == "segments") return make_segments(n, rng);
    if (family == "grid") return make_grid(n, rng);
    if (family == "noise") return make_lowfreq_noise(n, rng);
    throw ValueError("unknown pretext family '" + family + "'");
}

PlaneU16 to_u16(const PlaneF& plane) {
    PlaneU16 out(plane.h, plane.w);
    for (std::size_t i = 0; i < plane.size(); ++i)
        out.v[i] = std::uint16_t(std::clamp(plane.v[i], 0.0f, 65535.0f));
    return out;
}

}  // namespace

std::map<std::string, ClassSynthParams> SynthSpec::default_class_params() {
    std::map<std::string, ClassSynthParams> p;
    p["cancer"] = {45, 0.85, 60.0, 1.6, 30, 1.5, 3.0};
    p["fibrosis"] = {90, 0.35, 1.2, 1.6, 12, 3.0, 6.0};
    p["normal"] = {12, 0.50, 0.0, 1.6, 6, 5.0, 9.0};
    return p;
}

void SynthSpec::validate() const {
    if (height < 32 || width < 32) throw ValueError("synth: image size must be >= 32");
    if (noise_level < 0.0 || noise_level >= 1.0) throw ValueError("synth: noise must be in [0,1)");
    if (images_per_patient < 1) throw ValueError("synth: images_per_patient must be >= 1");
    for (const auto& [name, c] : counts) {
        if (c < 0) throw ValueError("synth: negative count for class '" + name + "'");
        if (c > 0 && !class_params.count(name))
            throw ValueError("synth: no parameters for class '" + name + "'");
    }
    for (const auto& [name, p] : class_params)
        if (p.kappa < 0.0) throw ValueError("synth: kappa must be >= 0 for '" + name + "'");
}

DualModalImage synth_tissue_sample(const ClassSynthParams& params, std::size_t height,
                                   std::size_t width, double noise_level, double mean_angle,
                                   std::uint64_t seed) {
    Rng rng(seed);
    DualModalImage out;
    out.af = PlaneF(height, width);
    out.shg = PlaneF(height, width);

    const double side = double(std::min(height, width));
    for (int f = 0; f < params.fiber_count; ++f) {
        const double angle = sample_orientation(rng, mean_angle, params.kappa);
        const double len = std::max(4.0, rng.normal(params.fiber_len_frac * side,
                                                    params.fiber_len_frac * side / 4.0));
        const double cx = rng.uniform(0.0, double(width));
        const double cy = rng.uniform(0.0, double(height));
        const double dx = std::cos(angle) * len / 2.0, dy = std::sin(angle) * len / 2.0;
        draw_segment(out.shg, cx - dx, cy - dy, cx + dx, cy + dy, params.fiber_thickness,
                     rng.uniform(0.6, 1.0));
    }
    for (int b = 0; b < params.blob_count; ++b)
        draw_blob(out.af, rng.uniform(0.0, double(width)), rng.uniform(0.0, double(height)),
                  rng.uniform(params.blob_radius_min, params.blob_radius_max),
                  rng.uniform(0.5, 1.0));

    finalize_plane(out.shg, rng, noise_level);
    finalize_plane(out.af, rng, noise_level);
    return out;
}

DatasetManifest generate_dataset(const SynthSpec& spec, const std::filesystem::path& out_dir) {
    spec.validate();
    std::filesystem::create_directories(out_dir / "planes");

    DatasetManifest manifest;
    manifest.labels = tissue_labels();

    std::size_t class_idx = 0;
    for (const auto& label : manifest.labels) {
        const auto count_it = spec.counts.find(label);
        const int count = count_it == spec.counts.end() ? 0 : count_it->second;
        if (count > 0) {
            const auto& params = spec.class_params.at(label);
            for (int i = 0; i < count; ++i) {
                const int patient = i / spec.images_per_patient;
                // one dominant collagen direction per imaged patient region
                Rng patient_rng(mix_seed(spec.seed, {0xa11c, class_idx, std::uint64_t(patient)}));
                const double mean_angle = patient_rng.uniform(0.0, kPi);

                const std::uint64_t sample_seed =
                    mix_seed(spec.seed, {0x5a3u, class_idx, std::uint64_t(i)});
                auto image = synth_tissue_sample(params, spec.height, spec.width, spec.noise_level,
                                                 mean_angle, sample_seed);

                SampleRecord rec;
                rec.sample_id = label + "_" + std::to_string(i);
                rec.patient_id = label + "_p" + std::to_string(patient);
                const std::string af_name = "planes/" + rec.sample_id + "_af.png";
                const std::string shg_name = "planes/" + rec.sample_id + "_shg.png";
                write_gray16_png(out_dir / af_name, to_u16(image.af));
                write_gray16_png(out_dir / shg_name, to_u16(image.shg));
                rec.af_path = out_dir / af_name;
                rec.shg_path = out_dir / shg_name;
                rec.label = int(class_idx);
                manifest.records.push_back(std::move(rec));
            }
        }
        ++class_idx;
    }

    // manifest references planes relative to its own directory
    DatasetManifest rel = manifest;
    for (auto& r : rel.records) {
        r.af_path = std::filesystem::relative(r.af_path, out_dir);
        r.shg_path = std::filesystem::relative(r.shg_path, out_dir);
    }
    save_manifest(rel, out_dir / "manifest.csv");
    return manifest;
}

DatasetManifest generate_pretext_dataset(int per_class, std::size_t image_size,
                                         std::uint64_t seed,
                                         const std::filesystem::path& out_dir) {
    if (per_class < 1) throw ValueError("pretext: per_class must be >= 1");
    if (image_size < 32) throw ValueError("pretext: image size must be >= 32");
    std::filesystem::create_directories(out_dir / "planes");

    DatasetManifest manifest;
    manifest.labels = pretext_labels();
    for (std::size_t c = 0; c < manifest.labels.size(); ++c) {
        const auto& family = manifest.labels[c];
        for (int i = 0; i < per_class; ++i) {
            Rng rng(mix_seed(seed, {0x9e7e, c, std::uint64_t(i)}));
            PlaneF shg = make_pretext_plane(family, image_size, rng);
            PlaneF af = make_blob_field(image_size, rng);
            Rng noise_rng(mix_seed(seed, {0x9e7f, c, std::uint64_t(i)}));
            finalize_plane(shg, noise_rng, 0.03);
            finalize_plane(af, noise_rng, 0.03);

            SampleRecord rec;
            rec.sample_id = family + "_" + std::to_string(i);
            rec.patient_id = rec.sample_id;
            const std::string af_name = "planes/" + rec.sample_id + "_af.png";
            const std::string shg_name = "planes/" + rec.sample_id + "_shg.png";
            write_gray16_png(out_dir / af_name, to_u16(af));
            write_gray16_png(out_dir / shg_name, to_u16(shg));
            rec.af_path = out_dir / af_name;
            rec.shg_path = out_dir / shg_name;
            rec.label = int(c);
            manifest.records.push_back(std::move(rec));
        }
    }
    DatasetManifest rel = manifest;
    for (auto& r : rel.records) {
        r.af_path = std::filesystem::relative(r.af_path, out_dir);
        r.shg_path = std::filesystem::relative(r.shg_path, out_dir);
    }
    save_manifest(rel, out_dir / "manifest.csv");
    return manifest;
}

double orientation_circular_variance(const PlaneF& plane) {
    if (plane.h < 3 || plane.w < 3) throw ValueError("orientation statistic needs >= 3x3 input");
    double sum_c = 0, sum_s = 0, sum_w = 0;
    for (std::size_t y = 1; y + 1 < plane.h; ++y)
        for (std::size_t x = 1; x + 1 < plane.w; ++x) {
            const double gx = (plane.at(y - 1, x + 1) + 2.0 * plane.at(y, x + 1) +
                               plane.at(y + 1, x + 1)) -
                              (plane.at(y - 1, x - 1) + 2.0 * plane.at(y, x - 1) +
                               plane.at(y + 1, x - 1));
            const double gy = (plane.at(y + 1, x - 1) + 2.0 * plane.at(y + 1, x) +
                               plane.at(y + 1, x + 1)) -
                              (plane.at(y - 1, x - 1) + 2.0 * plane.at(y - 1, x) +
                               plane.at(y - 1, x + 1));
            const double mag = std::hypot(gx, gy);
            if (mag <= 0) continue;
            const double theta = std::atan2(gy, gx);
            sum_c += mag * std::cos(2.0 * theta);
            sum_s += mag * std::sin(2.0 * theta);
            sum_w += mag;
        }
    if (sum_w <= 0) return 1.0;
    return 1.0 - std::hypot(sum_c, sum_s) / sum_w;
}

}  // namespace duomic
