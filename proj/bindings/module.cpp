// Python bindings for the duomic core: imaging ops, dataset handling,
// metrics, the synthetic generator, and grad-cam over saved checkpoints.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "duomic/checkpoint.hpp"
#include "duomic/dataset.hpp"
#include "duomic/gradcam.hpp"
#include "duomic/imaging.hpp"
#include "duomic/metrics.hpp"
#include "duomic/png_io.hpp"
#include "duomic/synth.hpp"
#include "duomic/trainer.hpp"

namespace py = pybind11;
using namespace duomic;

namespace {

PlaneF plane_from_array(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw ValueError("expected a 2-d array");
    PlaneF plane(std::size_t(a.shape(0)), std::size_t(a.shape(1)));
    std::memcpy(plane.v.data(), a.data(), plane.size() * sizeof(float));
    return plane;
}

PlaneU8 plane_u8_from_array(
    const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw ValueError("expected a 2-d uint8 array");
    PlaneU8 plane(std::size_t(a.shape(0)), std::size_t(a.shape(1)));
    std::memcpy(plane.v.data(), a.data(), plane.size());
    return plane;
}

py::array_t<std::uint8_t> array_from_plane_u8(const PlaneU8& plane) {
    py::array_t<std::uint8_t> out({plane.h, plane.w});
    std::memcpy(out.mutable_data(), plane.v.data(), plane.size());
    return out;
}

FusedImage fused_from_array(
    const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 3 || a.shape(2) != 3) throw ValueError("expected an HxWx3 uint8 array");
    FusedImage img(std::size_t(a.shape(0)), std::size_t(a.shape(1)));
    std::memcpy(img.rgb.data(), a.data(), img.rgb.size());
    return img;
}

py::array_t<std::uint8_t> array_from_fused(const FusedImage& img) {
    py::array_t<std::uint8_t> out({img.h, img.w, std::size_t(3)});
    std::memcpy(out.mutable_data(), img.rgb.data(), img.rgb.size());
    return out;
}

py::dict manifest_to_dict(const DatasetManifest& m) {
    py::dict d;
    d["labels"] = m.labels;
    py::list rows;
    for (const auto& r : m.records) {
        py::dict row;
        row["sample_id"] = r.sample_id;
        row["patient_id"] = r.patient_id;
        row["af_path"] = r.af_path.string();
        row["shg_path"] = r.shg_path.string();
        row["label"] = m.label_name(r.label);
        rows.append(row);
    }
    d["records"] = rows;
    d["counts"] = m.counts();
    return d;
}

}  // namespace

PYBIND11_MODULE(_duomic, m) {
    m.doc() = "dual-modality microscopy classification pipeline (C++ core)";

    py::register_exception<ValueError>(m, "ValueError_", PyExc_ValueError);
    py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_RuntimeError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    // imaging
    m.def("normalize_channel",
          [](const py::array_t<float, py::array::c_style | py::array::forcecast>& raw) {
              return array_from_plane_u8(normalize_channel(plane_from_array(raw)));
          },
          py::arg("raw"), "Min-max normalization of one intensity plane to [0,255] bytes.");
    m.def("fuse_channels",
          [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& af,
             const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& shg) {
              return array_from_fused(fuse_channels(plane_u8_from_array(af),
                                                    plane_u8_from_array(shg)));
          },
          py::arg("af"), py::arg("shg"),
          "Fuse normalized planes: G = 1.3*shg (clamped), B = af, R = 0.");
    m.def("rotate",
          [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& img,
             double angle_deg) { return array_from_fused(rotate(fused_from_array(img), angle_deg)); },
          py::arg("image"), py::arg("angle_deg"),
          "Rotation about the center, bilinear, reflected borders.");
    m.def("augment",
          [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& img,
             double limit_deg, std::uint64_t seed) {
              AugmentParams p;
              p.rotation_limit_deg = limit_deg;
              p.seed = seed;
              return array_from_fused(augment(fused_from_array(img), p));
          },
          py::arg("image"), py::arg("rotation_limit_deg") = 30.0, py::arg("seed") = 0);
    m.def("resize",
          [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& img,
             std::size_t h, std::size_t w) {
              return array_from_fused(resize(fused_from_array(img), h, w));
          },
          py::arg("image"), py::arg("height"), py::arg("width"));

    // dataset
    m.def("load_manifest",
          [](const std::filesystem::path& path, bool check_paths) {
              return manifest_to_dict(load_manifest(path, tissue_labels(), check_paths));
          },
          py::arg("path"), py::arg("check_paths") = true);
    m.def("compute_class_weights", &compute_class_weights, py::arg("counts"),
          "Inverse-frequency weights, most frequent class anchored at 1.0.");
    m.def("stratified_kfold",
          [](const std::filesystem::path& manifest_path, int k, std::uint64_t seed,
             bool group_by_patient) {
              auto manifest = load_manifest(manifest_path, tissue_labels(), false);
              return stratified_kfold(manifest, k, seed, group_by_patient).assignments;
          },
          py::arg("manifest"), py::arg("k") = 5, py::arg("seed") = 0,
          py::arg("group_by_patient") = false);
    m.def("tissue_labels", [] { return tissue_labels(); });
    m.def("binary_labels", [] { return binary_labels(); });

    // synthetic data
    m.def("generate_dataset",
          [](const std::filesystem::path& out_dir, std::map<std::string, int> counts,
             std::size_t size, double noise, std::uint64_t seed, int images_per_patient) {
              SynthSpec spec;
              if (!counts.empty()) spec.counts = std::move(counts);
              spec.height = spec.width = size;
              spec.noise_level = noise;
              spec.seed = seed;
              spec.images_per_patient = images_per_patient;
              return manifest_to_dict(generate_dataset(spec, out_dir));
          },
          py::arg("out_dir"), py::arg("counts") = std::map<std::string, int>{},
          py::arg("size") = 64, py::arg("noise") = 0.04, py::arg("seed") = 0,
          py::arg("images_per_patient") = 8);
    m.def("generate_pretext_dataset",
          [](const std::filesystem::path& out_dir, int per_class, std::size_t size,
             std::uint64_t seed) {
              return manifest_to_dict(generate_pretext_dataset(per_class, size, seed, out_dir));
          },
          py::arg("out_dir"), py::arg("per_class") = 200, py::arg("size") = 64,
          py::arg("seed") = 0);
    m.def("orientation_circular_variance",
          [](const py::array_t<float, py::array::c_style | py::array::forcecast>& plane) {
              return orientation_circular_variance(plane_from_array(plane));
          },
          py::arg("plane"));

    // metrics
    m.def("confusion_matrix",
          [](const std::vector<int>& truth, const std::vector<int>& pred, std::size_t k) {
              auto cm = confusion_matrix(truth, pred, k);
              py::array_t<std::int64_t> out({k, k});
              std::memcpy(out.mutable_data(), cm.counts.data(), k * k * sizeof(std::int64_t));
              return out;
          },
          py::arg("truth"), py::arg("predicted"), py::arg("num_classes"));
    m.def("classification_metrics",
          [](const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& cm_arr) {
              if (cm_arr.ndim() != 2 || cm_arr.shape(0) != cm_arr.shape(1))
                  throw ValueError("confusion matrix must be square");
              ConfusionMatrix cm(std::size_t(cm_arr.shape(0)));
              std::memcpy(cm.counts.data(), cm_arr.data(),
                          cm.counts.size() * sizeof(std::int64_t));
              const auto metrics = classification_metrics(cm);
              py::dict d;
              py::list per_class;
              for (const auto& pc : metrics.per_class) {
                  py::dict p;
                  p["precision"] = pc.precision;
                  p["recall"] = pc.recall;
                  p["f1"] = pc.f1;
                  p["precision_defined"] = pc.precision_defined;
                  p["recall_defined"] = pc.recall_defined;
                  per_class.append(p);
              }
              d["per_class"] = per_class;
              d["macro_precision"] = metrics.macro_precision;
              d["macro_recall"] = metrics.macro_recall;
              d["macro_f1"] = metrics.macro_f1;
              d["accuracy"] = metrics.accuracy;
              return d;
          },
          py::arg("confusion"));
    m.def("roc_curve",
          [](const std::vector<double>& scores, const std::vector<int>& labels) {
              auto curve = roc_curve(scores, labels);
              return py::make_tuple(curve.fpr, curve.tpr, curve.thresholds, curve.auc);
          },
          py::arg("scores"), py::arg("labels"),
          "Returns (fpr, tpr, thresholds, auc); ties grouped so auc equals the "
          "Mann-Whitney statistic.");
    m.def("pr_curve",
          [](const std::vector<double>& scores, const std::vector<int>& labels) {
              auto curve = pr_curve(scores, labels);
              return py::make_tuple(curve.recall, curve.precision, curve.thresholds,
                                    curve.average_precision);
          },
          py::arg("scores"), py::arg("labels"));

    // grad-cam on a saved checkpoint
    m.def("grad_cam",
          [](const std::filesystem::path& checkpoint,
             const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& image,
             int target_class, const std::string& layer, std::size_t input_size) {
              Model model = load_model(checkpoint);
              const FusedImage sized = resize(fused_from_array(image), input_size, input_size);
              Tensor x({1, 3, input_size, input_size});
              for (std::size_t c = 0; c < 3; ++c)
                  for (std::size_t i = 0; i < input_size * input_size; ++i)
                      x[c * input_size * input_size + i] = float(sized.rgb[i * 3 + c]) / 255.0f;
              const std::string layer_id = layer.empty() ? model.capture_layers().back() : layer;
              auto map = grad_cam(model, x, target_class, layer_id);
              py::array_t<float> out({map.up_h, map.up_w});
              std::memcpy(out.mutable_data(), map.upsampled.data(),
                          map.upsampled.size() * sizeof(float));
              return out;
          },
          py::arg("checkpoint"), py::arg("image"), py::arg("target_class") = 0,
          py::arg("layer") = std::string(), py::arg("input_size") = 64);

    m.attr("__version__") = "0.1.0";
}
