#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "duomic/optim.hpp"
#include "duomic/png_io.hpp"
#include "duomic/synth.hpp"
#include "duomic/trainer.hpp"

using namespace duomic;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::pair<double, double> mean_sd(const std::vector<double>& xs) {
    double mean = 0;
    for (double x : xs) mean += x;
    mean /= double(xs.size());
    double var = 0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= double(xs.size() - 1);
    return {mean, std::sqrt(var)};
}

}  // namespace

TEST_CASE("generate_dataset: paper class distribution yields 239 manifest rows") {
    const auto dir = temp_dir("duomic_synth_239");
    SynthSpec spec;
    spec.height = spec.width = 32;  // small for test speed
    spec.seed = 7;
    auto manifest = generate_dataset(spec, dir);
    CHECK(manifest.size() == 239);
    auto counts = manifest.counts();
    CHECK(counts[0] == 102);  // cancer
    CHECK(counts[1] == 101);  // fibrosis
    CHECK(counts[2] == 36);   // normal
    // written manifest loads back with resolvable paths
    auto loaded = load_manifest(dir / "manifest.csv");
    CHECK(loaded.size() == 239);
    // eight images per synthetic patient region
    std::map<std::string, int> per_patient;
    for (const auto& r : loaded.records) per_patient[r.patient_id]++;
    int eights = 0;
    for (const auto& [pid, n] : per_patient) eights += n == 8;
    CHECK(eights >= int(per_patient.size()) - 3);  // remainder regions may be smaller
    fs::remove_all(dir);
}

TEST_CASE("generate_dataset: identical seeds give byte-identical planes") {
    const auto dir_a = temp_dir("duomic_synth_det_a");
    const auto dir_b = temp_dir("duomic_synth_det_b");
    SynthSpec spec;
    spec.height = spec.width = 32;
    spec.counts = {{"cancer", 3}, {"fibrosis", 3}, {"normal", 3}};
    spec.seed = 99;
    auto ma = generate_dataset(spec, dir_a);
    auto mb = generate_dataset(spec, dir_b);
    REQUIRE(ma.size() == mb.size());
    for (std::size_t i = 0; i < ma.size(); ++i) {
        std::ifstream fa(ma.records[i].shg_path, std::ios::binary);
        std::ifstream fb(mb.records[i].shg_path, std::ios::binary);
        std::string ba((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
        std::string bb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
        CHECK(ba == bb);
    }
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
}

TEST_CASE("synth planes stay within the 16-bit range") {
    auto params = SynthSpec::default_class_params().at("fibrosis");
    auto img = synth_tissue_sample(params, 48, 48, 0.1, 0.5, 42);
    for (float v : img.shg.v) {
        CHECK(v >= 0.0f);
        CHECK(v <= 65535.0f);
    }
    for (float v : img.af.v) {
        CHECK(v >= 0.0f);
        CHECK(v <= 65535.0f);
    }
}

TEST_CASE("orientation statistic separates cancer from normal by > 3 pooled SDs") {
    const auto params = SynthSpec::default_class_params();
    std::vector<double> cancer_cv, normal_cv;
    for (int i = 0; i < 50; ++i) {
        auto c = synth_tissue_sample(params.at("cancer"), 64, 64, 0.04, 1.1, 1000 + i);
        auto n = synth_tissue_sample(params.at("normal"), 64, 64, 0.04, 1.1, 2000 + i);
        cancer_cv.push_back(orientation_circular_variance(c.shg));
        normal_cv.push_back(orientation_circular_variance(n.shg));
    }
    auto [mc, sc] = mean_sd(cancer_cv);
    auto [mn, sn] = mean_sd(normal_cv);
    const double pooled = std::sqrt((sc * sc + sn * sn) / 2.0);
    CHECK(mn > mc);  // aligned fibers -> low circular variance
    CHECK((mn - mc) / pooled > 3.0);
}

TEST_CASE("circular variance gap is monotone in kappa") {
    ClassSynthParams params = SynthSpec::default_class_params().at("cancer");
    std::vector<double> kappas{0.0, 2.0, 8.0, 30.0};
    std::vector<double> means;
    for (double kappa : kappas) {
        params.kappa = kappa;
        std::vector<double> cv;
        for (int i = 0; i < 30; ++i) {
            auto img = synth_tissue_sample(params, 64, 64, 0.02, 0.8, 500 + i);
            cv.push_back(orientation_circular_variance(img.shg));
        }
        means.push_back(mean_sd(cv).first);
    }
    for (std::size_t i = 1; i < means.size(); ++i) CHECK(means[i] < means[i - 1]);
}

TEST_CASE("generate_pretext_dataset: 4 classes x 200 images = 800 rows") {
    const auto dir = temp_dir("duomic_pretext");
    auto manifest = generate_pretext_dataset(200, 32, 5, dir);
    CHECK(manifest.size() == 800);
    auto counts = manifest.counts();
    for (auto c : counts) CHECK(c == 200);
    fs::remove_all(dir);
}

TEST_CASE("pretext families have distinct class-conditional mean images") {
    const auto dir = temp_dir("duomic_pretext_means");
    auto manifest = generate_pretext_dataset(10, 32, 9, dir);
    std::vector<std::vector<double>> means(4, std::vector<double>(32 * 32, 0));
    std::vector<int> n(4, 0);
    for (const auto& r : manifest.records) {
        auto [plane, depth] = read_gray_plane(r.shg_path);
        for (std::size_t i = 0; i < plane.size(); ++i) means[r.label][i] += plane.v[i];
        n[r.label]++;
    }
    for (int c = 0; c < 4; ++c)
        for (auto& v : means[c]) v /= n[c];
    for (int a = 0; a < 4; ++a)
        for (int b = a + 1; b < 4; ++b) {
            double l2 = 0;
            for (std::size_t i = 0; i < means[a].size(); ++i) {
                const double d = means[a][i] - means[b][i];
                l2 += d * d;
            }
            CHECK(std::sqrt(l2) > 0.0);
        }
    fs::remove_all(dir);
}

TEST_CASE("pretext: linear pixel probe vs a briefly trained CNN (reported)") {
    // comparison is reported, not gated: prints both accuracies
    const auto dir = temp_dir("duomic_pretext_probe");
    auto manifest = generate_pretext_dataset(24, 32, 13, dir);
    auto data = load_dataset(manifest);
    auto plan = stratified_kfold(manifest, 4, 13);
    auto train_idx = fold_indices(data, plan, 0, false);
    auto val_idx = fold_indices(data, plan, 0, true);
    const std::size_t k = data.classes.size();
    const std::size_t size = 16;

    // linear probe: one dense layer on raw pixels, full-batch adam
    auto flat = [&](const std::vector<std::size_t>& idx) {
        Tensor x({idx.size(), 3 * size * size});
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const FusedImage img = resize(data.images[idx[i]], size, size);
            for (std::size_t p = 0; p < 3 * size * size; ++p)
                x.at2(i, p) = float(img.rgb[(p % (size * size)) * 3 + p / (size * size)]) / 255.0f;
        }
        return x;
    };
    Tensor xtrain = flat(train_idx), xval = flat(val_idx);
    Tensor ytrain({train_idx.size(), k}, 0.0f);
    for (std::size_t i = 0; i < train_idx.size(); ++i)
        ytrain.at2(i, std::size_t(data.labels[train_idx[i]])) = 1.0f;
    ParamStore probe_params;
    Rng wrng(3);
    Tensor w0({3 * size * size, k});
    for (auto& v : w0.data) v = float(wrng.normal(0.0, 0.01));
    auto w = probe_params.add("w", w0);
    auto b = probe_params.add("b", Tensor({k}, 0.0f));
    Tensor unit({k}, 1.0f);
    AdamW opt({1e-3, 0.0});
    for (int it = 0; it < 60; ++it) {
        auto loss = weighted_smoothed_ce<float>(linear(make_leaf(xtrain), w, b), ytrain, unit, 0.0);
        probe_params.zero_grads();
        backward(loss);
        opt.step(probe_params);
    }
    std::size_t probe_hits = 0;
    {
        NoGradGuard guard;
        auto logits = linear(make_leaf(xval), w, b);
        for (std::size_t i = 0; i < val_idx.size(); ++i)
            probe_hits += argmax_lowest(logits->value.ptr() + i * k, k) ==
                          data.labels[val_idx[i]];
    }
    const double probe_acc = double(probe_hits) / double(val_idx.size());

    // CNN trained 3 epochs on the same data
    ModelConfig cfg;
    cfg.block_counts = {1};
    cfg.base_width = 8;
    cfg.num_classes = int(k);
    cfg.head_hidden = 32;
    Model cnn(cfg, 19);
    TrainRecipe recipe;
    recipe.epochs = 3;
    recipe.lr = 1e-3;  // same rate as the probe
    recipe.input_size = size;
    recipe.mixup_alpha = 0.0;
    recipe.seed = 19;
    auto result = train(cnn, data, train_idx, val_idx, recipe,
                        std::vector<double>(k, 1.0));
    const double cnn_acc = result.best_val_acc;

    MESSAGE("pretext linear probe acc " << probe_acc << " vs 3-epoch CNN acc " << cnn_acc);
    CHECK(std::isfinite(probe_acc));
    CHECK(std::isfinite(cnn_acc));
    fs::remove_all(dir);
}

TEST_CASE("synth spec validation") {
    SynthSpec spec;
    spec.height = 16;
    CHECK_THROWS_AS(spec.validate(), ValueError);
    spec.height = 64;
    spec.noise_level = 1.5;
    CHECK_THROWS_AS(spec.validate(), ValueError);
    spec.noise_level = 0.05;
    spec.counts["cancer"] = -1;
    CHECK_THROWS_AS(spec.validate(), ValueError);
}
