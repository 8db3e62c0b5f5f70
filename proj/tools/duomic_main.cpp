// duomic: dual-modality microscopy classification pipeline.
//
// Subcommands mirror the experiment flow: synth -> preprocess -> split ->
// pretrain -> train / kfold -> eval -> gradcam -> report.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "duomic/checkpoint.hpp"
#include "duomic/dataset.hpp"
#include "duomic/gradcam.hpp"
#include "duomic/imaging.hpp"
#include "duomic/metrics.hpp"
#include "duomic/model.hpp"
#include "duomic/png_io.hpp"
#include "duomic/report_svg.hpp"
#include "duomic/synth.hpp"
#include "duomic/trainer.hpp"

namespace fs = std::filesystem;
using namespace duomic;

namespace {

constexpr const char* kToolVersion = "0.1.0";

fs::path default_out_root() {
    if (const char* env = std::getenv("DUOMIC_OUT")) return fs::path(env);
    return fs::path("duomic_out");
}

/// Every run directory records how it was produced. A `.incomplete` marker
/// lives in the directory until the subcommand finishes, so an aborted run
/// is recognizable.
void write_run_config(const fs::path& out_dir, const std::string& subcommand,
                      const nlohmann::json& params) {
    fs::create_directories(out_dir);
    nlohmann::json j;
    j["tool"] = "duomic";
    j["version"] = kToolVersion;
    j["checkpoint_format_version"] = Checkpoint::kVersion;
    j["subcommand"] = subcommand;
    j["params"] = params;
    std::ofstream out(out_dir / "run_config.json");
    if (!out) throw DataError("cannot write " + (out_dir / "run_config.json").string());
    out << j.dump(2) << "\n";
    std::ofstream marker(out_dir / ".incomplete");
    marker << "run in progress\n";
}

struct RunGuard {
    fs::path out_dir;
    ~RunGuard() = default;
    void finish() const { fs::remove(out_dir / ".incomplete"); }
};

struct RecipeFlags {
    TrainRecipe recipe;
    void attach(CLI::App* cmd) {
        cmd->add_option("--epochs", recipe.epochs, "Training epochs");
        cmd->add_option("--lr", recipe.lr, "Base learning rate");
        cmd->add_option("--weight-decay", recipe.weight_decay, "Decoupled weight decay");
        cmd->add_option("--batch-size", recipe.batch_size, "Batch size");
        cmd->add_option("--smoothing", recipe.label_smoothing, "Label smoothing epsilon");
        cmd->add_option("--mixup", recipe.mixup_alpha, "Mixup alpha (0 disables)");
        cmd->add_option("--clip", recipe.clip_norm, "Gradient clipping norm");
        cmd->add_option("--input-size", recipe.input_size, "Model input resolution");
        cmd->add_flag_callback("--no-augment", [this] { recipe.augment = false; },
                               "Disable rotation augmentation");
        cmd->add_option("--seed", recipe.seed, "Run seed");
    }
    nlohmann::json json() const {
        return {{"epochs", recipe.epochs},
                {"lr", recipe.lr},
                {"weight_decay", recipe.weight_decay},
                {"batch_size", recipe.batch_size},
                {"label_smoothing", recipe.label_smoothing},
                {"mixup_alpha", recipe.mixup_alpha},
                {"clip_norm", recipe.clip_norm},
                {"input_size", recipe.input_size},
                {"augment", recipe.augment},
                {"seed", recipe.seed},
                {"freeze", freeze_mode_name(recipe.freeze)}};
    }
};

struct ModelFlags {
    int depth = 18;
    int width = 16;
    int head_hidden = 512;
    double head_dropout = 0.1;
    std::vector<int> blocks;  // overrides depth when given
    bool bottleneck = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--depth", depth, "ResNet depth preset: 18, 34 or 50");
        cmd->add_option("--width", width, "Base width of the first stage");
        cmd->add_option("--head-hidden", head_hidden, "Hidden units in the classifier head");
        cmd->add_option("--head-dropout", head_dropout, "Dropout in the classifier head");
        cmd->add_option("--blocks", blocks, "Explicit per-stage block counts (overrides --depth)")
            ->delimiter(',');
        cmd->add_flag("--bottleneck", bottleneck, "Use bottleneck blocks with --blocks");
    }
    ModelConfig config(int num_classes) const {
        ModelConfig cfg;
        if (blocks.empty()) {
            cfg = depth_preset(depth, width, num_classes);
        } else {
            cfg.block_counts = blocks;
            cfg.base_width = width;
            cfg.num_classes = num_classes;
            cfg.bottleneck = bottleneck;
        }
        cfg.head_hidden = head_hidden;
        cfg.head_dropout = head_dropout;
        return cfg;
    }
    nlohmann::json json(int num_classes) const {
        return nlohmann::json::parse(model_config_to_json(config(num_classes)));
    }
};

std::vector<std::size_t> complement(const std::vector<std::size_t>& subset, std::size_t n) {
    std::vector<bool> in(n, false);
    for (auto i : subset) in[i] = true;
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n; ++i)
        if (!in[i]) out.push_back(i);
    return out;
}

/// train/val split: an explicit fold plan when given, otherwise a stratified
/// holdout of roughly the requested fraction (fold 0 of a k = 1/fraction split).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> make_split(
    const DatasetManifest& manifest, const LoadedDataset& data, const std::string& folds_path,
    int fold, double holdout, std::uint64_t seed) {
    FoldPlan plan;
    if (!folds_path.empty()) {
        plan = FoldPlan::load(folds_path);
    } else {
        const int k = std::max(2, int(std::lround(1.0 / holdout)));
        plan = stratified_kfold(manifest, k, seed);
        fold = 0;
    }
    auto val = fold_indices(data, plan, fold, true);
    auto train = fold_indices(data, plan, fold, false);
    return {train, val};
}

void print_report_summary(const EvalReport& report) {
    std::cout << "accuracy " << report.metrics.accuracy << ", macro P/R/F1 "
              << report.metrics.macro_precision << "/" << report.metrics.macro_recall << "/"
              << report.metrics.macro_f1 << "\n";
    for (std::size_t c = 0; c < report.classes.size(); ++c) {
        std::cout << "  " << report.classes[c] << ": P " << report.metrics.per_class[c].precision
                  << " R " << report.metrics.per_class[c].recall << " F1 "
                  << report.metrics.per_class[c].f1;
        if (report.curves.roc[c]) std::cout << " AUC " << report.curves.roc[c]->auc;
        std::cout << "\n";
    }
}

// ---------------------------------------------------------------------------
// subcommand bodies
// ---------------------------------------------------------------------------

int cmd_synth(const fs::path& out, std::vector<int> counts, std::size_t size, double noise,
              std::uint64_t seed, int per_patient) {
    SynthSpec spec;
    if (!counts.empty()) {
        if (counts.size() != 3)
            throw ValueError("--counts wants three values: cancer,fibrosis,normal");
        spec.counts = {{"cancer", counts[0]}, {"fibrosis", counts[1]}, {"normal", counts[2]}};
    }
    spec.height = spec.width = size;
    spec.noise_level = noise;
    spec.seed = seed;
    spec.images_per_patient = per_patient;
    write_run_config(out, "synth",
                     {{"counts", spec.counts},
                      {"size", size},
                      {"noise", noise},
                      {"seed", seed},
                      {"images_per_patient", per_patient}});
    auto manifest = generate_dataset(spec, out);
    std::cout << "wrote " << manifest.size() << " samples to " << out.string() << "\n";
    RunGuard{out}.finish();
    return 0;
}

int cmd_preprocess(const fs::path& manifest_path, const fs::path& out) {
    auto manifest = load_manifest(manifest_path);
    write_run_config(out, "preprocess", {{"manifest", manifest_path.string()}});
    fs::create_directories(out / "fused");
    std::ofstream index(out / "fused_index.csv");
    if (!index) throw DataError("cannot write fused index");
    index << "sample_id,patient_id,fused_path,label\n";
    for (const auto& rec : manifest.records) {
        auto [af, afd] = read_gray_plane(rec.af_path);
        auto [shg, shgd] = read_gray_plane(rec.shg_path);
        DualModalImage dual;
        dual.af = std::move(af);
        dual.shg = std::move(shg);
        dual.sample_id = rec.sample_id;
        const auto fused = preprocess(dual);
        const std::string name = "fused/" + rec.sample_id + ".png";
        write_rgb8_png(out / name, fused);
        index << rec.sample_id << ',' << rec.patient_id << ',' << name << ','
              << manifest.label_name(rec.label) << "\n";
    }
    std::cout << "fused " << manifest.size() << " samples into " << (out / "fused").string()
              << "\n";
    RunGuard{out}.finish();
    return 0;
}

int cmd_split(const fs::path& manifest_path, const fs::path& out, int k, std::uint64_t seed,
              bool group_by_patient) {
    auto manifest = load_manifest(manifest_path, tissue_labels(), false);
    auto plan = stratified_kfold(manifest, k, seed, group_by_patient);
    write_run_config(out, "split",
                     {{"manifest", manifest_path.string()},
                      {"k", k},
                      {"seed", seed},
                      {"group_by_patient", group_by_patient}});
    plan.save(out / "folds.json");
    std::cout << "wrote " << (out / "folds.json").string() << "\n";
    RunGuard{out}.finish();
    return 0;
}

int cmd_pretrain(const fs::path& out, int per_class, std::size_t size, RecipeFlags& rf,
                 ModelFlags& mf, const fs::path& existing_data) {
    DatasetManifest manifest;
    if (existing_data.empty()) {
        manifest = generate_pretext_dataset(per_class, size, rf.recipe.seed, out / "pretext_data");
    } else {
        manifest = load_manifest(existing_data, pretext_labels());
    }
    write_run_config(out, "pretrain",
                     {{"per_class", per_class},
                      {"size", size},
                      {"recipe", rf.json()},
                      {"model", mf.json(int(pretext_labels().size()))}});

    auto data = load_dataset(manifest);
    auto plan = stratified_kfold(manifest, 10, rf.recipe.seed);  // 10% holdout
    auto val = fold_indices(data, plan, 0, true);
    auto train_idx = fold_indices(data, plan, 0, false);
    const auto weights = compute_class_weights(manifest.counts());

    Model model(mf.config(int(pretext_labels().size())), mix_seed(rf.recipe.seed, {0x12e7e0}));
    auto result = train(model, data, train_idx, val, rf.recipe, weights);
    result.history.save_csv(out / "history.csv");
    save_checkpoint(model, out / "backbone.dnck", nullptr, rf.recipe.seed,
                    std::uint64_t(rf.recipe.epochs));
    std::cout << "pretext backbone: best val acc " << result.best_val_acc << " (epoch "
              << result.best_epoch + 1 << "), saved " << (out / "backbone.dnck").string() << "\n";
    RunGuard{out}.finish();
    return 0;
}

int cmd_train(const fs::path& manifest_path, const fs::path& out, const std::string& task,
              const std::string& folds_path, int fold, double holdout,
              const fs::path& init_backbone, const std::string& freeze, RecipeFlags& rf,
              ModelFlags& mf) {
    rf.recipe.freeze = freeze_mode_from_name(freeze);
    auto manifest = load_manifest(manifest_path);
    if (task == "binary") manifest = to_binary_view(manifest);
    const int num_classes = int(manifest.labels.size());

    write_run_config(out, "train",
                     {{"manifest", manifest_path.string()},
                      {"task", task},
                      {"folds", folds_path},
                      {"fold", fold},
                      {"holdout", holdout},
                      {"init_backbone", init_backbone.string()},
                      {"recipe", rf.json()},
                      {"model", mf.json(num_classes)}});

    auto data = load_dataset(manifest);
    auto [train_idx, val_idx] = make_split(manifest, data, folds_path, fold, holdout,
                                           rf.recipe.seed);
    std::vector<std::size_t> train_counts(data.classes.size(), 0);
    for (auto i : train_idx) train_counts[std::size_t(data.labels[i])]++;
    const auto weights = compute_class_weights(train_counts);

    Model model(mf.config(num_classes), mix_seed(rf.recipe.seed, {0x7a19}));
    if (!init_backbone.empty()) load_backbone(model, read_checkpoint(init_backbone));

    auto result = train(model, data, train_idx, val_idx, rf.recipe, weights);
    result.history.save_csv(out / "history.csv");
    save_checkpoint(model, out / "checkpoint.dnck", nullptr, rf.recipe.seed,
                    std::uint64_t(result.history.train_loss.size()));

    auto eval = evaluate(model, data, val_idx, rf.recipe.input_size);
    std::vector<int> truth;
    for (auto i : val_idx) truth.push_back(data.labels[i]);
    auto report = build_eval_report(data.classes, truth, eval.predicted, eval.scores);
    report.save(out / "eval");
    std::cout << "best val acc " << result.best_val_acc << " (epoch " << result.best_epoch + 1
              << ")\n";
    print_report_summary(report);
    RunGuard{out}.finish();
    return 0;
}

int cmd_kfold(const fs::path& manifest_path, const fs::path& out, const std::string& task, int k,
              const std::string& folds_path, std::vector<int> depths, RecipeFlags& rf,
              ModelFlags& mf) {
    auto manifest = load_manifest(manifest_path);
    if (task == "binary") manifest = to_binary_view(manifest);
    const int num_classes = int(manifest.labels.size());

    nlohmann::json params{{"manifest", manifest_path.string()}, {"task", task},   {"k", k},
                          {"depths", depths},                   {"recipe", rf.json()},
                          {"width", mf.width}};
    write_run_config(out, "kfold", params);

    auto data = load_dataset(manifest);
    FoldPlan plan = folds_path.empty() ? stratified_kfold(manifest, k, rf.recipe.seed)
                                       : FoldPlan::load(folds_path);
    plan.save(out / "folds.json");

    nlohmann::json sweep;
    for (int depth : depths) {
        ModelConfig cfg = depth_preset(depth, mf.width, num_classes);
        cfg.head_hidden = mf.head_hidden;
        cfg.head_dropout = mf.head_dropout;
        const fs::path depth_dir = out / ("depth_" + std::to_string(depth));
        fs::create_directories(depth_dir);

        auto summary = run_kfold(data, plan, cfg, rf.recipe);
        for (const auto& fold_outcome : summary.folds) {
            const fs::path fold_dir = depth_dir / ("fold_" + std::to_string(fold_outcome.fold));
            fs::create_directories(fold_dir);
            fold_outcome.history.save_csv(fold_dir / "history.csv");
            fold_outcome.report.save(fold_dir);
        }
        write_text_file(depth_dir / "summary.json", summary.to_json() + "\n");
        sweep["depth_" + std::to_string(depth)] = {{"mean_accuracy", summary.mean_accuracy},
                                                   {"std_accuracy", summary.std_accuracy},
                                                   {"mean_macro_recall", summary.mean_macro_recall},
                                                   {"mean_macro_f1", summary.mean_macro_f1}};
        std::cout << "depth " << depth << ": mean acc " << summary.mean_accuracy << " (std "
                  << summary.std_accuracy << "), mean macro recall "
                  << summary.mean_macro_recall << "\n";
    }
    if (std::find(depths.begin(), depths.end(), 50) == depths.end())
        sweep["note"] = "depth-50 bottleneck sweep not requested";
    write_text_file(out / "sweep_summary.json", sweep.dump(2) + "\n");
    RunGuard{out}.finish();
    return 0;
}

int cmd_eval(const fs::path& checkpoint_path, const fs::path& manifest_path, const fs::path& out,
             const std::string& task, const std::string& folds_path, int fold,
             std::size_t input_size) {
    auto manifest = load_manifest(manifest_path);
    if (task == "binary") manifest = to_binary_view(manifest);
    Model model = load_model(checkpoint_path);
    if (int(manifest.labels.size()) != model.config().num_classes)
        throw DataError("checkpoint has " + std::to_string(model.config().num_classes) +
                        " classes but the manifest task has " +
                        std::to_string(manifest.labels.size()));
    write_run_config(out, "eval",
                     {{"checkpoint", checkpoint_path.string()},
                      {"manifest", manifest_path.string()},
                      {"task", task},
                      {"folds", folds_path},
                      {"fold", fold},
                      {"input_size", input_size}});

    auto data = load_dataset(manifest);
    std::vector<std::size_t> indices;
    if (!folds_path.empty()) {
        indices = fold_indices(data, FoldPlan::load(folds_path), fold, true);
    } else {
        indices.resize(data.size());
        std::iota(indices.begin(), indices.end(), 0);
    }
    auto eval = evaluate(model, data, indices, input_size);
    std::vector<int> truth;
    for (auto i : indices) truth.push_back(data.labels[i]);
    auto report = build_eval_report(data.classes, truth, eval.predicted, eval.scores);
    report.save(out);
    print_report_summary(report);
    RunGuard{out}.finish();
    return 0;
}

int cmd_gradcam(const fs::path& checkpoint_path, const fs::path& image_path,
                const fs::path& manifest_path, const std::string& sample_id,
                std::string target_class, std::string layer, std::size_t input_size,
                const fs::path& out) {
    Model model = load_model(checkpoint_path);
    if (layer.empty()) layer = model.capture_layers().back();

    FusedImage fused;
    std::string name;
    if (!image_path.empty()) {
        fused = read_rgb8_png(image_path);
        name = image_path.stem().string();
    } else {
        auto manifest = load_manifest(manifest_path);
        bool found = false;
        for (const auto& rec : manifest.records) {
            if (rec.sample_id != sample_id) continue;
            auto [af, afd] = read_gray_plane(rec.af_path);
            auto [shg, shgd] = read_gray_plane(rec.shg_path);
            DualModalImage dual;
            dual.af = std::move(af);
            dual.shg = std::move(shg);
            dual.sample_id = rec.sample_id;
            fused = preprocess(dual);
            found = true;
            break;
        }
        if (!found) throw DataError("sample '" + sample_id + "' not in manifest");
        name = sample_id;
    }
    const FusedImage sized = resize(fused, input_size, input_size);
    Tensor x({1, 3, input_size, input_size});
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < input_size * input_size; ++i)
            x[c * input_size * input_size + i] = float(sized.rgb[i * 3 + c]) / 255.0f;

    int target;
    std::vector<std::string> class_names =
        model.config().num_classes == 2 ? binary_labels() : tissue_labels();
    if (std::size_t(model.config().num_classes) != class_names.size())
        class_names.clear();  // non-tissue checkpoints (pretext): numeric targets only
    if (target_class.empty() || target_class == "pred") {
        NoGradGuard guard;
        auto logits = model.forward(x);
        target = argmax_lowest(logits->value.ptr(), std::size_t(model.config().num_classes));
    } else {
        auto it = std::find(class_names.begin(), class_names.end(), target_class);
        target = it != class_names.end() ? int(it - class_names.begin())
                                         : std::stoi(target_class);
    }

    write_run_config(out, "gradcam",
                     {{"checkpoint", checkpoint_path.string()},
                      {"input", name},
                      {"target_class", target},
                      {"layer", layer},
                      {"input_size", input_size}});

    auto map = grad_cam(model, x, target, layer);
    const std::string cls =
        target < int(class_names.size()) ? class_names[std::size_t(target)]
                                         : std::to_string(target);
    write_rgb8_png(out / ("gradcam_" + name + "_" + cls + ".png"), render_overlay(sized, map));
    write_heatmap_csv(out / ("heatmap_" + name + "_" + cls + ".csv"), map);
    std::cout << "wrote " << (out / ("gradcam_" + name + "_" + cls + ".png")).string() << "\n";
    RunGuard{out}.finish();
    return 0;
}

RocCurve parse_roc_csv(const fs::path& path) {
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);  // header
    RocCurve curve;
    while (std::getline(in, line)) {
        std::istringstream row(line);
        std::string t, f, tp;
        std::getline(row, t, ',');
        std::getline(row, f, ',');
        std::getline(row, tp, ',');
        curve.fpr.push_back(std::stod(f));
        curve.tpr.push_back(std::stod(tp));
        curve.thresholds.push_back(t == "inf" ? INFINITY : t == "-inf" ? -INFINITY : std::stod(t));
    }
    return curve;
}

PrCurve parse_pr_csv(const fs::path& path) {
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    PrCurve curve;
    while (std::getline(in, line)) {
        std::istringstream row(line);
        std::string t, r, p;
        std::getline(row, t, ',');
        std::getline(row, r, ',');
        std::getline(row, p, ',');
        curve.thresholds.push_back(t == "inf" ? INFINITY : t == "-inf" ? -INFINITY : std::stod(t));
        curve.recall.push_back(std::stod(r));
        curve.precision.push_back(std::stod(p));
    }
    return curve;
}

TrainHistory parse_history_csv(const fs::path& path) {
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    TrainHistory h;
    while (std::getline(in, line)) {
        std::istringstream row(line);
        std::string e, tl, ta, vl, va;
        std::getline(row, e, ',');
        std::getline(row, tl, ',');
        std::getline(row, ta, ',');
        std::getline(row, vl, ',');
        std::getline(row, va, ',');
        h.train_loss.push_back(std::stod(tl));
        h.train_acc.push_back(std::stod(ta));
        h.val_loss.push_back(std::stod(vl));
        h.val_acc.push_back(std::stod(va));
    }
    return h;
}

/// Renders SVGs from artifacts already on disk (report.json, curve CSVs,
/// history.csv, summary.json), mirroring the run directory layout.
int cmd_report(const fs::path& run_dir, const fs::path& out) {
    if (!fs::exists(run_dir)) throw DataError("run directory " + run_dir.string() + " not found");
    write_run_config(out, "report", {{"run", run_dir.string()}});
    int rendered = 0;
    for (auto it = fs::recursive_directory_iterator(run_dir);
         it != fs::recursive_directory_iterator(); ++it) {
        if (!it->is_regular_file()) continue;
        const fs::path rel = fs::relative(it->path(), run_dir);
        const fs::path dst_dir = (out / rel).parent_path();
        const std::string fname = it->path().filename().string();

        if (fname == "report.json") {
            std::ifstream in(it->path());
            nlohmann::json j = nlohmann::json::parse(in);
            const auto classes = j.at("classes").get<std::vector<std::string>>();
            ConfusionMatrix cm(classes.size());
            const auto rows = j.at("confusion").get<std::vector<std::vector<std::int64_t>>>();
            for (std::size_t t = 0; t < cm.k; ++t)
                for (std::size_t p = 0; p < cm.k; ++p) cm.at(t, p) = rows[t][p];
            fs::create_directories(dst_dir);
            write_text_file(dst_dir / "confusion.svg",
                            svg_confusion(cm, classes, "Confusion matrix"));
            ++rendered;

            // per-class metric bars (precision / recall / f1)
            std::vector<std::string> labels;
            std::vector<double> values;
            for (const auto& cls : classes) {
                const auto& pc = j.at("per_class").at(cls);
                labels.push_back(cls + " P");
                values.push_back(pc.at("precision").get<double>());
                labels.push_back(cls + " R");
                values.push_back(pc.at("recall").get<double>());
                labels.push_back(cls + " F1");
                values.push_back(pc.at("f1").get<double>());
            }
            write_text_file(dst_dir / "per_class_metrics.svg",
                            svg_bars(labels, values, "Per-class metrics"));
            ++rendered;
        } else if (fname.rfind("roc_", 0) == 0 && it->path().extension() == ".csv") {
            auto curve = parse_roc_csv(it->path());
            const std::string cls = fname.substr(4, fname.size() - 8);
            fs::create_directories(dst_dir);
            write_text_file(dst_dir / ("roc_" + cls + ".svg"),
                            svg_roc({{cls, &curve}}, "ROC: " + cls));
            ++rendered;
        } else if (fname.rfind("pr_", 0) == 0 && it->path().extension() == ".csv") {
            auto curve = parse_pr_csv(it->path());
            const std::string cls = fname.substr(3, fname.size() - 7);
            fs::create_directories(dst_dir);
            write_text_file(dst_dir / ("pr_" + cls + ".svg"),
                            svg_pr({{cls, &curve}}, "Precision-Recall: " + cls));
            ++rendered;
        } else if (fname == "history.csv") {
            auto history = parse_history_csv(it->path());
            fs::create_directories(dst_dir);
            write_text_file(dst_dir / "history.svg", svg_history(history, "Training history"));
            ++rendered;
        } else if (fname == "summary.json") {
            std::ifstream in(it->path());
            nlohmann::json j = nlohmann::json::parse(in);
            if (!j.contains("folds")) continue;
            std::vector<std::string> labels;
            std::vector<double> values;
            for (const auto& f : j.at("folds")) {
                labels.push_back("fold " + std::to_string(f.at("fold").get<int>()));
                values.push_back(f.at("accuracy").get<double>());
            }
            fs::create_directories(dst_dir);
            write_text_file(dst_dir / "fold_accuracy.svg",
                            svg_bars(labels, values, "Per-fold validation accuracy"));
            ++rendered;
        }
    }
    std::cout << "rendered " << rendered << " plots into " << out.string() << "\n";
    RunGuard{out}.finish();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"duomic: dual-modality microscopy classification pipeline"};
    app.require_subcommand(1);
    const fs::path out_root = default_out_root();

    // synth
    auto* synth = app.add_subcommand("synth", "Generate the synthetic dual-modality dataset");
    fs::path synth_out = out_root / "synth";
    std::vector<int> synth_counts;
    std::size_t synth_size = 64;
    double synth_noise = 0.04;
    std::uint64_t synth_seed = 0;
    int synth_per_patient = 8;
    synth->add_option("--out", synth_out, "Output directory");
    synth->add_option("--counts", synth_counts, "Class counts: cancer,fibrosis,normal")
        ->delimiter(',');
    synth->add_option("--size", synth_size, "Plane size in pixels");
    synth->add_option("--noise", synth_noise, "Additive Gaussian noise level");
    synth->add_option("--seed", synth_seed, "Generator seed");
    synth->add_option("--images-per-patient", synth_per_patient, "Images per synthetic patient");

    // preprocess
    auto* pre = app.add_subcommand("preprocess", "Normalize and fuse a manifest");
    fs::path pre_manifest, pre_out = out_root / "preprocess";
    pre->add_option("--manifest", pre_manifest, "Manifest CSV")->required();
    pre->add_option("--out", pre_out, "Output directory");

    // split
    auto* split = app.add_subcommand("split", "Write a stratified k-fold plan");
    fs::path split_manifest, split_out = out_root / "split";
    int split_k = 5;
    std::uint64_t split_seed = 0;
    bool split_group = false;
    split->add_option("--manifest", split_manifest, "Manifest CSV")->required();
    split->add_option("--k", split_k, "Fold count");
    split->add_option("--seed", split_seed, "Shuffle seed");
    split->add_flag("--group-by-patient", split_group, "Keep each patient in one fold");
    split->add_option("--out", split_out, "Output directory");

    // pretrain
    auto* pretrain = app.add_subcommand("pretrain", "Train the pretext backbone");
    fs::path pretrain_out = out_root / "pretrain", pretrain_data;
    int pretrain_per_class = 200;
    std::size_t pretrain_size = 64;
    RecipeFlags pretrain_recipe;
    pretrain_recipe.recipe.epochs = 12;
    ModelFlags pretrain_model;
    pretrain->add_option("--out", pretrain_out, "Output directory");
    pretrain->add_option("--per-class", pretrain_per_class, "Images per texture family");
    pretrain->add_option("--size", pretrain_size, "Texture image size");
    pretrain->add_option("--data", pretrain_data, "Reuse an existing pretext manifest");
    pretrain_recipe.attach(pretrain);
    pretrain_model.attach(pretrain);

    // train
    auto* train_cmd = app.add_subcommand("train", "Train a classifier on one split");
    fs::path train_manifest, train_out = out_root / "train", train_backbone;
    std::string train_task = "multiclass", train_folds, train_freeze = "full";
    int train_fold = 0;
    double train_holdout = 0.2;
    RecipeFlags train_recipe;
    ModelFlags train_model;
    train_cmd->add_option("--manifest", train_manifest, "Manifest CSV")->required();
    train_cmd->add_option("--out", train_out, "Output directory");
    train_cmd->add_option("--task", train_task, "multiclass or binary")
        ->check(CLI::IsMember({"multiclass", "binary"}));
    train_cmd->add_option("--folds", train_folds, "Fold plan JSON (else stratified holdout)");
    train_cmd->add_option("--fold", train_fold, "Validation fold index");
    train_cmd->add_option("--holdout", train_holdout, "Holdout fraction when no fold plan");
    train_cmd->add_option("--init-backbone", train_backbone, "Checkpoint for backbone init");
    train_cmd->add_option("--freeze", train_freeze, "full or frozen_backbone")
        ->check(CLI::IsMember({"full", "frozen_backbone"}));
    train_recipe.attach(train_cmd);
    train_model.attach(train_cmd);

    // kfold
    auto* kfold_cmd = app.add_subcommand("kfold", "Cross-validated depth sweep");
    fs::path kfold_manifest, kfold_out = out_root / "kfold";
    std::string kfold_task = "multiclass", kfold_folds;
    int kfold_k = 5;
    std::vector<int> kfold_depths{18, 34};
    RecipeFlags kfold_recipe;
    ModelFlags kfold_model;
    kfold_cmd->add_option("--manifest", kfold_manifest, "Manifest CSV")->required();
    kfold_cmd->add_option("--out", kfold_out, "Output directory");
    kfold_cmd->add_option("--task", kfold_task, "multiclass or binary")
        ->check(CLI::IsMember({"multiclass", "binary"}));
    kfold_cmd->add_option("--k", kfold_k, "Fold count");
    kfold_cmd->add_option("--folds", kfold_folds, "Existing fold plan JSON");
    kfold_cmd->add_option("--depths", kfold_depths, "Depth presets to sweep (18 34 50)")
        ->delimiter(',');
    kfold_recipe.attach(kfold_cmd);
    kfold_model.attach(kfold_cmd);

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a manifest");
    fs::path eval_ck, eval_manifest, eval_out = out_root / "eval";
    std::string eval_task = "multiclass", eval_folds;
    int eval_fold = 0;
    std::size_t eval_input = 64;
    eval_cmd->add_option("--checkpoint", eval_ck, "Checkpoint file")->required();
    eval_cmd->add_option("--manifest", eval_manifest, "Manifest CSV")->required();
    eval_cmd->add_option("--out", eval_out, "Output directory");
    eval_cmd->add_option("--task", eval_task, "multiclass or binary")
        ->check(CLI::IsMember({"multiclass", "binary"}));
    eval_cmd->add_option("--folds", eval_folds, "Restrict to one fold of a plan");
    eval_cmd->add_option("--fold", eval_fold, "Fold index");
    eval_cmd->add_option("--input-size", eval_input, "Model input resolution");

    // gradcam
    auto* cam = app.add_subcommand("gradcam", "Class-activation heatmap for one image");
    fs::path cam_ck, cam_image, cam_manifest, cam_out = out_root / "gradcam";
    std::string cam_sample, cam_class, cam_layer;
    std::size_t cam_input = 64;
    cam->add_option("--checkpoint", cam_ck, "Checkpoint file")->required();
    cam->add_option("--image", cam_image, "Fused RGB PNG input");
    cam->add_option("--manifest", cam_manifest, "Manifest to draw --sample from");
    cam->add_option("--sample", cam_sample, "sample_id within --manifest");
    cam->add_option("--class", cam_class, "Target class name/index (default: prediction)");
    cam->add_option("--layer", cam_layer, "Capture layer (default: deepest stage)");
    cam->add_option("--input-size", cam_input, "Model input resolution");
    cam->add_option("--out", cam_out, "Output directory");

    // report
    auto* report = app.add_subcommand("report", "Render SVG plots from stored run artifacts");
    fs::path report_run, report_out = out_root / "report";
    report->add_option("--run", report_run, "Run directory to render")->required();
    report->add_option("--out", report_out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*synth)
            return cmd_synth(synth_out, synth_counts, synth_size, synth_noise, synth_seed,
                             synth_per_patient);
        if (*pre) return cmd_preprocess(pre_manifest, pre_out);
        if (*split) return cmd_split(split_manifest, split_out, split_k, split_seed, split_group);
        if (*pretrain)
            return cmd_pretrain(pretrain_out, pretrain_per_class, pretrain_size, pretrain_recipe,
                                pretrain_model, pretrain_data);
        if (*train_cmd)
            return cmd_train(train_manifest, train_out, train_task, train_folds, train_fold,
                             train_holdout, train_backbone, train_freeze, train_recipe,
                             train_model);
        if (*kfold_cmd)
            return cmd_kfold(kfold_manifest, kfold_out, kfold_task, kfold_k, kfold_folds,
                             kfold_depths, kfold_recipe, kfold_model);
        if (*eval_cmd)
            return cmd_eval(eval_ck, eval_manifest, eval_out, eval_task, eval_folds, eval_fold,
                            eval_input);
        if (*cam)
            return cmd_gradcam(cam_ck, cam_image, cam_manifest, cam_sample, cam_class, cam_layer,
                               cam_input, cam_out);
        if (*report) return cmd_report(report_run, report_out);
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 4;
    } catch (const ValueError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const FormatError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const DimensionError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
