#include "duomic/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "duomic/nn_ops.hpp"
#include "duomic/optim.hpp"
#include "duomic/png_io.hpp"
#include "duomic/rng.hpp"

namespace duomic {

namespace {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

void fill_image(Tensor& batch, std::size_t slot, const FusedImage& img) {
    const std::size_t hw = img.h * img.w;
    float* base = batch.ptr() + slot * 3 * hw;
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < hw; ++i)
            base[c * hw + i] = float(img.rgb[i * 3 + c]) / 255.0f;
}

}  // namespace

int argmax_lowest(const float* row, std::size_t k) {
    int best = 0;
    for (std::size_t j = 1; j < k; ++j)
        if (row[j] > row[std::size_t(best)]) best = int(j);
    return best;
}

std::string TrainHistory::to_csv() const {
    std::string out = "epoch,train_loss,train_acc,val_loss,val_acc\n";
    for (std::size_t e = 0; e < train_loss.size(); ++e) {
        out += std::to_string(e + 1) + ',' + format_double(train_loss[e]) + ',' +
               format_double(train_acc[e]) + ',' + format_double(val_loss[e]) + ',' +
               format_double(val_acc[e]) + '\n';
    }
    return out;
}

void TrainHistory::save_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write history " + path.string());
    out << to_csv();
}

LoadedDataset load_dataset(const DatasetManifest& manifest) {
    LoadedDataset data;
    data.classes = manifest.labels;
    data.images.reserve(manifest.size());
    for (const auto& rec : manifest.records) {
        auto [af, af_depth] = read_gray_plane(rec.af_path);
        auto [shg, shg_depth] = read_gray_plane(rec.shg_path);
        DualModalImage dual;
        dual.af = std::move(af);
        dual.shg = std::move(shg);
        dual.sample_id = rec.sample_id;
        dual.source_bit_depth = std::max(af_depth, shg_depth);
        data.images.push_back(preprocess(dual));
        data.labels.push_back(rec.label);
        data.sample_ids.push_back(rec.sample_id);
        data.patient_ids.push_back(rec.patient_id);
    }
    return data;
}

void mixup_apply(Tensor& images, Tensor& targets, double lambda,
                 const std::vector<std::size_t>& perm) {
    const std::size_t n = images.dim(0);
    if (n < 2) throw ValueError("mixup: batch must have >= 2 samples");
    if (targets.dim(0) != n) throw DimensionError("mixup: images/targets batch mismatch");
    if (perm.size() != n) throw DimensionError("mixup: permutation size mismatch");
    if (lambda == 1.0) return;
    const std::size_t img_stride = images.size() / n;
    const std::size_t tgt_stride = targets.size() / n;
    const Tensor img_src = images;
    const Tensor tgt_src = targets;
    const float lam = float(lambda);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = perm[i];
        float* xi = images.ptr() + i * img_stride;
        const float* xa = img_src.ptr() + i * img_stride;
        const float* xb = img_src.ptr() + j * img_stride;
        for (std::size_t t = 0; t < img_stride; ++t)
            xi[t] = lam * xa[t] + (1.0f - lam) * xb[t];
        float* yi = targets.ptr() + i * tgt_stride;
        const float* ya = tgt_src.ptr() + i * tgt_stride;
        const float* yb = tgt_src.ptr() + j * tgt_stride;
        for (std::size_t t = 0; t < tgt_stride; ++t)
            yi[t] = lam * ya[t] + (1.0f - lam) * yb[t];
    }
}

double mixup_batch(Tensor& images, Tensor& targets, double alpha, std::uint64_t seed) {
    if (alpha <= 0.0) throw ValueError("mixup: alpha must be > 0");
    Rng rng(seed);
    const double lambda = rng.beta(alpha, alpha);
    std::vector<std::size_t> perm(images.dim(0));
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    mixup_apply(images, targets, lambda, perm);
    return lambda;
}

Tensor batch_to_tensor(const LoadedDataset& data, const std::vector<std::size_t>& indices,
                       std::size_t size) {
    Tensor batch({indices.size(), 3, size, size});
    for (std::size_t i = 0; i < indices.size(); ++i)
        fill_image(batch, i, resize(data.images[indices[i]], size, size));
    return batch;
}

EvalResult evaluate(Model& model, const LoadedDataset& data,
                    const std::vector<std::size_t>& indices, std::size_t input_size,
                    int batch_size) {
    EvalResult result;
    result.scores.reserve(indices.size());
    NoGradGuard guard;
    const std::size_t k = std::size_t(model.config().num_classes);
    for (std::size_t start = 0; start < indices.size(); start += std::size_t(batch_size)) {
        const std::size_t end = std::min(indices.size(), start + std::size_t(batch_size));
        std::vector<std::size_t> chunk(indices.begin() + long(start), indices.begin() + long(end));
        Tensor x = batch_to_tensor(data, chunk, input_size);
        typename Model::ForwardOptions opts;
        opts.mode = RunMode::eval;
        auto logits = model.forward(x, opts);
        auto probs = softmax_rows(logits->value);
        for (std::size_t i = 0; i < chunk.size(); ++i) {
            std::vector<double> row(k);
            for (std::size_t j = 0; j < k; ++j) row[j] = double(probs.at2(i, j));
            result.predicted.push_back(argmax_lowest(probs.ptr() + i * k, k));
            result.scores.push_back(std::move(row));
        }
    }
    return result;
}

TrainResult train(Model& model, const LoadedDataset& data,
                  const std::vector<std::size_t>& train_idx,
                  const std::vector<std::size_t>& val_idx, const TrainRecipe& recipe,
                  const std::vector<double>& class_weights) {
    recipe.validate();
    if (train_idx.empty()) throw ValueError("train: empty training fold");
    if (val_idx.empty()) throw ValueError("train: empty validation fold");
    const std::size_t k = std::size_t(model.config().num_classes);
    if (class_weights.size() != k)
        throw ValueError("train: class_weights must cover all " + std::to_string(k) + " classes");
    for (std::size_t idx : train_idx)
        if (std::size_t(data.labels[idx]) >= k)
            throw ValueError("train: label out of range for sample " + data.sample_ids[idx]);

    model.set_freeze(recipe.freeze);
    AdamW optimizer({recipe.lr, recipe.weight_decay, 0.9, 0.999, 1e-8});
    Tensor weight_tensor({k});
    for (std::size_t j = 0; j < k; ++j) weight_tensor[j] = float(class_weights[j]);

    // resize once; augmentation rotates the resized copies
    std::vector<FusedImage> resized(data.size());
    std::vector<bool> ready(data.size(), false);
    auto resized_image = [&](std::size_t idx) -> const FusedImage& {
        if (!ready[idx]) {
            resized[idx] = resize(data.images[idx], recipe.input_size, recipe.input_size);
            ready[idx] = true;
        }
        return resized[idx];
    };

    TrainResult result;
    std::vector<Tensor> best_state;
    std::size_t global_step = 0;
    double last_loss = 0, last_norm = 0;

    for (int epoch = 0; epoch < recipe.epochs; ++epoch) {
        std::vector<std::size_t> order = train_idx;
        Rng shuffle_rng(mix_seed(recipe.seed, {0xe90c, std::uint64_t(epoch)}));
        shuffle_rng.shuffle(order);

        // batches of batch_size; a trailing single sample joins the previous
        // batch since train-mode batchnorm needs >= 2
        std::vector<std::vector<std::size_t>> batches;
        for (std::size_t start = 0; start < order.size(); start += std::size_t(recipe.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + std::size_t(recipe.batch_size));
            batches.emplace_back(order.begin() + long(start), order.begin() + long(end));
        }
        if (batches.size() > 1 && batches.back().size() == 1) {
            batches[batches.size() - 2].push_back(batches.back()[0]);
            batches.pop_back();
        }
        if (batches.size() == 1 && batches[0].size() == 1)
            throw ValueError("train: need at least 2 training samples");

        double epoch_loss = 0;
        std::size_t correct = 0;
        for (std::size_t step = 0; step < batches.size(); ++step, ++global_step) {
            const auto& batch = batches[step];
            const std::size_t b = batch.size();
            Tensor x({b, 3, recipe.input_size, recipe.input_size});
            Tensor y({b, k}, 0.0f);
            for (std::size_t i = 0; i < b; ++i) {
                const FusedImage& base = resized_image(batch[i]);
                if (recipe.augment) {
                    AugmentParams ap;
                    ap.seed = mix_seed(recipe.seed, {0xa06u, std::uint64_t(epoch), batch[i]});
                    fill_image(x, i, augment(base, ap));
                } else {
                    fill_image(x, i, base);
                }
                y.at2(i, std::size_t(data.labels[batch[i]])) = 1.0f;
            }
            if (recipe.mixup_alpha > 0.0 && b >= 2)
                mixup_batch(x, y, recipe.mixup_alpha,
                            mix_seed(recipe.seed, {0x317u, std::uint64_t(epoch), step}));

            try {
                typename Model::ForwardOptions opts;
                opts.mode = RunMode::train;
                opts.dropout_seed = mix_seed(recipe.seed, {0xd0u, std::uint64_t(epoch), step});
                auto logits = model.forward(x, opts);
                auto loss =
                    weighted_smoothed_ce<float>(logits, y, weight_tensor, recipe.label_smoothing);
                last_loss = double(loss->value[0]);
                if (!std::isfinite(last_loss))
                    throw NumericError("loss is not finite");

                model.params().zero_grads();
                backward(loss);
                clip_global_norm(model.params(), recipe.clip_norm);
                last_norm = grad_global_norm(model.params());
                result.max_post_clip_norm = std::max(result.max_post_clip_norm, last_norm);
                optimizer.step(model.params());

                epoch_loss += last_loss * double(b);
                for (std::size_t i = 0; i < b; ++i) {
                    const int pred = argmax_lowest(logits->value.ptr() + i * k, k);
                    const int want = argmax_lowest(y.ptr() + i * k, k);
                    correct += pred == want;
                }
            } catch (const NumericError& e) {
                throw NumericError("training aborted at step " + std::to_string(global_step) +
                                   " (epoch " + std::to_string(epoch + 1) + "): " + e.what() +
                                   "; last loss " + format_double(last_loss) +
                                   ", last grad norm " + format_double(last_norm));
            }
        }

        result.history.train_loss.push_back(epoch_loss / double(order.size()));
        result.history.train_acc.push_back(double(correct) / double(order.size()));

        auto val = evaluate(model, data, val_idx, recipe.input_size,
                            std::max(recipe.batch_size, 16));
        double vloss = 0;
        std::size_t vcorrect = 0;
        for (std::size_t i = 0; i < val_idx.size(); ++i) {
            const int truth = data.labels[val_idx[i]];
            vloss += -std::log(std::max(1e-12, val.scores[i][std::size_t(truth)]));
            vcorrect += val.predicted[i] == truth;
        }
        const double vacc = double(vcorrect) / double(val_idx.size());
        result.history.val_loss.push_back(vloss / double(val_idx.size()));
        result.history.val_acc.push_back(vacc);

        if (result.best_epoch < 0 || vacc > result.best_val_acc) {
            result.best_epoch = epoch;
            result.best_val_acc = vacc;
            best_state.clear();
            for (const auto& e : model.params().entries()) best_state.push_back(e.node->value);
        }
    }

    // restore the best-validation snapshot
    std::size_t slot = 0;
    for (auto& e : model.params().entries()) e.node->value = best_state[slot++];
    return result;
}

std::vector<std::size_t> fold_indices(const LoadedDataset& data, const FoldPlan& plan, int fold,
                                      bool in_fold) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const int f = plan.fold_of(data.sample_ids[i]);
        if ((f == fold) == in_fold) out.push_back(i);
    }
    return out;
}

KFoldSummary run_kfold(const LoadedDataset& data, const FoldPlan& plan, const ModelConfig& config,
                       const TrainRecipe& recipe) {
    KFoldSummary summary;
    std::vector<double> accuracies;
    for (int fold = 0; fold < plan.k; ++fold) {
        auto train_idx = fold_indices(data, plan, fold, false);
        auto val_idx = fold_indices(data, plan, fold, true);

        std::vector<std::size_t> train_counts(data.classes.size(), 0);
        for (std::size_t idx : train_idx) train_counts[std::size_t(data.labels[idx])]++;
        const auto weights = compute_class_weights(train_counts);

        Model model(config, mix_seed(recipe.seed, {0xf01d, std::uint64_t(fold)}));
        FoldOutcome outcome;
        outcome.fold = fold;
        TrainRecipe fold_recipe = recipe;
        fold_recipe.seed = mix_seed(recipe.seed, {0x5eedu, std::uint64_t(fold)});
        outcome.history = train(model, data, train_idx, val_idx, fold_recipe, weights).history;

        auto eval = evaluate(model, data, val_idx, recipe.input_size);
        std::vector<int> truth;
        for (std::size_t idx : val_idx) truth.push_back(data.labels[idx]);
        outcome.report = build_eval_report(data.classes, truth, eval.predicted, eval.scores);
        accuracies.push_back(outcome.report.metrics.accuracy);
        summary.mean_macro_recall += outcome.report.metrics.macro_recall;
        summary.mean_macro_f1 += outcome.report.metrics.macro_f1;
        summary.folds.push_back(std::move(outcome));
    }
    const double n = double(summary.folds.size());
    summary.mean_macro_recall /= n;
    summary.mean_macro_f1 /= n;
    for (double a : accuracies) summary.mean_accuracy += a;
    summary.mean_accuracy /= n;
    double var = 0;
    for (double a : accuracies) var += (a - summary.mean_accuracy) * (a - summary.mean_accuracy);
    summary.std_accuracy = std::sqrt(var / n);
    return summary;
}

std::string KFoldSummary::to_json() const {
    nlohmann::json j;
    nlohmann::json folds_json = nlohmann::json::array();
    for (const auto& f : folds) {
        nlohmann::json fj;
        fj["fold"] = f.fold;
        fj["accuracy"] = f.report.metrics.accuracy;
        fj["macro_precision"] = f.report.metrics.macro_precision;
        fj["macro_recall"] = f.report.metrics.macro_recall;
        fj["macro_f1"] = f.report.metrics.macro_f1;
        for (std::size_t c = 0; c < f.report.classes.size(); ++c)
            if (f.report.curves.roc[c])
                fj["roc_auc"][f.report.classes[c]] = f.report.curves.roc[c]->auc;
        folds_json.push_back(fj);
    }
    j["folds"] = folds_json;
    j["mean_accuracy"] = mean_accuracy;
    j["std_accuracy"] = std_accuracy;
    j["mean_macro_recall"] = mean_macro_recall;
    j["mean_macro_f1"] = mean_macro_f1;
    return j.dump(2);
}

}  // namespace duomic
