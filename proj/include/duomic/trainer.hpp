#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "duomic/dataset.hpp"
#include "duomic/imaging.hpp"
#include "duomic/metrics.hpp"
#include "duomic/model.hpp"

namespace duomic {

/// Training recipe: conservative rate, decoupled decay, smoothing + mixup,
/// clipping, small batches.
struct TrainRecipe {
    double lr = 1e-4;
    double weight_decay = 0.01;
    int batch_size = 16;
    int epochs = 60;
    double label_smoothing = 0.1;
    double mixup_alpha = 0.2;
    double clip_norm = 1.0;
    FreezeMode freeze = FreezeMode::full;
    std::uint64_t seed = 0;
    bool augment = true;
    std::size_t input_size = 64;

    void validate() const {
        if (batch_size < 2) throw ValueError("recipe: batch_size must be >= 2");
        if (epochs < 1) throw ValueError("recipe: epochs must be >= 1");
        if (lr <= 0.0) throw ValueError("recipe: lr must be > 0");
        if (weight_decay < 0.0) throw ValueError("recipe: weight_decay must be >= 0");
        if (clip_norm <= 0.0) throw ValueError("recipe: clip_norm must be > 0");
        if (label_smoothing < 0.0 || label_smoothing >= 1.0)
            throw ValueError("recipe: label_smoothing must be in [0,1)");
        if (mixup_alpha < 0.0) throw ValueError("recipe: mixup_alpha must be >= 0");
        if (input_size < 8) throw ValueError("recipe: input_size must be >= 8");
    }
};

struct TrainHistory {
    std::vector<double> train_loss, train_acc, val_loss, val_acc;

    std::string to_csv() const;  // epoch,train_loss,train_acc,val_loss,val_acc
    void save_csv(const std::filesystem::path& path) const;
};

/// Preprocessed fused images held in memory for training/evaluation.
struct LoadedDataset {
    std::vector<std::string> classes;
    std::vector<std::string> sample_ids;
    std::vector<std::string> patient_ids;
    std::vector<FusedImage> images;
    std::vector<int> labels;

    std::size_t size() const { return images.size(); }
    std::vector<std::size_t> counts() const {
        std::vector<std::size_t> n(classes.size(), 0);
        for (int l : labels) n[std::size_t(l)]++;
        return n;
    }
};

/// Reads every sample's planes, normalizes and fuses them.
LoadedDataset load_dataset(const DatasetManifest& manifest);

/// Convex combination of a batch with a seeded permutation of itself.
/// images [N,C,H,W], targets [N,K]; both mixed with the same lambda.
void mixup_apply(Tensor& images, Tensor& targets, double lambda,
                 const std::vector<std::size_t>& perm);

/// Samples lambda ~ Beta(alpha, alpha) and the pairing permutation from the
/// seed, then applies the mix. Returns the lambda used.
double mixup_batch(Tensor& images, Tensor& targets, double alpha, std::uint64_t seed);

/// Argmax with ties broken toward the lowest class index.
int argmax_lowest(const float* row, std::size_t k);

struct EvalResult {
    std::vector<std::vector<double>> scores;  // softmax rows, one per sample
    std::vector<int> predicted;               // argmax, ties -> lowest class index
};

EvalResult evaluate(Model& model, const LoadedDataset& data,
                    const std::vector<std::size_t>& indices, std::size_t input_size,
                    int batch_size = 32);

struct TrainResult {
    TrainHistory history;
    int best_epoch = -1;               // epoch restored into the model (0-based)
    double best_val_acc = 0.0;
    double max_post_clip_norm = 0.0;   // largest post-clip gradient norm seen
};

/// The full recipe: augment -> mixup -> forward -> weighted smoothed CE ->
/// backward -> clip -> optimizer step; epoch-level validation; the best
/// validation-accuracy state is restored into the model at the end.
TrainResult train(Model& model, const LoadedDataset& data,
                  const std::vector<std::size_t>& train_idx,
                  const std::vector<std::size_t>& val_idx, const TrainRecipe& recipe,
                  const std::vector<double>& class_weights);

struct FoldOutcome {
    int fold = 0;
    EvalReport report;
    TrainHistory history;
};

struct KFoldSummary {
    std::vector<FoldOutcome> folds;
    double mean_accuracy = 0, std_accuracy = 0;
    double mean_macro_recall = 0, mean_macro_f1 = 0;

    std::string to_json() const;
};

/// Trains one model per fold (train on the rest, validate on the fold) and
/// aggregates the reports.
KFoldSummary run_kfold(const LoadedDataset& data, const FoldPlan& plan, const ModelConfig& config,
                       const TrainRecipe& recipe);

/// Index split helpers.
std::vector<std::size_t> fold_indices(const LoadedDataset& data, const FoldPlan& plan, int fold,
                                      bool in_fold);

/// Converts fused images (resized to `size`) into a [N,3,size,size] batch,
/// intensities scaled to [0,1].
Tensor batch_to_tensor(const LoadedDataset& data, const std::vector<std::size_t>& indices,
                       std::size_t size);

}  // namespace duomic
