#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "duomic/errors.hpp"

namespace duomic {

/// Canonical 3-class tissue label order (alphabetical, index = class id).
inline const std::vector<std::string>& tissue_labels() {
    static const std::vector<std::string> labels{"cancer", "fibrosis", "normal"};
    return labels;
}

/// Binary view label order.
inline const std::vector<std::string>& binary_labels() {
    static const std::vector<std::string> labels{"cancer", "non_cancer"};
    return labels;
}

struct SampleRecord {
    std::string sample_id;
    std::string patient_id;
    std::filesystem::path af_path;
    std::filesystem::path shg_path;
    int label = 0;  // index into the manifest's label space
};

struct DatasetManifest {
    std::vector<std::string> labels;
    std::vector<SampleRecord> records;

    std::vector<std::size_t> counts() const {
        std::vector<std::size_t> n(labels.size(), 0);
        for (const auto& r : records) n[static_cast<std::size_t>(r.label)]++;
        return n;
    }
    std::size_t size() const { return records.size(); }
    const std::string& label_name(int idx) const { return labels[static_cast<std::size_t>(idx)]; }
};

/// k-fold assignment: sample_id -> fold index in [0, k).
struct FoldPlan {
    std::uint64_t seed = 0;
    int k = 0;
    bool group_by_patient = false;
    std::map<std::string, int> assignments;

    int fold_of(const std::string& sample_id) const {
        auto it = assignments.find(sample_id);
        if (it == assignments.end()) throw DataError("fold plan has no sample '" + sample_id + "'");
        return it->second;
    }
    std::string to_json() const;
    static FoldPlan from_json(const std::string& text);
    void save(const std::filesystem::path& path) const;
    static FoldPlan load(const std::filesystem::path& path);
};

/// Parses and validates the manifest CSV
/// (header: sample_id,patient_id,af_path,shg_path,label).
/// label_space defaults to the tissue classes; pass a custom list for
/// auxiliary datasets. Relative image paths resolve against the CSV's
/// directory. check_paths verifies the referenced planes exist.
DatasetManifest load_manifest(const std::filesystem::path& path,
                              const std::vector<std::string>& label_space = tissue_labels(),
                              bool check_paths = true);

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Inverse-frequency class weights, anchored so the most frequent class gets
/// weight 1.0: w_c = n_max / n_c.
std::vector<double> compute_class_weights(const std::vector<std::size_t>& counts);

/// Stratified k-fold split: per class, fold counts are floor/ceil of n_c/k.
/// In group mode no patient spans two folds (stratification becomes
/// best-effort).
FoldPlan stratified_kfold(const DatasetManifest& manifest, int k, std::uint64_t seed,
                          bool group_by_patient = false);

/// Collapses normal+fibrosis into non_cancer.
DatasetManifest to_binary_view(const DatasetManifest& manifest);

}  // namespace duomic
