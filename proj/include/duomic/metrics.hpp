#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "duomic/errors.hpp"

namespace duomic {

/// K x K counts, rows = true class, columns = predicted class.
struct ConfusionMatrix {
    std::size_t k = 0;
    std::vector<std::int64_t> counts;

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::size_t k_) : k(k_), counts(k_ * k_, 0) {}

    std::int64_t& at(std::size_t truth, std::size_t pred) { return counts[truth * k + pred]; }
    std::int64_t at(std::size_t truth, std::size_t pred) const { return counts[truth * k + pred]; }
    std::int64_t total() const {
        std::int64_t t = 0;
        for (auto c : counts) t += c;
        return t;
    }
    std::int64_t trace() const {
        std::int64_t t = 0;
        for (std::size_t i = 0; i < k; ++i) t += at(i, i);
        return t;
    }
};

ConfusionMatrix confusion_matrix(const std::vector<int>& truth, const std::vector<int>& predicted,
                                 std::size_t k);

struct PerClassMetrics {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    bool precision_defined = true;  // false when TP+FP == 0 (value reported as 0)
    bool recall_defined = true;     // false when TP+FN == 0
};

struct ClassificationMetrics {
    std::vector<PerClassMetrics> per_class;
    double macro_precision = 0;
    double macro_recall = 0;
    double macro_f1 = 0;
    double accuracy = 0;
};

ClassificationMetrics classification_metrics(const ConfusionMatrix& cm);

/// ROC curve points, sorted by threshold descending; includes the (0,0) and
/// (1,1) anchors. AUC by trapezoidal integration (ties grouped, which makes
/// it equal to the Mann-Whitney statistic).
struct RocCurve {
    std::vector<double> thresholds;  // anchors carry +/-inf
    std::vector<double> fpr;
    std::vector<double> tpr;
    double auc = 0;
};

RocCurve roc_curve(const std::vector<double>& scores, const std::vector<int>& labels);

/// Precision/recall at each distinct threshold, descending sweep;
/// AP = sum (R_i - R_{i-1}) * P_i.
struct PrCurve {
    std::vector<double> thresholds;
    std::vector<double> recall;
    std::vector<double> precision;
    double average_precision = 0;
};

PrCurve pr_curve(const std::vector<double>& scores, const std::vector<int>& labels);

/// Per-class one-vs-rest curves. A class absent from the labels gets nullopt
/// for its curves; the rest are computed normally.
struct OneVsRestReport {
    std::vector<std::optional<RocCurve>> roc;
    std::vector<std::optional<PrCurve>> pr;
};

OneVsRestReport one_vs_rest_report(const std::vector<std::vector<double>>& scores,
                                   const std::vector<int>& labels, std::size_t k);

/// Full per-evaluation bundle behind the JSON/CSV artifacts.
struct EvalReport {
    std::vector<std::string> classes;
    ConfusionMatrix cm;
    ClassificationMetrics metrics;
    OneVsRestReport curves;

    std::string to_json() const;
    void save(const std::filesystem::path& dir) const;  // report.json + curve CSVs
};

EvalReport build_eval_report(const std::vector<std::string>& classes,
                             const std::vector<int>& truth, const std::vector<int>& predicted,
                             const std::vector<std::vector<double>>& scores);

void write_roc_csv(const std::filesystem::path& path, const RocCurve& curve);
void write_pr_csv(const std::filesystem::path& path, const PrCurve& curve);

}  // namespace duomic
