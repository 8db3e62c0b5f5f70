#include "duomic/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

namespace duomic {

namespace {

struct BinaryCounts {
    std::int64_t pos = 0, neg = 0;
};

BinaryCounts check_binary(const std::vector<double>& scores, const std::vector<int>& labels,
                          bool need_negatives) {
    if (scores.size() != labels.size())
        throw ValueError("curve: scores and labels differ in length");
    if (scores.empty()) throw ValueError("curve: empty input");
    BinaryCounts c;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1)
            throw ValueError("curve: labels must be 0/1, got " + std::to_string(labels[i]));
        if (!std::isfinite(scores[i])) throw NumericError("curve: non-finite score");
        labels[i] == 1 ? ++c.pos : ++c.neg;
    }
    if (c.pos == 0) throw ValueError("curve: no positive samples");
    if (need_negatives && c.neg == 0) throw ValueError("curve: no negative samples");
    return c;
}

/// Indices sorted by score descending; groups of equal scores are contiguous.
std::vector<std::size_t> descending_order(const std::vector<double>& scores) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return idx;
}

}  // namespace

ConfusionMatrix confusion_matrix(const std::vector<int>& truth, const std::vector<int>& predicted,
                                 std::size_t k) {
    if (truth.size() != predicted.size())
        throw ValueError("confusion_matrix: label lists differ in length");
    ConfusionMatrix cm(k);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] < 0 || static_cast<std::size_t>(truth[i]) >= k || predicted[i] < 0 ||
            static_cast<std::size_t>(predicted[i]) >= k)
            throw ValueError("confusion_matrix: label out of range at sample " + std::to_string(i));
        cm.at(static_cast<std::size_t>(truth[i]), static_cast<std::size_t>(predicted[i]))++;
    }
    return cm;
}

ClassificationMetrics classification_metrics(const ConfusionMatrix& cm) {
    if (cm.k == 0 || cm.total() == 0) throw ValueError("classification_metrics: empty matrix");
    ClassificationMetrics out;
    out.per_class.resize(cm.k);
    for (std::size_t c = 0; c < cm.k; ++c) {
        const std::int64_t tp = cm.at(c, c);
        std::int64_t fp = 0, fn = 0;
        for (std::size_t o = 0; o < cm.k; ++o) {
            if (o == c) continue;
            fp += cm.at(o, c);
            fn += cm.at(c, o);
        }
        auto& m = out.per_class[c];
        m.precision_defined = tp + fp > 0;
        m.recall_defined = tp + fn > 0;
        m.precision = m.precision_defined ? double(tp) / double(tp + fp) : 0.0;
        m.recall = m.recall_defined ? double(tp) / double(tp + fn) : 0.0;
        m.f1 = (m.precision + m.recall) > 0
                   ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                   : 0.0;
        out.macro_precision += m.precision;
        out.macro_recall += m.recall;
        out.macro_f1 += m.f1;
    }
    out.macro_precision /= double(cm.k);
    out.macro_recall /= double(cm.k);
    out.macro_f1 /= double(cm.k);
    out.accuracy = double(cm.trace()) / double(cm.total());
    return out;
}

RocCurve roc_curve(const std::vector<double>& scores, const std::vector<int>& labels) {
    const auto counts = check_binary(scores, labels, true);
    const auto idx = descending_order(scores);

    RocCurve curve;
    curve.thresholds.push_back(std::numeric_limits<double>::infinity());
    curve.fpr.push_back(0.0);
    curve.tpr.push_back(0.0);

    // Trapezoid area accumulated in integer counts so the result equals the
    // pairwise Mann-Whitney statistic exactly: ties collapse into one step.
    double area2 = 0;  // 2 * area * P * N
    std::int64_t tp = 0, fp = 0, prev_tp = 0, prev_fp = 0;
    std::size_t i = 0;
    while (i < idx.size()) {
        const double s = scores[idx[i]];
        while (i < idx.size() && scores[idx[i]] == s) {
            labels[idx[i]] == 1 ? ++tp : ++fp;
            ++i;
        }
        area2 += double(fp - prev_fp) * double(tp + prev_tp);
        curve.thresholds.push_back(s);
        curve.fpr.push_back(double(fp) / double(counts.neg));
        curve.tpr.push_back(double(tp) / double(counts.pos));
        prev_tp = tp;
        prev_fp = fp;
    }
    curve.thresholds.push_back(-std::numeric_limits<double>::infinity());
    curve.fpr.push_back(1.0);
    curve.tpr.push_back(1.0);
    curve.auc = area2 / (2.0 * double(counts.pos) * double(counts.neg));
    return curve;
}

PrCurve pr_curve(const std::vector<double>& scores, const std::vector<int>& labels) {
    const auto counts = check_binary(scores, labels, false);
    const auto idx = descending_order(scores);

    PrCurve curve;
    double ap = 0, prev_recall = 0;
    std::int64_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < idx.size()) {
        const double s = scores[idx[i]];
        while (i < idx.size() && scores[idx[i]] == s) {
            labels[idx[i]] == 1 ? ++tp : ++fp;
            ++i;
        }
        const double recall = double(tp) / double(counts.pos);
        const double precision = double(tp) / double(tp + fp);
        curve.thresholds.push_back(s);
        curve.recall.push_back(recall);
        curve.precision.push_back(precision);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    curve.average_precision = ap;
    return curve;
}

OneVsRestReport one_vs_rest_report(const std::vector<std::vector<double>>& scores,
                                   const std::vector<int>& labels, std::size_t k) {
    if (k < 2) throw ValueError("one_vs_rest_report: need K >= 2");
    if (scores.size() != labels.size())
        throw ValueError("one_vs_rest_report: scores and labels differ in length");
    for (const auto& row : scores)
        if (row.size() != k)
            throw DimensionError("one_vs_rest_report: score row has " + std::to_string(row.size()) +
                                 " entries, expected " + std::to_string(k));
    OneVsRestReport report;
    report.roc.resize(k);
    report.pr.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        std::vector<double> col(scores.size());
        std::vector<int> bin(scores.size());
        std::size_t pos = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            col[i] = scores[i][c];
            bin[i] = labels[i] == static_cast<int>(c) ? 1 : 0;
            pos += bin[i];
        }
        if (pos == 0 || pos == scores.size()) continue;  // curves undefined for this class
        report.roc[c] = roc_curve(col, bin);
        report.pr[c] = pr_curve(col, bin);
    }
    return report;
}

EvalReport build_eval_report(const std::vector<std::string>& classes,
                             const std::vector<int>& truth, const std::vector<int>& predicted,
                             const std::vector<std::vector<double>>& scores) {
    EvalReport report;
    report.classes = classes;
    report.cm = confusion_matrix(truth, predicted, classes.size());
    report.metrics = classification_metrics(report.cm);
    report.curves = one_vs_rest_report(scores, truth, classes.size());
    return report;
}

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["classes"] = classes;
    std::vector<std::vector<std::int64_t>> rows(cm.k);
    for (std::size_t t = 0; t < cm.k; ++t)
        for (std::size_t p = 0; p < cm.k; ++p) rows[t].push_back(cm.at(t, p));
    j["confusion"] = rows;
    nlohmann::json per = nlohmann::json::object();
    for (std::size_t c = 0; c < classes.size(); ++c) {
        const auto& m = metrics.per_class[c];
        per[classes[c]] = {{"precision", m.precision},
                           {"recall", m.recall},
                           {"f1", m.f1},
                           {"precision_defined", m.precision_defined},
                           {"recall_defined", m.recall_defined}};
        if (curves.roc[c]) per[classes[c]]["roc_auc"] = curves.roc[c]->auc;
        if (curves.pr[c]) per[classes[c]]["average_precision"] = curves.pr[c]->average_precision;
    }
    j["per_class"] = per;
    j["macro"] = {{"precision", metrics.macro_precision},
                  {"recall", metrics.macro_recall},
                  {"f1", metrics.macro_f1}};
    j["accuracy"] = metrics.accuracy;
    return j.dump(2);
}

namespace {

void write_csv_value(std::ofstream& out, double v) {
    if (std::isinf(v))
        out << (v > 0 ? "inf" : "-inf");
    else {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.10g", v);
        out << buf;
    }
}

}  // namespace

void write_roc_csv(const std::filesystem::path& path, const RocCurve& curve) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "threshold,fpr,tpr\n";
    for (std::size_t i = 0; i < curve.thresholds.size(); ++i) {
        write_csv_value(out, curve.thresholds[i]);
        out << ',';
        write_csv_value(out, curve.fpr[i]);
        out << ',';
        write_csv_value(out, curve.tpr[i]);
        out << '\n';
    }
}

void write_pr_csv(const std::filesystem::path& path, const PrCurve& curve) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "threshold,recall,precision\n";
    for (std::size_t i = 0; i < curve.thresholds.size(); ++i) {
        write_csv_value(out, curve.thresholds[i]);
        out << ',';
        write_csv_value(out, curve.recall[i]);
        out << ',';
        write_csv_value(out, curve.precision[i]);
        out << '\n';
    }
}

void EvalReport::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "report.json");
        if (!out) throw DataError("cannot write " + (dir / "report.json").string());
        out << to_json() << "\n";
    }
    for (std::size_t c = 0; c < classes.size(); ++c) {
        if (curves.roc[c]) write_roc_csv(dir / ("roc_" + classes[c] + ".csv"), *curves.roc[c]);
        if (curves.pr[c]) write_pr_csv(dir / ("pr_" + classes[c] + ".csv"), *curves.pr[c]);
    }
}

}  // namespace duomic
