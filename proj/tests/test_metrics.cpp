#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "duomic/metrics.hpp"
#include "duomic/rng.hpp"
#include "oracles.hpp"

using namespace duomic;

TEST_CASE("confusion_matrix: perfect predictions give a diagonal matrix") {
    std::vector<int> truth{0, 1, 2, 1, 0};
    auto cm = confusion_matrix(truth, truth, 3);
    CHECK(cm.trace() == 5);
    CHECK(cm.total() == 5);
}

TEST_CASE("confusion_matrix: collapsed predictions fill one column") {
    std::vector<int> truth{0, 1, 2, 2};
    std::vector<int> pred{0, 0, 0, 0};
    auto cm = confusion_matrix(truth, pred, 3);
    for (std::size_t t = 0; t < 3; ++t)
        for (std::size_t p = 1; p < 3; ++p) CHECK(cm.at(t, p) == 0);
    CHECK(cm.at(0, 0) == 1);
    CHECK(cm.at(1, 0) == 1);
    CHECK(cm.at(2, 0) == 2);
}

TEST_CASE("confusion_matrix: invariant to sample order") {
    Rng rng(3);
    std::vector<int> truth, pred;
    for (int i = 0; i < 60; ++i) {
        truth.push_back(int(rng.uniform_int(3)));
        pred.push_back(int(rng.uniform_int(3)));
    }
    auto cm1 = confusion_matrix(truth, pred, 3);
    std::vector<std::size_t> perm(truth.size());
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<int> truth2, pred2;
    for (auto i : perm) {
        truth2.push_back(truth[i]);
        pred2.push_back(pred[i]);
    }
    auto cm2 = confusion_matrix(truth2, pred2, 3);
    CHECK(cm1.counts == cm2.counts);
}

TEST_CASE("confusion_matrix: out-of-range label is an error") {
    CHECK_THROWS_AS(confusion_matrix({0, 3}, {0, 0}, 3), ValueError);
    CHECK_THROWS_AS(confusion_matrix({0, 1}, {0, -1}, 3), ValueError);
}

TEST_CASE("classification_metrics: binary golden from a published confusion matrix") {
    // rows = true, class 0 = cancer: [[24,2],[1,27]]
    ConfusionMatrix cm(2);
    cm.at(0, 0) = 24;
    cm.at(0, 1) = 2;
    cm.at(1, 0) = 1;
    cm.at(1, 1) = 27;
    auto m = classification_metrics(cm);
    CHECK(std::abs(m.per_class[0].precision - 0.960) < 0.001);
    CHECK(std::abs(m.per_class[0].recall - 0.923) < 0.001);
    CHECK(std::abs(m.per_class[0].f1 - 0.941) < 0.001);
    CHECK(m.accuracy == doctest::Approx(51.0 / 54.0));
}

TEST_CASE("classification_metrics: identity matrix scores 1.0 everywhere") {
    ConfusionMatrix cm(3);
    for (std::size_t i = 0; i < 3; ++i) cm.at(i, i) = 5;
    auto m = classification_metrics(cm);
    CHECK(m.accuracy == 1.0);
    CHECK(m.macro_precision == 1.0);
    CHECK(m.macro_recall == 1.0);
    CHECK(m.macro_f1 == 1.0);
}

TEST_CASE("classification_metrics: hand-computed 3-class case with zero denominator") {
    // [[5,0,0],[0,5,0],[5,0,0]] -> class0 P=0.5, R=1, F1=2/3; class2 recall 0
    ConfusionMatrix cm(3);
    cm.at(0, 0) = 5;
    cm.at(1, 1) = 5;
    cm.at(2, 0) = 5;
    auto m = classification_metrics(cm);
    CHECK(m.per_class[0].precision == doctest::Approx(0.5));
    CHECK(m.per_class[0].recall == doctest::Approx(1.0));
    CHECK(m.per_class[0].f1 == doctest::Approx(2.0 / 3.0));
    CHECK_FALSE(m.per_class[2].precision_defined);  // nothing predicted as class 2
    CHECK(m.per_class[2].precision == 0.0);
    CHECK(m.per_class[2].recall == 0.0);
    // macro values stay unweighted means of the per-class values
    CHECK(m.macro_f1 == doctest::Approx((m.per_class[0].f1 + m.per_class[1].f1 +
                                         m.per_class[2].f1) / 3.0));
    CHECK(m.accuracy == doctest::Approx(10.0 / 15.0));
}

TEST_CASE("classification_metrics: empty matrix rejected") {
    ConfusionMatrix cm(2);
    CHECK_THROWS_AS(classification_metrics(cm), ValueError);
}

TEST_CASE("roc_curve: perfectly separated scores give AUC 1") {
    auto curve = roc_curve({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0});
    CHECK(curve.auc == 1.0);
    CHECK(curve.fpr.front() == 0.0);
    CHECK(curve.tpr.front() == 0.0);
    CHECK(curve.fpr.back() == 1.0);
    CHECK(curve.tpr.back() == 1.0);
}

TEST_CASE("roc_curve: all-equal scores give AUC 0.5") {
    auto curve = roc_curve({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0});
    CHECK(curve.auc == 0.5);
}

TEST_CASE("roc_curve: single-class input rejected") {
    CHECK_THROWS_AS(roc_curve({0.1, 0.2}, {1, 1}), ValueError);
    CHECK_THROWS_AS(roc_curve({0.1, 0.2}, {0, 0}), ValueError);
}

TEST_CASE("roc_curve: trapezoidal AUC equals the pairwise oracle with ties") {
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng.uniform_int(199);
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        bool has0 = false, has1 = false;
        for (std::size_t i = 0; i < n; ++i) {
            // coarse grid injects plenty of ties
            scores[i] = double(rng.uniform_int(10)) / 10.0;
            labels[i] = int(rng.uniform_int(2));
            (labels[i] ? has1 : has0) = true;
        }
        if (!has0 || !has1) {
            labels[0] = 0;
            labels[n - 1] = 1;
        }
        auto curve = roc_curve(scores, labels);
        CHECK(std::abs(curve.auc - oracles::auc_pairwise(scores, labels)) < 1e-9);
    }
}

TEST_CASE("roc_curve: AUC invariant under strictly monotone score transforms") {
    Rng rng(23);
    std::vector<double> scores(80);
    std::vector<int> labels(80);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        scores[i] = rng.uniform();
        labels[i] = int(rng.uniform_int(2));
    }
    labels[0] = 0;
    labels[1] = 1;
    auto base = roc_curve(scores, labels);
    auto transformed = scores;
    for (auto& s : transformed) s = std::exp(3.0 * s) + 1.0;
    auto t = roc_curve(transformed, labels);
    CHECK(base.auc == doctest::Approx(t.auc).epsilon(1e-12));
}

TEST_CASE("pr_curve: perfect ranking gives AP 1") {
    auto curve = pr_curve({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0});
    CHECK(curve.average_precision == 1.0);
}

TEST_CASE("pr_curve: positives ranked last floor the precision at P/n") {
    auto curve = pr_curve({0.9, 0.8, 0.7, 0.1, 0.05}, {0, 0, 0, 1, 1});
    CHECK(curve.recall.back() == 1.0);
    CHECK(curve.precision.back() == doctest::Approx(2.0 / 5.0));
}

TEST_CASE("pr_curve: AP matches the threshold-enumeration oracle") {
    Rng rng(29);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng.uniform_int(60);
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        bool has1 = false;
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = double(rng.uniform_int(8)) / 8.0;
            labels[i] = int(rng.uniform_int(2));
            has1 |= labels[i] == 1;
        }
        if (!has1) labels[0] = 1;
        auto curve = pr_curve(scores, labels);
        CHECK(std::abs(curve.average_precision -
                       oracles::average_precision_enum(scores, labels)) < 1e-9);
    }
}

TEST_CASE("pr_curve: no positives rejected") {
    CHECK_THROWS_AS(pr_curve({0.5, 0.6}, {0, 0}), ValueError);
}

TEST_CASE("one_vs_rest: binary AUCs of the two classes coincide") {
    Rng rng(31);
    const std::size_t n = 50;
    std::vector<std::vector<double>> scores(n, std::vector<double>(2));
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double p = rng.uniform();
        scores[i] = {p, 1.0 - p};
        labels[i] = int(rng.uniform_int(2));
    }
    labels[0] = 0;
    labels[1] = 1;
    auto report = one_vs_rest_report(scores, labels, 2);
    REQUIRE(report.roc[0].has_value());
    REQUIRE(report.roc[1].has_value());
    CHECK(report.roc[0]->auc == doctest::Approx(report.roc[1]->auc).epsilon(1e-12));
}

TEST_CASE("one_vs_rest: one-hot perfect scores give AUC 1 for every class") {
    std::vector<std::vector<double>> scores;
    std::vector<int> labels;
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 4; ++i) {
            std::vector<double> row(3, 0.0);
            row[c] = 1.0;
            scores.push_back(row);
            labels.push_back(c);
        }
    auto report = one_vs_rest_report(scores, labels, 3);
    for (int c = 0; c < 3; ++c) {
        REQUIRE(report.roc[c].has_value());
        CHECK(report.roc[c]->auc == 1.0);
        CHECK(report.pr[c]->average_precision == 1.0);
    }
}

TEST_CASE("one_vs_rest: per-class curves match the pairwise oracle") {
    Rng rng(37);
    const std::size_t n = 90;
    std::vector<std::vector<double>> scores(n, std::vector<double>(3));
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (auto& s : scores[i]) s = rng.uniform();
        labels[i] = int(rng.uniform_int(3));
    }
    labels[0] = 0;
    labels[1] = 1;
    labels[2] = 2;
    auto report = one_vs_rest_report(scores, labels, 3);
    for (int c = 0; c < 3; ++c) {
        std::vector<double> col(n);
        std::vector<int> bin(n);
        for (std::size_t i = 0; i < n; ++i) {
            col[i] = scores[i][c];
            bin[i] = labels[i] == c ? 1 : 0;
        }
        REQUIRE(report.roc[c].has_value());
        CHECK(std::abs(report.roc[c]->auc - oracles::auc_pairwise(col, bin)) < 1e-9);
    }
}

TEST_CASE("one_vs_rest: absent class marked undefined, others computed") {
    std::vector<std::vector<double>> scores{{0.7, 0.2, 0.1}, {0.3, 0.6, 0.1}, {0.4, 0.5, 0.1}};
    std::vector<int> labels{0, 1, 1};  // class 2 never appears
    auto report = one_vs_rest_report(scores, labels, 3);
    CHECK_FALSE(report.roc[2].has_value());
    CHECK_FALSE(report.pr[2].has_value());
    CHECK(report.roc[0].has_value());
    CHECK(report.roc[1].has_value());
}

TEST_CASE("eval report: json and curve files") {
    namespace fs = std::filesystem;
    std::vector<int> truth{0, 0, 1, 1};
    std::vector<int> pred{0, 1, 1, 1};
    std::vector<std::vector<double>> scores{{0.8, 0.2}, {0.4, 0.6}, {0.3, 0.7}, {0.1, 0.9}};
    auto report = build_eval_report({"cancer", "non_cancer"}, truth, pred, scores);
    const std::string json = report.to_json();
    CHECK(json.find("\"confusion\"") != std::string::npos);
    CHECK(json.find("\"macro\"") != std::string::npos);

    const fs::path dir = fs::temp_directory_path() / "duomic_metrics_test";
    fs::remove_all(dir);
    report.save(dir);
    CHECK(fs::exists(dir / "report.json"));
    CHECK(fs::exists(dir / "roc_cancer.csv"));
    CHECK(fs::exists(dir / "pr_non_cancer.csv"));
    fs::remove_all(dir);
}
