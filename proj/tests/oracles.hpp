#pragma once

// Independent reference implementations used as test oracles. Everything here
// is deliberately brute-force and kept separate from the library code paths
// it checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "duomic/graph.hpp"
#include "duomic/rng.hpp"
#include "duomic/tensor.hpp"

namespace oracles {

/// Direct convolution by explicit loops over every output element and kernel
/// tap. Zero padding.
template <typename T>
duomic::BasicTensor<T> conv2d_direct(const duomic::BasicTensor<T>& x,
                                     const duomic::BasicTensor<T>& w,
                                     const duomic::BasicTensor<T>* bias, std::size_t stride,
                                     std::size_t pad) {
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), wid = x.dim(3);
    const std::size_t k = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const std::size_t oh = (h + 2 * pad - kh) / stride + 1;
    const std::size_t ow = (wid + 2 * pad - kw) / stride + 1;
    duomic::BasicTensor<T> out({n, k, oh, ow});
    for (std::size_t ni = 0; ni < n; ++ni)
        for (std::size_t ki = 0; ki < k; ++ki)
            for (std::size_t oy = 0; oy < oh; ++oy)
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    double acc = bias ? (*bias)[ki] : 0.0;
                    for (std::size_t ci = 0; ci < c; ++ci)
                        for (std::size_t fy = 0; fy < kh; ++fy)
                            for (std::size_t fx = 0; fx < kw; ++fx) {
                                const long iy = static_cast<long>(oy * stride + fy) -
                                                static_cast<long>(pad);
                                const long ix = static_cast<long>(ox * stride + fx) -
                                                static_cast<long>(pad);
                                if (iy < 0 || iy >= static_cast<long>(h) || ix < 0 ||
                                    ix >= static_cast<long>(wid))
                                    continue;
                                acc += static_cast<double>(x.at4(ni, ci, iy, ix)) *
                                       static_cast<double>(w.at4(ki, ci, fy, fx));
                            }
                    out.at4(ni, ki, oy, ox) = static_cast<T>(acc);
                }
    return out;
}

/// Central finite differences of a scalar-valued rebuildable graph w.r.t. the
/// given leaves, compared against the analytic gradients from one backward
/// pass. Returns the worst relative error observed. 64-bit only.
///
/// `build` must construct the forward graph from the leaves' current values
/// each time it is called.
inline double max_grad_rel_error(std::vector<duomic::NodePtr<double>> leaves,
                                 const std::function<duomic::NodePtr<double>()>& build,
                                 double h = 1e-5) {
    auto loss = build();
    for (auto& leaf : leaves) {
        duomic::ensure_grad(*leaf);
        std::fill(leaf->grad.data.begin(), leaf->grad.data.end(), 0.0);
    }
    duomic::backward(loss);
    std::vector<duomic::Tensor64> analytic;
    analytic.reserve(leaves.size());
    for (auto& leaf : leaves) analytic.push_back(leaf->grad);

    double worst = 0;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        auto& x = leaves[li]->value;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double keep = x[i];
            x[i] = keep + h;
            const double fp = build()->value[0];
            x[i] = keep - h;
            const double fm = build()->value[0];
            x[i] = keep;
            const double numeric = (fp - fm) / (2 * h);
            const double a = analytic[li][i];
            const double diff = std::abs(a - numeric);
            if (diff < 1e-9) continue;
            worst = std::max(worst, diff / std::max(1e-6, std::abs(a) + std::abs(numeric)));
        }
    }
    return worst;
}

/// ROC AUC as the Mann-Whitney pairwise statistic: fraction of
/// positive/negative pairs ranked correctly, ties counted half.
inline double auc_pairwise(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0;
    std::size_t pos = 0, neg = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        ++pos;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] == 1) continue;
            if (scores[i] > scores[j])
                wins += 1.0;
            else if (scores[i] == scores[j])
                wins += 0.5;
        }
    }
    for (int l : labels) neg += (l != 1);
    return wins / (static_cast<double>(pos) * static_cast<double>(neg));
}

/// Average precision by brute-force enumeration of every distinct threshold.
inline double average_precision_enum(const std::vector<double>& scores,
                                     const std::vector<int>& labels) {
    std::vector<double> thresholds = scores;
    std::sort(thresholds.begin(), thresholds.end(), std::greater<double>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    std::size_t total_pos = 0;
    for (int l : labels) total_pos += (l == 1);
    double ap = 0, prev_recall = 0;
    for (double th : thresholds) {
        std::size_t tp = 0, fp = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (scores[i] >= th) {
                if (labels[i] == 1)
                    ++tp;
                else
                    ++fp;
            }
        }
        const double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
        const double precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    return ap;
}

/// Fills a tensor with small random values in [-r, r].
template <typename T>
void randomize(duomic::BasicTensor<T>& t, duomic::Rng& rng, double r = 1.0) {
    for (auto& v : t.data) v = static_cast<T>(rng.uniform(-r, r));
}

}  // namespace oracles
