#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "duomic/graph.hpp"
#include "duomic/rng.hpp"
#include "duomic/tensor.hpp"

namespace duomic {

// ---------------------------------------------------------------------------
// Small row-major GEMM kernels. Loop orders chosen so the innermost loop
// runs over contiguous memory and auto-vectorizes.
// ---------------------------------------------------------------------------

/// C[m,n] (+)= A[m,k] * B[k,n]
template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* A, const T* B, T* C,
             bool accumulate) {
    if (!accumulate) std::fill(C, C + m * n, T(0));
    for (std::size_t i = 0; i < m; ++i) {
        const T* a_row = A + i * k;
        T* c_row = C + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const T a = a_row[p];
            if (a == T(0)) continue;
            const T* b_row = B + p * n;
            for (std::size_t j = 0; j < n; ++j) c_row[j] += a * b_row[j];
        }
    }
}

/// C[m,n] (+)= A[m,k] * B[n,k]^T
template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* A, const T* B, T* C,
             bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        const T* a_row = A + i * k;
        T* c_row = C + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const T* b_row = B + j * k;
            T acc = 0;
            for (std::size_t p = 0; p < k; ++p) acc += a_row[p] * b_row[p];
            c_row[j] = accumulate ? c_row[j] + acc : acc;
        }
    }
}

/// C[m,n] (+)= A[k,m]^T * B[k,n]
template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* A, const T* B, T* C,
             bool accumulate) {
    if (!accumulate) std::fill(C, C + m * n, T(0));
    for (std::size_t p = 0; p < k; ++p) {
        const T* a_row = A + p * m;
        const T* b_row = B + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const T a = a_row[i];
            if (a == T(0)) continue;
            T* c_row = C + i * n;
            for (std::size_t j = 0; j < n; ++j) c_row[j] += a * b_row[j];
        }
    }
}

// ---------------------------------------------------------------------------
// conv2d
// ---------------------------------------------------------------------------

struct Conv2dGeom {
    std::size_t n, c, h, w;      // input
    std::size_t k, kh, kw;       // kernel
    std::size_t oh, ow;          // output
    std::size_t stride, pad;
};

template <typename T>
Conv2dGeom conv2d_geometry(const BasicTensor<T>& x, const BasicTensor<T>& weight,
                           std::size_t stride, std::size_t pad) {
    require_rank(x, 4, "conv2d input");
    require_rank(weight, 4, "conv2d weight");
    if (stride < 1) throw ValueError("conv2d: stride must be >= 1");
    Conv2dGeom g{};
    g.n = x.dim(0); g.c = x.dim(1); g.h = x.dim(2); g.w = x.dim(3);
    g.k = weight.dim(0); g.kh = weight.dim(2); g.kw = weight.dim(3);
    g.stride = stride; g.pad = pad;
    if (weight.dim(1) != g.c)
        throw DimensionError("conv2d: weight channel axis " + std::to_string(weight.dim(1)) +
                             " != input channel axis " + std::to_string(g.c));
    if (g.kh > g.h + 2 * pad || g.kw > g.w + 2 * pad)
        throw DimensionError("conv2d: kernel " + std::to_string(g.kh) + "x" + std::to_string(g.kw) +
                             " exceeds padded input " + std::to_string(g.h + 2 * pad) + "x" +
                             std::to_string(g.w + 2 * pad));
    g.oh = (g.h + 2 * pad - g.kh) / stride + 1;
    g.ow = (g.w + 2 * pad - g.kw) / stride + 1;
    return g;
}

/// Unpacks one sample into cols[c*kh*kw, oh*ow]; zero padding.
template <typename T>
void im2col(const T* x, const Conv2dGeom& g, T* cols) {
    const std::size_t spatial = g.oh * g.ow;
    for (std::size_t c = 0; c < g.c; ++c) {
        const T* plane = x + c * g.h * g.w;
        for (std::size_t ki = 0; ki < g.kh; ++ki) {
            for (std::size_t kj = 0; kj < g.kw; ++kj) {
                T* dst = cols + ((c * g.kh + ki) * g.kw + kj) * spatial;
                for (std::size_t oy = 0; oy < g.oh; ++oy) {
                    const long iy = static_cast<long>(oy * g.stride + ki) - static_cast<long>(g.pad);
                    T* drow = dst + oy * g.ow;
                    if (iy < 0 || iy >= static_cast<long>(g.h)) {
                        std::fill(drow, drow + g.ow, T(0));
                        continue;
                    }
                    const T* srow = plane + iy * g.w;
                    for (std::size_t ox = 0; ox < g.ow; ++ox) {
                        const long ix = static_cast<long>(ox * g.stride + kj) - static_cast<long>(g.pad);
                        drow[ox] = (ix >= 0 && ix < static_cast<long>(g.w)) ? srow[ix] : T(0);
                    }
                }
            }
        }
    }
}

/// Scatter-adds cols back into one sample's gradient (transpose of im2col).
template <typename T>
void col2im_add(const T* cols, const Conv2dGeom& g, T* dx) {
    const std::size_t spatial = g.oh * g.ow;
    for (std::size_t c = 0; c < g.c; ++c) {
        T* plane = dx + c * g.h * g.w;
        for (std::size_t ki = 0; ki < g.kh; ++ki) {
            for (std::size_t kj = 0; kj < g.kw; ++kj) {
                const T* src = cols + ((c * g.kh + ki) * g.kw + kj) * spatial;
                for (std::size_t oy = 0; oy < g.oh; ++oy) {
                    const long iy = static_cast<long>(oy * g.stride + ki) - static_cast<long>(g.pad);
                    if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
                    const T* srow = src + oy * g.ow;
                    T* drow = plane + iy * g.w;
                    for (std::size_t ox = 0; ox < g.ow; ++ox) {
                        const long ix = static_cast<long>(ox * g.stride + kj) - static_cast<long>(g.pad);
                        if (ix >= 0 && ix < static_cast<long>(g.w)) drow[ix] += srow[ox];
                    }
                }
            }
        }
    }
}

/// 2-d convolution with zero padding; bias may be null.
template <typename T>
NodePtr<T> conv2d(NodePtr<T> x, NodePtr<T> weight, NodePtr<T> bias, std::size_t stride,
                  std::size_t pad) {
    const Conv2dGeom g = conv2d_geometry(x->value, weight->value, stride, pad);
    if (bias) require_shape(bias->value, {g.k}, "conv2d bias");

    const std::size_t ckk = g.c * g.kh * g.kw;
    const std::size_t spatial = g.oh * g.ow;
    BasicTensor<T> out({g.n, g.k, g.oh, g.ow});
    std::vector<T> cols(ckk * spatial);
    for (std::size_t n = 0; n < g.n; ++n) {
        im2col(x->value.ptr() + n * g.c * g.h * g.w, g, cols.data());
        T* out_n = out.ptr() + n * g.k * spatial;
        gemm_nn(g.k, spatial, ckk, weight->value.ptr(), cols.data(), out_n, false);
        if (bias) {
            for (std::size_t k = 0; k < g.k; ++k) {
                const T b = bias->value[k];
                T* row = out_n + k * spatial;
                for (std::size_t s = 0; s < spatial; ++s) row[s] += b;
            }
        }
    }
    out.check_finite("conv2d");

    std::vector<NodePtr<T>> ins = bias ? std::vector<NodePtr<T>>{x, weight, bias}
                                       : std::vector<NodePtr<T>>{x, weight};
    return make_node<T>(std::move(out), std::move(ins), [g, ckk, spatial](NodeT<T>& self) {
        auto& xn = *self.inputs[0];
        auto& wn = *self.inputs[1];
        ensure_grad(xn);
        ensure_grad(wn);
        std::vector<T> cols(ckk * spatial);
        std::vector<T> dcols(ckk * spatial);
        for (std::size_t n = 0; n < g.n; ++n) {
            const T* dout_n = self.grad.ptr() + n * g.k * spatial;
            // dW += dOut_n * cols^T (im2col recomputed to avoid caching it)
            im2col(xn.value.ptr() + n * g.c * g.h * g.w, g, cols.data());
            gemm_nt(g.k, ckk, spatial, dout_n, cols.data(), wn.grad.ptr(), true);
            // dX_n += W^T * dOut_n, scattered back
            gemm_tn(ckk, spatial, g.k, wn.value.ptr(), dout_n, dcols.data(), false);
            col2im_add(dcols.data(), g, xn.grad.ptr() + n * g.c * g.h * g.w);
        }
        if (self.inputs.size() == 3) {
            auto& bn = *self.inputs[2];
            ensure_grad(bn);
            for (std::size_t n = 0; n < g.n; ++n)
                for (std::size_t k = 0; k < g.k; ++k) {
                    const T* row = self.grad.ptr() + (n * g.k + k) * spatial;
                    T acc = 0;
                    for (std::size_t s = 0; s < spatial; ++s) acc += row[s];
                    bn.grad[k] += acc;
                }
        }
    });
}

// ---------------------------------------------------------------------------
// batchnorm2d
// ---------------------------------------------------------------------------

enum class BnMode { train, eval };

/// Per-channel batch normalization over (N, H, W). Train mode normalizes by
/// batch statistics (biased variance) and updates the running buffers in
/// place; eval mode uses the running buffers only.
template <typename T>
NodePtr<T> batchnorm2d(NodePtr<T> x, NodePtr<T> gamma, NodePtr<T> beta,
                       BasicTensor<T>& running_mean, BasicTensor<T>& running_var, BnMode mode,
                       T momentum = T(0.1), T eps = T(1e-5)) {
    require_rank(x->value, 4, "batchnorm2d input");
    const std::size_t n = x->value.dim(0), c = x->value.dim(1);
    const std::size_t hw = x->value.dim(2) * x->value.dim(3);
    require_shape(gamma->value, {c}, "batchnorm2d gamma");
    require_shape(beta->value, {c}, "batchnorm2d beta");
    require_shape(running_mean, {c}, "batchnorm2d running_mean");
    require_shape(running_var, {c}, "batchnorm2d running_var");
    if (mode == BnMode::train && n < 2)
        throw ValueError("batchnorm2d: train mode needs batch size >= 2, got " + std::to_string(n));

    const std::size_t m = n * hw;  // elements per channel
    std::vector<T> mean(c), invstd(c);
    if (mode == BnMode::train) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            double acc = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const T* p = x->value.ptr() + (i * c + ch) * hw;
                for (std::size_t s = 0; s < hw; ++s) acc += p[s];
            }
            const double mu = acc / static_cast<double>(m);
            double var = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const T* p = x->value.ptr() + (i * c + ch) * hw;
                for (std::size_t s = 0; s < hw; ++s) {
                    const double d = p[s] - mu;
                    var += d * d;
                }
            }
            var /= static_cast<double>(m);
            mean[ch] = static_cast<T>(mu);
            invstd[ch] = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
            running_mean[ch] = (T(1) - momentum) * running_mean[ch] + momentum * static_cast<T>(mu);
            running_var[ch] = (T(1) - momentum) * running_var[ch] + momentum * static_cast<T>(var);
        }
    } else {
        for (std::size_t ch = 0; ch < c; ++ch) {
            mean[ch] = running_mean[ch];
            invstd[ch] = T(1) / std::sqrt(running_var[ch] + eps);
        }
    }

    BasicTensor<T> out(x->value.shape);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const T* src = x->value.ptr() + (i * c + ch) * hw;
            T* dst = out.ptr() + (i * c + ch) * hw;
            const T mu = mean[ch], is = invstd[ch], ga = gamma->value[ch], be = beta->value[ch];
            for (std::size_t s = 0; s < hw; ++s) dst[s] = (src[s] - mu) * is * ga + be;
        }
    out.check_finite("batchnorm2d");

    const bool train = mode == BnMode::train;
    return make_node<T>(std::move(out), {x, gamma, beta},
                        [n, c, hw, m, mean, invstd, train](NodeT<T>& self) {
        auto& xn = *self.inputs[0];
        auto& gn = *self.inputs[1];
        auto& bn = *self.inputs[2];
        ensure_grad(xn);
        ensure_grad(gn);
        ensure_grad(bn);
        for (std::size_t ch = 0; ch < c; ++ch) {
            const T mu = mean[ch], is = invstd[ch], ga = gn.value[ch];
            double sum_dy = 0, sum_dy_xhat = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const T* dy = self.grad.ptr() + (i * c + ch) * hw;
                const T* xv = xn.value.ptr() + (i * c + ch) * hw;
                for (std::size_t s = 0; s < hw; ++s) {
                    sum_dy += dy[s];
                    sum_dy_xhat += dy[s] * (xv[s] - mu) * is;
                }
            }
            gn.grad[ch] += static_cast<T>(sum_dy_xhat);
            bn.grad[ch] += static_cast<T>(sum_dy);
            if (train) {
                const T k1 = static_cast<T>(sum_dy / static_cast<double>(m));
                const T k2 = static_cast<T>(sum_dy_xhat / static_cast<double>(m));
                for (std::size_t i = 0; i < n; ++i) {
                    const T* dy = self.grad.ptr() + (i * c + ch) * hw;
                    const T* xv = xn.value.ptr() + (i * c + ch) * hw;
                    T* dx = xn.grad.ptr() + (i * c + ch) * hw;
                    for (std::size_t s = 0; s < hw; ++s) {
                        const T xhat = (xv[s] - mu) * is;
                        dx[s] += ga * is * (dy[s] - k1 - xhat * k2);
                    }
                }
            } else {
                for (std::size_t i = 0; i < n; ++i) {
                    const T* dy = self.grad.ptr() + (i * c + ch) * hw;
                    T* dx = xn.grad.ptr() + (i * c + ch) * hw;
                    for (std::size_t s = 0; s < hw; ++s) dx[s] += dy[s] * ga * is;
                }
            }
        }
    });
}

// ---------------------------------------------------------------------------
// Pointwise and pooling ops
// ---------------------------------------------------------------------------

template <typename T>
NodePtr<T> relu(NodePtr<T> x) {
    BasicTensor<T> out(x->value.shape);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x->value[i] > T(0) ? x->value[i] : T(0);
    return make_node<T>(std::move(out), {x}, [](NodeT<T>& self) {
        auto& xn = *self.inputs[0];
        ensure_grad(xn);
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            if (xn.value[i] > T(0)) xn.grad[i] += self.grad[i];
    });
}

template <typename T>
NodePtr<T> add(NodePtr<T> a, NodePtr<T> b) {
    if (!a->value.same_shape(b->value))
        throw DimensionError("add: shapes " + a->value.shape_str() + " vs " + b->value.shape_str());
    BasicTensor<T> out(a->value.shape);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] + b->value[i];
    out.check_finite("add");
    return make_node<T>(std::move(out), {a, b}, [](NodeT<T>& self) {
        for (auto& in : self.inputs) {
            ensure_grad(*in);
            for (std::size_t i = 0; i < self.grad.size(); ++i) in->grad[i] += self.grad[i];
        }
    });
}

template <typename T>
NodePtr<T> mul(NodePtr<T> a, NodePtr<T> b) {
    if (!a->value.same_shape(b->value))
        throw DimensionError("mul: shapes " + a->value.shape_str() + " vs " + b->value.shape_str());
    BasicTensor<T> out(a->value.shape);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] * b->value[i];
    out.check_finite("mul");
    return make_node<T>(std::move(out), {a, b}, [](NodeT<T>& self) {
        auto& an = *self.inputs[0];
        auto& bn = *self.inputs[1];
        ensure_grad(an);
        ensure_grad(bn);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            an.grad[i] += self.grad[i] * bn.value[i];
            bn.grad[i] += self.grad[i] * an.value[i];
        }
    });
}

template <typename T>
NodePtr<T> maxpool2d(NodePtr<T> x, std::size_t k, std::size_t stride) {
    require_rank(x->value, 4, "maxpool2d input");
    const std::size_t n = x->value.dim(0), c = x->value.dim(1), h = x->value.dim(2),
                      w = x->value.dim(3);
    if (k < 1 || stride < 1) throw ValueError("maxpool2d: kernel and stride must be >= 1");
    if (k > h || k > w)
        throw DimensionError("maxpool2d: kernel " + std::to_string(k) + " exceeds input " +
                             std::to_string(h) + "x" + std::to_string(w));
    const std::size_t oh = (h - k) / stride + 1, ow = (w - k) / stride + 1;
    BasicTensor<T> out({n, c, oh, ow});
    std::vector<std::size_t> argmax(out.size());
    std::size_t o = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const T* plane = x->value.ptr() + (i * c + ch) * h * w;
            const std::size_t base = (i * c + ch) * h * w;
            for (std::size_t oy = 0; oy < oh; ++oy)
                for (std::size_t ox = 0; ox < ow; ++ox, ++o) {
                    T best = plane[oy * stride * w + ox * stride];
                    std::size_t best_idx = oy * stride * w + ox * stride;
                    for (std::size_t ki = 0; ki < k; ++ki)
                        for (std::size_t kj = 0; kj < k; ++kj) {
                            const std::size_t idx = (oy * stride + ki) * w + ox * stride + kj;
                            if (plane[idx] > best) { best = plane[idx]; best_idx = idx; }
                        }
                    out[o] = best;
                    argmax[o] = base + best_idx;
                }
        }
    return make_node<T>(std::move(out), {x}, [argmax](NodeT<T>& self) {
        auto& xn = *self.inputs[0];
        ensure_grad(xn);
        for (std::size_t i = 0; i < self.grad.size(); ++i) xn.grad[argmax[i]] += self.grad[i];
    });
}

template <typename T>
NodePtr<T> global_avg_pool(NodePtr<T> x) {
    require_rank(x->value, 4, "global_avg_pool input");
    const std::size_t n = x->value.dim(0), c = x->value.dim(1);
    const std::size_t hw = x->value.dim(2) * x->value.dim(3);
    BasicTensor<T> out({n, c});
    for (std::size_t i = 0; i < n * c; ++i) {
        const T* p = x->value.ptr() + i * hw;
        double acc = 0;
        for (std::size_t s = 0; s < hw; ++s) acc += p[s];
        out[i] = static_cast<T>(acc / static_cast<double>(hw));
    }
    return make_node<T>(std::move(out), {x}, [hw](NodeT<T>& self) {
        auto& xn = *self.inputs[0];
        ensure_grad(xn);
        const T inv = T(1) / static_cast<T>(hw);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            T* dst = xn.grad.ptr() + i * hw;
            const T g = self.grad[i] * inv;
            for (std::size_t s = 0; s < hw; ++s) dst[s] += g;
        }
    });
}

template <typename T>
NodePtr<T> linear(NodePtr<T> x, NodePtr<T> weight, NodePtr<T> bias) {
    require_rank(x->value, 2, "linear input");
    require_rank(weight->value, 2, "linear weight");
    const std::size_t n = x->value.dim(0), d = x->value.dim(1), m1 = weight->value.dim(1);
    if (weight->value.dim(0) != d)
        throw DimensionError("linear: weight rows " + std::to_string(weight->value.dim(0)) +
                             " != input features " + std::to_string(d));
    require_shape(bias->value, {m1}, "linear bias");
    BasicTensor<T> out({n, m1});
    gemm_nn(n, m1, d, x->value.ptr(), weight->value.ptr(), out.ptr(), false);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m1; ++j) out.at2(i, j) += bias->value[j];
    out.check_finite("linear");
    return make_node<T>(std::move(out), {x, weight, bias}, [n, d, m1](NodeT<T>& self) {
        auto& xn = *self.inputs[0];
        auto& wn = *self.inputs[1];
        auto& bn = *self.inputs[2];
        ensure_grad(xn);
        ensure_grad(wn);
        ensure_grad(bn);
        gemm_nt(n, d, m1, self.grad.ptr(), wn.value.ptr(), xn.grad.ptr(), true);
        gemm_tn(d, m1, n, xn.value.ptr(), self.grad.ptr(), wn.grad.ptr(), true);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m1; ++j) bn.grad[j] += self.grad.at2(i, j);
    });
}

enum class DropoutMode { train, eval };

/// Inverted dropout: train mode masks with probability p and rescales kept
/// activations by 1/(1-p); eval mode is the identity.
template <typename T>
NodePtr<T> dropout(NodePtr<T> x, double p, DropoutMode mode, std::uint64_t seed) {
    if (p < 0.0 || p >= 1.0) throw ValueError("dropout: p must be in [0,1), got " + std::to_string(p));
    if (mode == DropoutMode::eval || p == 0.0) {
        BasicTensor<T> out = x->value;
        return make_node<T>(std::move(out), {x}, [](NodeT<T>& self) {
            auto& xn = *self.inputs[0];
            ensure_grad(xn);
            for (std::size_t i = 0; i < self.grad.size(); ++i) xn.grad[i] += self.grad[i];
        });
    }
    Rng rng(seed);
    const T scale = static_cast<T>(1.0 / (1.0 - p));
    std::vector<bool> keep(x->value.size());
    BasicTensor<T> out(x->value.shape);
    for (std::size_t i = 0; i < out.size(); ++i) {
        keep[i] = rng.uniform() >= p;
        out[i] = keep[i] ? x->value[i] * scale : T(0);
    }
    return make_node<T>(std::move(out), {x}, [keep, scale](NodeT<T>& self) {
        auto& xn = *self.inputs[0];
        ensure_grad(xn);
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            if (keep[i]) xn.grad[i] += self.grad[i] * scale;
    });
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

/// Row-wise softmax of a [N,K] tensor (plain function, no graph).
template <typename T>
BasicTensor<T> softmax_rows(const BasicTensor<T>& logits) {
    require_rank(logits, 2, "softmax input");
    const std::size_t n = logits.dim(0), k = logits.dim(1);
    BasicTensor<T> out({n, k});
    for (std::size_t i = 0; i < n; ++i) {
        const T* row = logits.ptr() + i * k;
        T mx = row[0];
        for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        double denom = 0;
        for (std::size_t j = 0; j < k; ++j) denom += std::exp(static_cast<double>(row[j] - mx));
        for (std::size_t j = 0; j < k; ++j)
            out.at2(i, j) = static_cast<T>(std::exp(static_cast<double>(row[j] - mx)) / denom);
    }
    return out;
}

/// Class-weighted, label-smoothed cross entropy.
///
/// loss = mean_i w_i * CE(q'_i, softmax(logits_i)) with
///   q'   = (1-eps) * q + eps/K      (q = target row)
///   w_i  = sum_k class_weights[k] * q_ik   (weights from the raw targets)
template <typename T>
NodePtr<T> weighted_smoothed_ce(NodePtr<T> logits, const BasicTensor<T>& targets,
                                const BasicTensor<T>& class_weights, double eps) {
    require_rank(logits->value, 2, "weighted_smoothed_ce logits");
    const std::size_t n = logits->value.dim(0), k = logits->value.dim(1);
    require_shape(targets, {n, k}, "weighted_smoothed_ce targets");
    require_shape(class_weights, {k}, "weighted_smoothed_ce class_weights");
    if (eps < 0.0 || eps >= 1.0)
        throw ValueError("weighted_smoothed_ce: smoothing must be in [0,1)");
    for (std::size_t j = 0; j < k; ++j)
        if (class_weights[j] <= T(0)) throw ValueError("weighted_smoothed_ce: weights must be > 0");
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < k; ++j) s += targets.at2(i, j);
        if (std::abs(s - 1.0) > 1e-6)
            throw ValueError("weighted_smoothed_ce: target row " + std::to_string(i) +
                             " sums to " + std::to_string(s) + ", expected 1");
    }

    // log-softmax, smoothed targets, per-sample weights
    BasicTensor<T> smooth({n, k}), probs({n, k});
    std::vector<T> wsample(n);
    double loss_acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const T* row = logits->value.ptr() + i * k;
        T mx = row[0];
        for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        double denom = 0;
        for (std::size_t j = 0; j < k; ++j) denom += std::exp(static_cast<double>(row[j] - mx));
        const double logz = std::log(denom) + static_cast<double>(mx);
        double w = 0, ce = 0;
        for (std::size_t j = 0; j < k; ++j) {
            const double q = targets.at2(i, j);
            const double qs = (1.0 - eps) * q + eps / static_cast<double>(k);
            smooth.at2(i, j) = static_cast<T>(qs);
            probs.at2(i, j) = static_cast<T>(std::exp(static_cast<double>(row[j]) - logz));
            w += static_cast<double>(class_weights[j]) * q;
            ce += qs * (logz - static_cast<double>(row[j]));
        }
        wsample[i] = static_cast<T>(w);
        loss_acc += w * ce;
    }
    BasicTensor<T> out({std::size_t(1)}, static_cast<T>(loss_acc / static_cast<double>(n)));
    out.check_finite("weighted_smoothed_ce");

    return make_node<T>(std::move(out), {logits},
                        [n, k, smooth, probs, wsample](NodeT<T>& self) {
        auto& ln = *self.inputs[0];
        ensure_grad(ln);
        const T g = self.grad[0] / static_cast<T>(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < k; ++j)
                ln.grad.at2(i, j) += g * wsample[i] * (probs.at2(i, j) - smooth.at2(i, j));
    });
}

}  // namespace duomic
