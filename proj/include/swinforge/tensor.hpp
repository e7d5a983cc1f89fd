#pragma once

// Dense-tensor engine with reverse-mode differentiation. It supports exactly
// the kernels the window-attention classifier and its loss need: batched
// matmul, softmax/log-softmax, layer norm, gelu, elementwise arithmetic and
// the data-movement ops (reshape/permute/concat/roll/gather). Ops are methods
// on a Tape; backward() replays the recorded steps in reverse.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "swinforge/common.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace swinforge::ag {

template <typename S>
struct TensorNode {
    std::vector<int64_t> shape;
    std::vector<S> data;
    std::vector<S> grad;  // same size as data iff requires_grad
    bool requires_grad = false;
};

// Value-semantic handle to shared tensor storage. Data is immutable after
// construction except through mutable_data(), which the trainer uses between
// steps; grad slots are mutated by backward().
template <typename S>
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int64_t> shape, bool requires_grad = false) {
        return from_data(std::move(shape), {}, requires_grad, /*fill=*/true);
    }

    static Tensor full(std::vector<int64_t> shape, S value, bool requires_grad = false) {
        Tensor t = zeros(std::move(shape), requires_grad);
        std::fill(t.node_->data.begin(), t.node_->data.end(), value);
        t.check_finite("tensor construction");
        return t;
    }

    static Tensor from_vector(std::vector<int64_t> shape, std::vector<S> data,
                              bool requires_grad = false) {
        Tensor t = from_data(std::move(shape), std::move(data), requires_grad, /*fill=*/false);
        t.check_finite("tensor construction");
        return t;
    }

    bool defined() const { return static_cast<bool>(node_); }
    const std::vector<int64_t>& shape() const { return node_->shape; }
    int64_t numel() const { return static_cast<int64_t>(node_->data.size()); }
    int64_t dim(size_t i) const { return node_->shape[i]; }
    size_t rank() const { return node_->shape.size(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }

    std::span<const S> data() const { return node_->data; }
    std::span<S> mutable_data() { return node_->data; }
    std::span<const S> grad() const { return node_->grad; }
    std::span<S> mutable_grad() { return node_->grad; }

    void zero_grad() {
        if (requires_grad()) std::fill(node_->grad.begin(), node_->grad.end(), S(0));
    }

    S item() const {
        if (numel() != 1)
            throw ContractError("item() requires a scalar tensor, got shape " +
                                format_shape(shape()));
        return node_->data[0];
    }

    // Identity of the underlying storage; used by the tape and optimizer to
    // key tensors.
    const void* id() const { return node_.get(); }

    void check_finite(const std::string& op) const {
        for (S v : node_->data) {
            if (!std::isfinite(v))
                throw NumericError(op + " produced non-finite values");
        }
    }

private:
    static Tensor from_data(std::vector<int64_t> shape, std::vector<S> data,
                            bool requires_grad, bool fill) {
        for (int64_t d : shape) {
            if (d <= 0) throw ShapeError("non-positive extent in shape " + format_shape(shape));
        }
        int64_t n = shape_numel(shape);
        if (fill) {
            data.assign(static_cast<size_t>(n), S(0));
        } else if (static_cast<int64_t>(data.size()) != n) {
            throw ShapeError("data length " + std::to_string(data.size()) +
                             " does not match shape " + format_shape(shape));
        }
        Tensor t;
        t.node_ = std::make_shared<TensorNode<S>>();
        t.node_->shape = std::move(shape);
        t.node_->data = std::move(data);
        t.node_->requires_grad = requires_grad;
        if (requires_grad) t.node_->grad.assign(static_cast<size_t>(n), S(0));
        return t;
    }

    std::shared_ptr<TensorNode<S>> node_;
};

namespace detail {

// Row-major strides for a shape.
inline std::vector<int64_t> strides_of(const std::vector<int64_t>& shape) {
    std::vector<int64_t> st(shape.size());
    int64_t acc = 1;
    for (size_t i = shape.size(); i-- > 0;) {
        st[i] = acc;
        acc *= shape[i];
    }
    return st;
}

// c[m x n] += a[m x k] * b[k x n]; c must be zero-initialized by the caller.
// The j-loop vectorizes without reassociation, and each output element is
// accumulated in a fixed k order, so results are bitwise reproducible for any
// thread count.
template <typename S>
void matmul2d_acc(const S* a, const S* b, S* c, int64_t m, int64_t k, int64_t n) {
    for (int64_t i = 0; i < m; ++i) {
        const S* arow = a + i * k;
        S* crow = c + i * n;
        for (int64_t p = 0; p < k; ++p) {
            const S av = arow[p];
            const S* brow = b + p * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <typename S>
void transpose2d(const S* a, S* at, int64_t rows, int64_t cols) {
    for (int64_t i = 0; i < rows; ++i)
        for (int64_t j = 0; j < cols; ++j) at[j * rows + i] = a[i * cols + j];
}

}  // namespace detail

// Records the forward pass and replays it in reverse. A tape and the tensors
// recorded on it belong to one logical thread. Construct with grad_enabled
// false for inference-only passes (nothing is recorded).
template <typename S>
class Tape {
public:
    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    size_t size() const { return steps_.size(); }

    // ---- matrix product -------------------------------------------------

    // a: [..., m, k], b: [..., k, n] with identical leading batch dims.
    Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
        const auto& sa = a.shape();
        const auto& sb = b.shape();
        if (sa.size() < 2 || sb.size() < 2 || sa.size() != sb.size())
            throw ShapeError("matmul rank mismatch: " + format_shape(sa) + " vs " +
                             format_shape(sb));
        size_t r = sa.size();
        int64_t batch = 1;
        for (size_t i = 0; i + 2 < r; ++i) {
            if (sa[i] != sb[i])
                throw ShapeError("matmul batch mismatch: " + format_shape(sa) + " vs " +
                                 format_shape(sb));
            batch *= sa[i];
        }
        int64_t m = sa[r - 2], k = sa[r - 1], k2 = sb[r - 2], n = sb[r - 1];
        if (k != k2)
            throw ShapeError("matmul inner dimension mismatch: " + format_shape(sa) + " vs " +
                             format_shape(sb));

        std::vector<int64_t> out_shape(sa.begin(), sa.end());
        out_shape[r - 2] = m;
        out_shape[r - 1] = n;
        Tensor<S> out = Tensor<S>::zeros(out_shape, wants_grad(a, b));

        const S* pa = a.data().data();
        const S* pb = b.data().data();
        S* pc = out.mutable_data().data();
        batched_matmul(pa, pb, pc, batch, m, k, n);
        out.check_finite("matmul");

        if (out.requires_grad()) {
            record([a, b, out, batch, m, k, n]() {
                const S* g = out.grad().data();
                if (a.requires_grad()) {
                    // da += g (m x n) * b^T (n x k), batched
                    std::vector<S> bt(static_cast<size_t>(k * n));
                    Tensor<S> amut = a;
                    S* da = amut.mutable_grad().data();
                    const S* pb2 = b.data().data();
                    for (int64_t t = 0; t < batch; ++t) {
                        detail::transpose2d(pb2 + t * k * n, bt.data(), k, n);
                        detail::matmul2d_acc(g + t * m * n, bt.data(), da + t * m * k, m, n, k);
                    }
                }
                if (b.requires_grad()) {
                    // db += a^T (k x m) * g (m x n), batched
                    std::vector<S> at(static_cast<size_t>(m * k));
                    Tensor<S> bmut = b;
                    S* db = bmut.mutable_grad().data();
                    const S* pa2 = a.data().data();
                    for (int64_t t = 0; t < batch; ++t) {
                        detail::transpose2d(pa2 + t * m * k, at.data(), m, k);
                        detail::matmul2d_acc(at.data(), g + t * m * n, db + t * k * n, k, m, n);
                    }
                }
            });
        }
        return out;
    }

    // ---- elementwise ----------------------------------------------------

    Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
        require_same_shape("add", a, b);
        Tensor<S> out = Tensor<S>::zeros(a.shape(), wants_grad(a, b));
        const S* pa = a.data().data();
        const S* pb = b.data().data();
        S* po = out.mutable_data().data();
        int64_t n = a.numel();
        for (int64_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
        out.check_finite("add");
        if (out.requires_grad()) {
            record([a, b, out]() {
                const S* g = out.grad().data();
                accumulate(a, [&](S* da, int64_t i) { da[i] += g[i]; });
                accumulate(b, [&](S* db, int64_t i) { db[i] += g[i]; });
            });
        }
        return out;
    }

    // x: [..., suffix...], y: [suffix...]; adds y to every leading slice of x.
    // This is the only broadcast in the engine (bias/gain style).
    Tensor<S> add_suffix(const Tensor<S>& x, const Tensor<S>& y) {
        const auto& sx = x.shape();
        const auto& sy = y.shape();
        if (sy.size() > sx.size() ||
            !std::equal(sy.begin(), sy.end(), sx.end() - sy.size()))
            throw ShapeError("add_suffix: " + format_shape(sy) + " is not a trailing suffix of " +
                             format_shape(sx));
        int64_t block = y.numel();
        int64_t outer = x.numel() / block;
        Tensor<S> out = Tensor<S>::zeros(sx, wants_grad(x, y));
        const S* px = x.data().data();
        const S* py = y.data().data();
        S* po = out.mutable_data().data();
        for (int64_t o = 0; o < outer; ++o)
            for (int64_t j = 0; j < block; ++j) po[o * block + j] = px[o * block + j] + py[j];
        out.check_finite("add_suffix");
        if (out.requires_grad()) {
            record([x, y, out, outer, block]() {
                const S* g = out.grad().data();
                accumulate(x, [&](S* dx, int64_t i) { dx[i] += g[i]; });
                if (y.requires_grad()) {
                    Tensor<S> ymut = y;
                    S* dy = ymut.mutable_grad().data();
                    for (int64_t o = 0; o < outer; ++o)
                        for (int64_t j = 0; j < block; ++j) dy[j] += g[o * block + j];
                }
            });
        }
        return out;
    }

    Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
        require_same_shape("mul", a, b);
        Tensor<S> out = Tensor<S>::zeros(a.shape(), wants_grad(a, b));
        const S* pa = a.data().data();
        const S* pb = b.data().data();
        S* po = out.mutable_data().data();
        int64_t n = a.numel();
        for (int64_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
        out.check_finite("mul");
        if (out.requires_grad()) {
            record([a, b, out]() {
                const S* g = out.grad().data();
                const S* pa2 = a.data().data();
                const S* pb2 = b.data().data();
                accumulate(a, [&](S* da, int64_t i) { da[i] += g[i] * pb2[i]; });
                accumulate(b, [&](S* db, int64_t i) { db[i] += g[i] * pa2[i]; });
            });
        }
        return out;
    }

    Tensor<S> scale(const Tensor<S>& x, S c) {
        Tensor<S> out = Tensor<S>::zeros(x.shape(), wants_grad(x));
        const S* px = x.data().data();
        S* po = out.mutable_data().data();
        int64_t n = x.numel();
        for (int64_t i = 0; i < n; ++i) po[i] = px[i] * c;
        out.check_finite("scale");
        if (out.requires_grad()) {
            record([x, out, c]() {
                const S* g = out.grad().data();
                accumulate(x, [&](S* dx, int64_t i) { dx[i] += g[i] * c; });
            });
        }
        return out;
    }

    Tensor<S> gelu(const Tensor<S>& x) {
        // Exact Gaussian CDF form: x * Phi(x).
        Tensor<S> out = Tensor<S>::zeros(x.shape(), wants_grad(x));
        const S* px = x.data().data();
        S* po = out.mutable_data().data();
        int64_t n = x.numel();
        const S inv_sqrt2 = S(0.70710678118654752440);
        for (int64_t i = 0; i < n; ++i) {
            S cdf = S(0.5) * (S(1) + std::erf(px[i] * inv_sqrt2));
            po[i] = px[i] * cdf;
        }
        out.check_finite("gelu");
        if (out.requires_grad()) {
            record([x, out, inv_sqrt2]() {
                const S* g = out.grad().data();
                const S* px2 = x.data().data();
                const S inv_sqrt2pi = S(0.39894228040143267794);
                accumulate(x, [&](S* dx, int64_t i) {
                    S v = px2[i];
                    S cdf = S(0.5) * (S(1) + std::erf(v * inv_sqrt2));
                    S pdf = inv_sqrt2pi * std::exp(S(-0.5) * v * v);
                    dx[i] += g[i] * (cdf + v * pdf);
                });
            });
        }
        return out;
    }

    // ---- softmax family (max-subtracted for stability) -------------------

    Tensor<S> softmax(const Tensor<S>& x, int axis) {
        auto [outer, len, inner] = axis_split("softmax", x, axis);
        Tensor<S> out = Tensor<S>::zeros(x.shape(), wants_grad(x));
        const S* px = x.data().data();
        S* po = out.mutable_data().data();
        for_each_lane(outer, len, inner, [&](int64_t base, int64_t stride) {
            S mx = px[base];
            for (int64_t i = 1; i < len; ++i) mx = std::max(mx, px[base + i * stride]);
            S sum = 0;
            for (int64_t i = 0; i < len; ++i) {
                S e = std::exp(px[base + i * stride] - mx);
                po[base + i * stride] = e;
                sum += e;
            }
            S inv = S(1) / sum;
            for (int64_t i = 0; i < len; ++i) po[base + i * stride] *= inv;
        });
        out.check_finite("softmax");
        if (out.requires_grad()) {
            record([x, out, outer, len = len, inner]() {
                const S* g = out.grad().data();
                const S* py = out.data().data();
                Tensor<S> xmut = x;
                S* dx = xmut.mutable_grad().data();
                for_each_lane(outer, len, inner, [&](int64_t base, int64_t stride) {
                    S dot = 0;
                    for (int64_t i = 0; i < len; ++i)
                        dot += g[base + i * stride] * py[base + i * stride];
                    for (int64_t i = 0; i < len; ++i)
                        dx[base + i * stride] +=
                            py[base + i * stride] * (g[base + i * stride] - dot);
                });
            });
        }
        return out;
    }

    Tensor<S> log_softmax(const Tensor<S>& x, int axis) {
        auto [outer, len, inner] = axis_split("log_softmax", x, axis);
        Tensor<S> out = Tensor<S>::zeros(x.shape(), wants_grad(x));
        const S* px = x.data().data();
        S* po = out.mutable_data().data();
        for_each_lane(outer, len, inner, [&](int64_t base, int64_t stride) {
            S mx = px[base];
            for (int64_t i = 1; i < len; ++i) mx = std::max(mx, px[base + i * stride]);
            S sum = 0;
            for (int64_t i = 0; i < len; ++i) sum += std::exp(px[base + i * stride] - mx);
            S lse = mx + std::log(sum);
            for (int64_t i = 0; i < len; ++i) po[base + i * stride] = px[base + i * stride] - lse;
        });
        out.check_finite("log_softmax");
        if (out.requires_grad()) {
            record([x, out, outer, len = len, inner]() {
                const S* g = out.grad().data();
                const S* py = out.data().data();
                Tensor<S> xmut = x;
                S* dx = xmut.mutable_grad().data();
                for_each_lane(outer, len, inner, [&](int64_t base, int64_t stride) {
                    S gsum = 0;
                    for (int64_t i = 0; i < len; ++i) gsum += g[base + i * stride];
                    for (int64_t i = 0; i < len; ++i)
                        dx[base + i * stride] +=
                            g[base + i * stride] - std::exp(py[base + i * stride]) * gsum;
                });
            });
        }
        return out;
    }

    // ---- layer norm over the last axis -----------------------------------

    Tensor<S> layer_norm(const Tensor<S>& x, const Tensor<S>& gain, const Tensor<S>& bias,
                         S eps) {
        const auto& sx = x.shape();
        if (sx.empty()) throw ShapeError("layer_norm requires rank >= 1");
        int64_t len = sx.back();
        if (gain.numel() != len || bias.numel() != len)
            throw ShapeError("layer_norm gain/bias length " + std::to_string(gain.numel()) +
                             "/" + std::to_string(bias.numel()) + " does not match last axis of " +
                             format_shape(sx));
        int64_t rows = x.numel() / len;
        Tensor<S> out = Tensor<S>::zeros(sx, wants_grad(x, gain, bias));
        const S* px = x.data().data();
        const S* pg = gain.data().data();
        const S* pb = bias.data().data();
        S* po = out.mutable_data().data();
        // Saved statistics for backward.
        auto saved = std::make_shared<std::vector<S>>(static_cast<size_t>(rows * 2));
        for (int64_t r = 0; r < rows; ++r) {
            const S* row = px + r * len;
            S mean = 0;
            for (int64_t i = 0; i < len; ++i) mean += row[i];
            mean /= S(len);
            S var = 0;
            for (int64_t i = 0; i < len; ++i) {
                S d = row[i] - mean;
                var += d * d;
            }
            var /= S(len);
            S inv = S(1) / std::sqrt(var + eps);
            (*saved)[2 * r] = mean;
            (*saved)[2 * r + 1] = inv;
            S* orow = po + r * len;
            for (int64_t i = 0; i < len; ++i) orow[i] = (row[i] - mean) * inv * pg[i] + pb[i];
        }
        out.check_finite("layer_norm");
        if (out.requires_grad()) {
            record([x, gain, bias, out, saved, rows, len]() {
                const S* g = out.grad().data();
                const S* px2 = x.data().data();
                const S* pg2 = gain.data().data();
                Tensor<S> xm = x, gm = gain, bm = bias;
                for (int64_t r = 0; r < rows; ++r) {
                    S mean = (*saved)[2 * r];
                    S inv = (*saved)[2 * r + 1];
                    const S* row = px2 + r * len;
                    const S* grow = g + r * len;
                    if (gain.requires_grad() || bias.requires_grad()) {
                        S* dg = gain.requires_grad() ? gm.mutable_grad().data() : nullptr;
                        S* db = bias.requires_grad() ? bm.mutable_grad().data() : nullptr;
                        for (int64_t i = 0; i < len; ++i) {
                            if (dg) dg[i] += grow[i] * (row[i] - mean) * inv;
                            if (db) db[i] += grow[i];
                        }
                    }
                    if (x.requires_grad()) {
                        S* dx = xm.mutable_grad().data() + r * len;
                        S sum_dyg = 0, sum_dyg_xhat = 0;
                        for (int64_t i = 0; i < len; ++i) {
                            S dyg = grow[i] * pg2[i];
                            S xhat = (row[i] - mean) * inv;
                            sum_dyg += dyg;
                            sum_dyg_xhat += dyg * xhat;
                        }
                        S n = S(len);
                        for (int64_t i = 0; i < len; ++i) {
                            S dyg = grow[i] * pg2[i];
                            S xhat = (row[i] - mean) * inv;
                            dx[i] += inv * (dyg - sum_dyg / n - xhat * sum_dyg_xhat / n);
                        }
                    }
                }
            });
        }
        return out;
    }

    // ---- data movement ----------------------------------------------------

    Tensor<S> reshape(const Tensor<S>& x, std::vector<int64_t> shape) {
        if (shape_numel(shape) != x.numel())
            throw ShapeError("reshape from " + format_shape(x.shape()) + " to " +
                             format_shape(shape) + " changes element count");
        Tensor<S> out = Tensor<S>::from_vector(
            std::move(shape), std::vector<S>(x.data().begin(), x.data().end()),
            wants_grad(x));
        if (out.requires_grad()) {
            record([x, out]() {
                const S* g = out.grad().data();
                accumulate(x, [&](S* dx, int64_t i) { dx[i] += g[i]; });
            });
        }
        return out;
    }

    Tensor<S> permute(const Tensor<S>& x, const std::vector<int>& perm) {
        const auto& sx = x.shape();
        if (perm.size() != sx.size())
            throw ShapeError("permute order size " + std::to_string(perm.size()) +
                             " does not match rank of " + format_shape(sx));
        std::vector<bool> seen(perm.size(), false);
        for (int p : perm) {
            if (p < 0 || p >= static_cast<int>(perm.size()) || seen[p])
                throw ShapeError("permute order is not a permutation");
            seen[p] = true;
        }
        std::vector<int64_t> out_shape(sx.size());
        for (size_t i = 0; i < perm.size(); ++i) out_shape[i] = sx[perm[i]];
        Tensor<S> out = Tensor<S>::zeros(out_shape, wants_grad(x));
        permute_copy(x.data().data(), out.mutable_data().data(), sx, perm);
        if (out.requires_grad()) {
            std::vector<int> inv(perm.size());
            for (size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = static_cast<int>(i);
            record([x, out, out_shape, inv]() {
                if (!x.requires_grad()) return;
                std::vector<S> gperm(static_cast<size_t>(out.numel()));
                permute_copy(out.grad().data(), gperm.data(), out_shape, inv);
                Tensor<S> xm = x;
                S* dx = xm.mutable_grad().data();
                for (int64_t i = 0; i < x.numel(); ++i) dx[i] += gperm[i];
            });
        }
        return out;
    }

    Tensor<S> concat(const std::vector<Tensor<S>>& xs, int axis) {
        if (xs.empty()) throw ShapeError("concat of zero tensors");
        const auto& s0 = xs[0].shape();
        if (axis < 0 || axis >= static_cast<int>(s0.size()))
            throw ShapeError("concat axis out of range for " + format_shape(s0));
        int64_t total_axis = 0;
        bool wants = false;
        for (const auto& x : xs) {
            const auto& s = x.shape();
            if (s.size() != s0.size())
                throw ShapeError("concat rank mismatch: " + format_shape(s0) + " vs " +
                                 format_shape(s));
            for (size_t i = 0; i < s.size(); ++i) {
                if (static_cast<int>(i) != axis && s[i] != s0[i])
                    throw ShapeError("concat shape mismatch: " + format_shape(s0) + " vs " +
                                     format_shape(s));
            }
            total_axis += s[axis];
            wants = wants || x.requires_grad();
        }
        std::vector<int64_t> out_shape(s0);
        out_shape[axis] = total_axis;
        int64_t outer = 1, inner = 1;
        for (int i = 0; i < axis; ++i) outer *= s0[i];
        for (size_t i = axis + 1; i < s0.size(); ++i) inner *= s0[i];
        Tensor<S> out = Tensor<S>::zeros(out_shape, grad_enabled_ && wants);
        S* po = out.mutable_data().data();
        int64_t out_row = total_axis * inner;
        int64_t off = 0;
        for (const auto& x : xs) {
            int64_t ax = x.shape()[axis];
            const S* px = x.data().data();
            for (int64_t o = 0; o < outer; ++o)
                std::copy(px + o * ax * inner, px + (o + 1) * ax * inner,
                          po + o * out_row + off * inner);
            off += ax;
        }
        if (out.requires_grad()) {
            record([xs, out, outer, inner, out_row, axis]() {
                const S* g = out.grad().data();
                int64_t off2 = 0;
                for (const auto& x : xs) {
                    int64_t ax = x.shape()[axis];
                    if (x.requires_grad()) {
                        Tensor<S> xm = x;
                        S* dx = xm.mutable_grad().data();
                        for (int64_t o = 0; o < outer; ++o) {
                            const S* gs = g + o * out_row + off2 * inner;
                            S* ds = dx + o * ax * inner;
                            for (int64_t i = 0; i < ax * inner; ++i) ds[i] += gs[i];
                        }
                    }
                    off2 += ax;
                }
            });
        }
        return out;
    }

    // Cyclic shift along the given axes. Positive shift moves data toward
    // higher indices (element i goes to (i + shift) mod len).
    Tensor<S> roll(const Tensor<S>& x, const std::vector<int64_t>& shifts,
                   const std::vector<int>& axes) {
        if (shifts.size() != axes.size())
            throw ShapeError("roll shifts/axes size mismatch");
        Tensor<S> out = Tensor<S>::zeros(x.shape(), wants_grad(x));
        roll_copy(x.data().data(), out.mutable_data().data(), x.shape(), shifts, axes);
        if (out.requires_grad()) {
            record([x, out, shifts, axes]() {
                if (!x.requires_grad()) return;
                std::vector<int64_t> inv(shifts.size());
                for (size_t i = 0; i < shifts.size(); ++i) inv[i] = -shifts[i];
                std::vector<S> gback(static_cast<size_t>(x.numel()));
                roll_copy(out.grad().data(), gback.data(), x.shape(), inv, axes);
                Tensor<S> xm = x;
                S* dx = xm.mutable_grad().data();
                for (int64_t i = 0; i < x.numel(); ++i) dx[i] += gback[i];
            });
        }
        return out;
    }

    // out[l, :] = table[indices[l], :]; gradient scatter-adds rows back.
    Tensor<S> gather_rows(const Tensor<S>& table, const std::vector<int64_t>& indices) {
        const auto& st = table.shape();
        if (st.size() != 2) throw ShapeError("gather_rows table must be rank 2, got " +
                                             format_shape(st));
        int64_t rows = st[0], cols = st[1];
        for (int64_t idx : indices) {
            if (idx < 0 || idx >= rows)
                throw ShapeError("gather_rows index " + std::to_string(idx) +
                                 " out of range for table " + format_shape(st));
        }
        int64_t l = static_cast<int64_t>(indices.size());
        Tensor<S> out = Tensor<S>::zeros({l, cols}, wants_grad(table));
        const S* pt = table.data().data();
        S* po = out.mutable_data().data();
        for (int64_t i = 0; i < l; ++i)
            std::copy(pt + indices[i] * cols, pt + (indices[i] + 1) * cols, po + i * cols);
        if (out.requires_grad()) {
            record([table, out, indices, cols, l]() {
                if (!table.requires_grad()) return;
                Tensor<S> tm = table;
                S* dt = tm.mutable_grad().data();
                const S* g = out.grad().data();
                for (int64_t i = 0; i < l; ++i) {
                    S* drow = dt + indices[i] * cols;
                    const S* grow = g + i * cols;
                    for (int64_t j = 0; j < cols; ++j) drow[j] += grow[j];
                }
            });
        }
        return out;
    }

    // ---- reductions -------------------------------------------------------

    Tensor<S> sum_axis(const Tensor<S>& x, int axis) { return reduce_axis(x, axis, false); }
    Tensor<S> mean_axis(const Tensor<S>& x, int axis) { return reduce_axis(x, axis, true); }

    Tensor<S> sum_all(const Tensor<S>& x) { return reduce_all(x, false); }
    Tensor<S> mean_all(const Tensor<S>& x) { return reduce_all(x, true); }

    // ---- backward ----------------------------------------------------------

    // Seeds d(loss)/d(loss) = 1 and replays every recorded step once, in
    // reverse order. Gradients accumulate (+=) into requires_grad tensors, so
    // a tensor used twice in the graph receives both contributions. A tape can
    // be backpropagated once; a second call is an error.
    void backward(const Tensor<S>& loss) {
        if (consumed_)
            throw ContractError("backward() called twice on the same tape");
        if (loss.numel() != 1)
            throw ContractError("backward() requires a scalar loss, got shape " +
                                format_shape(loss.shape()));
        if (!loss.requires_grad())
            throw ContractError("backward() loss does not depend on any differentiable tensor");
        consumed_ = true;
        Tensor<S> lm = loss;
        lm.mutable_grad()[0] += S(1);
        for (size_t i = steps_.size(); i-- > 0;) steps_[i]();
    }

private:
    std::vector<std::function<void()>> steps_;
    bool grad_enabled_;
    bool consumed_ = false;

    template <typename... Ts>
    bool wants_grad(const Ts&... ts) {
        return grad_enabled_ && (ts.requires_grad() || ...);
    }

    void record(std::function<void()> fn) { steps_.push_back(std::move(fn)); }

    static void require_same_shape(const char* op, const Tensor<S>& a, const Tensor<S>& b) {
        if (a.shape() != b.shape())
            throw ShapeError(std::string(op) + " shape mismatch: " + format_shape(a.shape()) +
                             " vs " + format_shape(b.shape()));
    }

    template <typename F>
    static void accumulate(const Tensor<S>& t, F fn) {
        if (!t.requires_grad()) return;
        Tensor<S> tm = t;
        S* g = tm.mutable_grad().data();
        int64_t n = t.numel();
        for (int64_t i = 0; i < n; ++i) fn(g, i);
    }

    static std::tuple<int64_t, int64_t, int64_t> axis_split(const char* op, const Tensor<S>& x,
                                                            int axis) {
        const auto& s = x.shape();
        if (axis < 0 || axis >= static_cast<int>(s.size()))
            throw ShapeError(std::string(op) + " axis " + std::to_string(axis) +
                             " out of range for " + format_shape(s));
        int64_t outer = 1, inner = 1;
        for (int i = 0; i < axis; ++i) outer *= s[i];
        for (size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
        return {outer, s[axis], inner};
    }

    template <typename F>
    static void for_each_lane(int64_t outer, int64_t len, int64_t inner, F fn) {
        for (int64_t o = 0; o < outer; ++o)
            for (int64_t i = 0; i < inner; ++i) fn(o * len * inner + i, inner);
    }

    static void permute_copy(const S* src, S* dst, const std::vector<int64_t>& src_shape,
                             const std::vector<int>& perm) {
        size_t r = src_shape.size();
        std::vector<int64_t> out_shape(r);
        for (size_t i = 0; i < r; ++i) out_shape[i] = src_shape[perm[i]];
        auto src_strides = detail::strides_of(src_shape);
        std::vector<int64_t> gather(r);
        for (size_t i = 0; i < r; ++i) gather[i] = src_strides[perm[i]];
        int64_t total = shape_numel(src_shape);
        std::vector<int64_t> idx(r, 0);
        int64_t src_off = 0;
        for (int64_t lin = 0; lin < total; ++lin) {
            dst[lin] = src[src_off];
            for (size_t d = r; d-- > 0;) {
                idx[d]++;
                src_off += gather[d];
                if (idx[d] < out_shape[d]) break;
                src_off -= gather[d] * out_shape[d];
                idx[d] = 0;
            }
        }
    }

    static void roll_copy(const S* src, S* dst, const std::vector<int64_t>& shape,
                          const std::vector<int64_t>& shifts, const std::vector<int>& axes) {
        size_t r = shape.size();
        std::vector<int64_t> shift_by_axis(r, 0);
        for (size_t i = 0; i < axes.size(); ++i) {
            int a = axes[i];
            if (a < 0 || a >= static_cast<int>(r))
                throw ShapeError("roll axis out of range for " + format_shape(shape));
            int64_t len = shape[a];
            shift_by_axis[a] = ((shifts[i] % len) + len) % len;
        }
        auto strides = detail::strides_of(shape);
        int64_t total = shape_numel(shape);
        std::vector<int64_t> idx(r, 0);
        for (int64_t lin = 0; lin < total; ++lin) {
            int64_t dst_off = 0;
            for (size_t d = 0; d < r; ++d) {
                int64_t nd = idx[d] + shift_by_axis[d];
                if (nd >= shape[d]) nd -= shape[d];
                dst_off += nd * strides[d];
            }
            dst[dst_off] = src[lin];
            for (size_t d = r; d-- > 0;) {
                idx[d]++;
                if (idx[d] < shape[d]) break;
                idx[d] = 0;
            }
        }
    }

    Tensor<S> reduce_axis(const Tensor<S>& x, int axis, bool mean) {
        auto [outer, len, inner] = axis_split(mean ? "mean_axis" : "sum_axis", x, axis);
        const auto& s = x.shape();
        std::vector<int64_t> out_shape;
        for (size_t i = 0; i < s.size(); ++i)
            if (static_cast<int>(i) != axis) out_shape.push_back(s[i]);
        if (out_shape.empty()) out_shape.push_back(1);
        Tensor<S> out = Tensor<S>::zeros(out_shape, wants_grad(x));
        const S* px = x.data().data();
        S* po = out.mutable_data().data();
        S factor = mean ? S(1) / S(len) : S(1);
        for (int64_t o = 0; o < outer; ++o) {
            for (int64_t i = 0; i < inner; ++i) {
                S acc = 0;
                for (int64_t k = 0; k < len; ++k) acc += px[(o * len + k) * inner + i];
                po[o * inner + i] = acc * factor;
            }
        }
        out.check_finite(mean ? "mean_axis" : "sum_axis");
        if (out.requires_grad()) {
            record([x, out, outer, len = len, inner, factor]() {
                if (!x.requires_grad()) return;
                const S* g = out.grad().data();
                Tensor<S> xm = x;
                S* dx = xm.mutable_grad().data();
                for (int64_t o = 0; o < outer; ++o)
                    for (int64_t k = 0; k < len; ++k)
                        for (int64_t i = 0; i < inner; ++i)
                            dx[(o * len + k) * inner + i] += g[o * inner + i] * factor;
            });
        }
        return out;
    }

    Tensor<S> reduce_all(const Tensor<S>& x, bool mean) {
        Tensor<S> out = Tensor<S>::zeros({1}, wants_grad(x));
        const S* px = x.data().data();
        int64_t n = x.numel();
        S acc = 0;
        for (int64_t i = 0; i < n; ++i) acc += px[i];
        S factor = mean ? S(1) / S(n) : S(1);
        out.mutable_data()[0] = acc * factor;
        out.check_finite(mean ? "mean_all" : "sum_all");
        if (out.requires_grad()) {
            record([x, out, factor]() {
                const S g = out.grad()[0];
                accumulate(x, [&](S* dx, int64_t i) { dx[i] += g * factor; });
            });
        }
        return out;
    }

    void batched_matmul(const S* a, const S* b, S* c, int64_t batch, int64_t m, int64_t k,
                        int64_t n) {
        int64_t rows = batch * m;
        (void)rows;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (max_threads() > 1 && rows * k * n > 262144)
#endif
        for (int64_t t = 0; t < batch; ++t)
            detail::matmul2d_acc(a + t * m * k, b + t * k * n, c + t * m * n, m, k, n);
    }
};

}  // namespace swinforge::ag
