#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "propex/tensor.hpp"

namespace propex {

// Handle into a Graph tape. Carries the tape generation so that uses of
// stale handles (after backward/clear) are rejected instead of reading
// freed values.
struct Var {
    int32_t idx = -1;
    uint32_t gen = 0;
};

// Reverse-mode tape. Ops append nodes; backward() walks the tape in
// reverse, accumulates into Parameter::grad and clears the tape.
template <class Float>
class Graph {
public:
    explicit Graph(bool check_finite = false) : check_finite_(check_finite) {}

    void set_check_finite(bool on) { check_finite_ = on; }

    // Forward-only mode: backward closures are still recorded (they are
    // cheap), but activations can be dropped eagerly via clear().
    Var input(Tensor<Float> value) {
        check(value, "input");
        return push(std::move(value), {}, nullptr);
    }

    Var param(Parameter<Float>& p) {
        auto it = param_vars_.find(&p);
        if (it != param_vars_.end()) return Var{it->second, gen_};
        Var v = push(p.value, {}, &p);
        param_vars_[&p] = v.idx;
        return v;
    }

    const Tensor<Float>& value(Var v) const { return node(v).value; }
    const Tensor<Float>& grad(Var v) const { return node(v).grad; }

    // -------- ops --------

    Var matmul(Var a, Var b) {
        const auto& ta = node(a).value;
        const auto& tb = node(b).value;
        if (ta.rank() != 2 || tb.rank() != 2 || ta.shape[1] != tb.shape[0])
            throw ShapeError("matmul: incompatible shapes " + shape_str(ta.shape) + " x " +
                             shape_str(tb.shape));
        Tensor<Float> out({ta.shape[0], tb.shape[1]});
        matmul_into(ta, tb, out);
        Var r = push(std::move(out), {a, b}, nullptr);
        set_backward(r, [this, a, b, r]() {
            const auto& go = node(r).grad;
            const auto& va = node(a).value;
            const auto& vb = node(b).value;
            // dA += dC * B^T
            {
                auto& ga = node_mut(a).grad;
                const int64_t m = va.shape[0], k = va.shape[1], n = vb.shape[1];
                for (int64_t i = 0; i < m; ++i)
                    for (int64_t j = 0; j < n; ++j) {
                        const Float g = go.data[i * n + j];
                        if (g == Float(0)) continue;
                        for (int64_t p = 0; p < k; ++p) ga.data[i * k + p] += g * vb.data[p * n + j];
                    }
            }
            // dB += A^T * dC
            {
                auto& gb = node_mut(b).grad;
                const int64_t m = va.shape[0], k = va.shape[1], n = vb.shape[1];
                for (int64_t p = 0; p < k; ++p)
                    for (int64_t i = 0; i < m; ++i) {
                        const Float av = va.data[i * k + p];
                        if (av == Float(0)) continue;
                        for (int64_t j = 0; j < n; ++j) gb.data[p * n + j] += av * go.data[i * n + j];
                    }
            }
        });
        return r;
    }

    // Same-shape add, or trailing-axis bias broadcast when b is 1-D.
    Var add(Var a, Var b) {
        const auto& ta = node(a).value;
        const auto& tb = node(b).value;
        Tensor<Float> out = ta;
        if (ta.same_shape(tb)) {
            for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += tb.data[i];
        } else if (tb.rank() == 1 && ta.cols() == tb.shape[0]) {
            const int64_t n = ta.cols();
            for (int64_t i = 0; i < ta.numel(); ++i) out.data[i] += tb.data[i % n];
        } else {
            throw ShapeError("add: incompatible shapes " + shape_str(ta.shape) + " + " +
                             shape_str(tb.shape));
        }
        Var r = push(std::move(out), {a, b}, nullptr);
        set_backward(r, [this, a, b, r]() {
            const auto& go = node(r).grad;
            auto& ga = node_mut(a).grad;
            for (size_t i = 0; i < go.data.size(); ++i) ga.data[i] += go.data[i];
            auto& gb = node_mut(b).grad;
            if (gb.data.size() == go.data.size()) {
                for (size_t i = 0; i < go.data.size(); ++i) gb.data[i] += go.data[i];
            } else {
                const int64_t n = static_cast<int64_t>(gb.data.size());
                for (int64_t i = 0; i < static_cast<int64_t>(go.data.size()); ++i)
                    gb.data[i % n] += go.data[i];
            }
        });
        return r;
    }

    // Elementwise product; like add, a 1-D b broadcasts over rows.
    Var mul(Var a, Var b) {
        const auto& ta = node(a).value;
        const auto& tb = node(b).value;
        Tensor<Float> out = ta;
        if (ta.same_shape(tb)) {
            for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= tb.data[i];
        } else if (tb.rank() == 1 && ta.cols() == tb.shape[0]) {
            const int64_t n = ta.cols();
            for (int64_t i = 0; i < ta.numel(); ++i) out.data[i] *= tb.data[i % n];
        } else {
            throw ShapeError("mul: incompatible shapes " + shape_str(ta.shape) + " * " +
                             shape_str(tb.shape));
        }
        Var r = push(std::move(out), {a, b}, nullptr);
        set_backward(r, [this, a, b, r]() {
            const auto& go = node(r).grad;
            const auto& va = node(a).value;
            const auto& vb = node(b).value;
            auto& ga = node_mut(a).grad;
            auto& gb = node_mut(b).grad;
            if (gb.data.size() == go.data.size()) {
                for (size_t i = 0; i < go.data.size(); ++i) {
                    ga.data[i] += go.data[i] * vb.data[i];
                    gb.data[i] += go.data[i] * va.data[i];
                }
            } else {
                const int64_t n = static_cast<int64_t>(gb.data.size());
                for (int64_t i = 0; i < static_cast<int64_t>(go.data.size()); ++i) {
                    ga.data[i] += go.data[i] * vb.data[i % n];
                    gb.data[i % n] += go.data[i] * va.data[i];
                }
            }
        });
        return r;
    }

    Var scale(Var a, Float s) {
        Tensor<Float> out = node(a).value;
        for (auto& v : out.data) v *= s;
        Var r = push(std::move(out), {a}, nullptr);
        set_backward(r, [this, a, r, s]() {
            const auto& go = node(r).grad;
            auto& ga = node_mut(a).grad;
            for (size_t i = 0; i < go.data.size(); ++i) ga.data[i] += go.data[i] * s;
        });
        return r;
    }

    Var relu(Var a) {
        Tensor<Float> out = node(a).value;
        for (auto& v : out.data) v = v > Float(0) ? v : Float(0);
        Var r = push(std::move(out), {a}, nullptr);
        set_backward(r, [this, a, r]() {
            const auto& go = node(r).grad;
            const auto& va = node(a).value;
            auto& ga = node_mut(a).grad;
            for (size_t i = 0; i < go.data.size(); ++i)
                if (va.data[i] > Float(0)) ga.data[i] += go.data[i];
        });
        return r;
    }

    Var sigmoid(Var a) {
        Tensor<Float> out = node(a).value;
        for (auto& v : out.data) v = Float(1) / (Float(1) + std::exp(-v));
        Var r = push(std::move(out), {a}, nullptr);
        set_backward(r, [this, a, r]() {
            const auto& go = node(r).grad;
            const auto& vo = node(r).value;
            auto& ga = node_mut(a).grad;
            for (size_t i = 0; i < go.data.size(); ++i)
                ga.data[i] += go.data[i] * vo.data[i] * (Float(1) - vo.data[i]);
        });
        return r;
    }

    Var tanh_op(Var a) {
        Tensor<Float> out = node(a).value;
        for (auto& v : out.data) v = std::tanh(v);
        Var r = push(std::move(out), {a}, nullptr);
        set_backward(r, [this, a, r]() {
            const auto& go = node(r).grad;
            const auto& vo = node(r).value;
            auto& ga = node_mut(a).grad;
            for (size_t i = 0; i < go.data.size(); ++i)
                ga.data[i] += go.data[i] * (Float(1) - vo.data[i] * vo.data[i]);
        });
        return r;
    }

    // Softmax along the last axis.
    Var softmax(Var a) {
        const auto& ta = node(a).value;
        Tensor<Float> out = ta;
        const int64_t n = ta.cols();
        const int64_t m = ta.numel() / n;
        for (int64_t i = 0; i < m; ++i) {
            Float* row = out.data.data() + i * n;
            Float mx = row[0];
            for (int64_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
            Float sum = Float(0);
            for (int64_t j = 0; j < n; ++j) {
                row[j] = std::exp(row[j] - mx);
                sum += row[j];
            }
            for (int64_t j = 0; j < n; ++j) row[j] /= sum;
        }
        Var r = push(std::move(out), {a}, nullptr);
        set_backward(r, [this, a, r]() {
            const auto& go = node(r).grad;
            const auto& vo = node(r).value;
            auto& ga = node_mut(a).grad;
            const int64_t n = vo.cols();
            const int64_t m = vo.numel() / n;
            for (int64_t i = 0; i < m; ++i) {
                const Float* y = vo.data.data() + i * n;
                const Float* dy = go.data.data() + i * n;
                Float dot = Float(0);
                for (int64_t j = 0; j < n; ++j) dot += y[j] * dy[j];
                Float* dx = ga.data.data() + i * n;
                for (int64_t j = 0; j < n; ++j) dx[j] += y[j] * (dy[j] - dot);
            }
        });
        return r;
    }

    // Normalizes the last axis to zero mean / unit variance. Affine scale
    // and shift, when wanted, are separate mul/add ops so the raw
    // normalization stays checkable.
    Var layer_norm(Var a) {
        constexpr double kEps = 1e-9;
        const auto& ta = node(a).value;
        const int64_t n = ta.cols();
        const int64_t m = ta.numel() / n;
        Tensor<Float> out = ta;
        std::vector<Float> inv_std(static_cast<size_t>(m));
        for (int64_t i = 0; i < m; ++i) {
            Float* row = out.data.data() + i * n;
            double mean = 0;
            for (int64_t j = 0; j < n; ++j) mean += row[j];
            mean /= n;
            double var = 0;
            for (int64_t j = 0; j < n; ++j) {
                double d = row[j] - mean;
                var += d * d;
            }
            var /= n;
            const double is = 1.0 / std::sqrt(var + kEps);
            inv_std[static_cast<size_t>(i)] = static_cast<Float>(is);
            for (int64_t j = 0; j < n; ++j)
                row[j] = static_cast<Float>((row[j] - mean) * is);
        }
        Var r = push(std::move(out), {a}, nullptr);
        set_backward(r, [this, a, r, inv_std = std::move(inv_std)]() {
            const auto& go = node(r).grad;
            const auto& vo = node(r).value;
            auto& ga = node_mut(a).grad;
            const int64_t n = vo.cols();
            const int64_t m = vo.numel() / n;
            for (int64_t i = 0; i < m; ++i) {
                const Float* y = vo.data.data() + i * n;
                const Float* dy = go.data.data() + i * n;
                double mean_dy = 0, mean_dyy = 0;
                for (int64_t j = 0; j < n; ++j) {
                    mean_dy += dy[j];
                    mean_dyy += dy[j] * y[j];
                }
                mean_dy /= n;
                mean_dyy /= n;
                const double is = inv_std[static_cast<size_t>(i)];
                Float* dx = ga.data.data() + i * n;
                for (int64_t j = 0; j < n; ++j)
                    dx[j] += static_cast<Float>(is * (dy[j] - mean_dy - y[j] * mean_dyy));
            }
        });
        return r;
    }

    // Gathers rows of a 2-D table; backward scatter-adds.
    Var embedding_lookup(Var table, const std::vector<int>& ids) {
        const auto& tt = node(table).value;
        if (tt.rank() != 2) throw ShapeError("embedding_lookup: table must be 2-D, got " + shape_str(tt.shape));
        const int64_t v = tt.shape[0], d = tt.shape[1];
        if (ids.empty()) throw ShapeError("embedding_lookup: empty id sequence");
        Tensor<Float> out({static_cast<int64_t>(ids.size()), d});
        for (size_t i = 0; i < ids.size(); ++i) {
            if (ids[i] < 0 || ids[i] >= v)
                throw DataError("embedding_lookup: id " + std::to_string(ids[i]) + " out of range [0," +
                                std::to_string(v) + ")");
            std::copy_n(tt.data.data() + int64_t(ids[i]) * d, d, out.data.data() + int64_t(i) * d);
        }
        Var r = push(std::move(out), {table}, nullptr);
        set_backward(r, [this, table, r, ids]() {
            const auto& go = node(r).grad;
            auto& gt = node_mut(table).grad;
            const int64_t d = gt.shape[1];
            for (size_t i = 0; i < ids.size(); ++i) {
                const Float* src = go.data.data() + int64_t(i) * d;
                Float* dst = gt.data.data() + int64_t(ids[i]) * d;
                for (int64_t j = 0; j < d; ++j) dst[j] += src[j];
            }
        });
        return r;
    }

    Var concat(const std::vector<Var>& parts, int axis) {
        if (parts.empty()) throw ShapeError("concat: no inputs");
        const int rank = node(parts[0]).value.rank();
        if (axis < 0 || axis >= rank || rank > 2)
            throw ShapeError("concat: axis " + std::to_string(axis) + " invalid for rank " +
                             std::to_string(rank));
        if (rank == 1 || axis == 0) {
            int64_t total = 0;
            const int64_t ncols = node(parts[0]).value.cols();
            for (Var p : parts) {
                const auto& t = node(p).value;
                if (t.rank() != rank || (rank == 2 && t.shape[1] != ncols))
                    throw ShapeError("concat: mismatched shapes " + shape_str(node(parts[0]).value.shape) +
                                     " vs " + shape_str(t.shape));
                total += (rank == 2) ? t.shape[0] : t.numel();
            }
            Tensor<Float> out(rank == 2 ? std::vector<int64_t>{total, ncols}
                                        : std::vector<int64_t>{total});
            int64_t off = 0;
            for (Var p : parts) {
                const auto& t = node(p).value;
                std::copy(t.data.begin(), t.data.end(), out.data.begin() + off);
                off += t.numel();
            }
            Var r = push(std::move(out), parts, nullptr);
            set_backward(r, [this, parts, r]() {
                const auto& go = node(r).grad;
                int64_t off = 0;
                for (Var p : parts) {
                    auto& gp = node_mut(p).grad;
                    for (int64_t i = 0; i < gp.numel(); ++i) gp.data[i] += go.data[off + i];
                    off += gp.numel();
                }
            });
            return r;
        }
        // axis == 1, rank 2
        const int64_t nrows = node(parts[0]).value.shape[0];
        int64_t total = 0;
        for (Var p : parts) {
            const auto& t = node(p).value;
            if (t.rank() != 2 || t.shape[0] != nrows)
                throw ShapeError("concat: mismatched shapes " + shape_str(node(parts[0]).value.shape) +
                                 " vs " + shape_str(t.shape));
            total += t.shape[1];
        }
        Tensor<Float> out({nrows, total});
        int64_t off = 0;
        for (Var p : parts) {
            const auto& t = node(p).value;
            const int64_t c = t.shape[1];
            for (int64_t i = 0; i < nrows; ++i)
                std::copy_n(t.data.data() + i * c, c, out.data.data() + i * total + off);
            off += c;
        }
        Var r = push(std::move(out), parts, nullptr);
        set_backward(r, [this, parts, r, nrows, total]() {
            const auto& go = node(r).grad;
            int64_t off = 0;
            for (Var p : parts) {
                auto& gp = node_mut(p).grad;
                const int64_t c = gp.shape[1];
                for (int64_t i = 0; i < nrows; ++i)
                    for (int64_t j = 0; j < c; ++j) gp.data[i * c + j] += go.data[i * total + off + j];
                off += c;
            }
        });
        return r;
    }

    Var slice(Var a, int axis, int64_t begin, int64_t end) {
        const auto& ta = node(a).value;
        const int rank = ta.rank();
        if (axis < 0 || axis >= rank || rank > 2)
            throw ShapeError("slice: axis " + std::to_string(axis) + " invalid for shape " +
                             shape_str(ta.shape));
        if (begin < 0 || end > ta.shape[axis] || begin >= end)
            throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                             ") invalid for shape " + shape_str(ta.shape));
        if (rank == 1) {
            Tensor<Float> out({end - begin});
            std::copy(ta.data.begin() + begin, ta.data.begin() + end, out.data.begin());
            Var r = push(std::move(out), {a}, nullptr);
            set_backward(r, [this, a, r, begin]() {
                const auto& go = node(r).grad;
                auto& ga = node_mut(a).grad;
                for (int64_t i = 0; i < go.numel(); ++i) ga.data[begin + i] += go.data[i];
            });
            return r;
        }
        const int64_t nrows = ta.shape[0], ncols = ta.shape[1];
        if (axis == 0) {
            Tensor<Float> out({end - begin, ncols});
            std::copy(ta.data.begin() + begin * ncols, ta.data.begin() + end * ncols, out.data.begin());
            Var r = push(std::move(out), {a}, nullptr);
            set_backward(r, [this, a, r, begin, ncols]() {
                const auto& go = node(r).grad;
                auto& ga = node_mut(a).grad;
                for (int64_t i = 0; i < go.numel(); ++i) ga.data[begin * ncols + i] += go.data[i];
            });
            return r;
        }
        Tensor<Float> out({nrows, end - begin});
        const int64_t w = end - begin;
        for (int64_t i = 0; i < nrows; ++i)
            std::copy_n(ta.data.data() + i * ncols + begin, w, out.data.data() + i * w);
        Var r = push(std::move(out), {a}, nullptr);
        set_backward(r, [this, a, r, begin, ncols, w, nrows]() {
            const auto& go = node(r).grad;
            auto& ga = node_mut(a).grad;
            for (int64_t i = 0; i < nrows; ++i)
                for (int64_t j = 0; j < w; ++j) ga.data[i * ncols + begin + j] += go.data[i * w + j];
        });
        return r;
    }

    Var transpose(Var a) {
        const auto& ta = node(a).value;
        if (ta.rank() != 2) throw ShapeError("transpose: need 2-D, got " + shape_str(ta.shape));
        const int64_t m = ta.shape[0], n = ta.shape[1];
        Tensor<Float> out({n, m});
        for (int64_t i = 0; i < m; ++i)
            for (int64_t j = 0; j < n; ++j) out.data[j * m + i] = ta.data[i * n + j];
        Var r = push(std::move(out), {a}, nullptr);
        set_backward(r, [this, a, r, m, n]() {
            const auto& go = node(r).grad;
            auto& ga = node_mut(a).grad;
            for (int64_t i = 0; i < m; ++i)
                for (int64_t j = 0; j < n; ++j) ga.data[i * n + j] += go.data[j * m + i];
        });
        return r;
    }

    Var sum(Var a) {
        const auto& ta = node(a).value;
        Float s = Float(0);
        for (Float v : ta.data) s += v;
        Var r = push(Tensor<Float>::scalar(s), {a}, nullptr);
        set_backward(r, [this, a, r]() {
            const Float g = node(r).grad.data[0];
            auto& ga = node_mut(a).grad;
            for (auto& v : ga.data) v += g;
        });
        return r;
    }

    // Writes `value` where mask byte is 1. Mask is either per-element or a
    // last-axis vector broadcast over rows. Used for attention padding and
    // causal masks.
    Var mask_fill(Var a, const std::vector<uint8_t>& mask, Float value) {
        const auto& ta = node(a).value;
        const size_t n = static_cast<size_t>(ta.cols());
        if (mask.size() != ta.data.size() && mask.size() != n)
            throw ShapeError("mask_fill: mask length " + std::to_string(mask.size()) +
                             " does not fit shape " + shape_str(ta.shape));
        Tensor<Float> out = ta;
        const bool broadcast = mask.size() == n && mask.size() != ta.data.size();
        for (size_t i = 0; i < out.data.size(); ++i)
            if (mask[broadcast ? i % n : i]) out.data[i] = value;
        Var r = push(std::move(out), {a}, nullptr);
        set_backward(r, [this, a, r, mask, broadcast, n]() {
            const auto& go = node(r).grad;
            auto& ga = node_mut(a).grad;
            for (size_t i = 0; i < go.data.size(); ++i)
                if (!mask[broadcast ? i % n : i]) ga.data[i] += go.data[i];
        });
        return r;
    }

    // Mean per-token smoothed negative log-likelihood over unmasked rows.
    // logits: (L x V); targets: one id per row; keep[i] == 0 marks padding.
    Var cross_entropy_mean(Var logits, const std::vector<int>& targets,
                           const std::vector<uint8_t>& keep, Float label_smoothing = Float(0)) {
        const auto& tl = node(logits).value;
        if (tl.rank() != 2) throw ShapeError("cross_entropy_mean: logits must be 2-D, got " + shape_str(tl.shape));
        const int64_t rows = tl.shape[0], v = tl.shape[1];
        if (static_cast<int64_t>(targets.size()) != rows || static_cast<int64_t>(keep.size()) != rows)
            throw ShapeError("cross_entropy_mean: got " + std::to_string(targets.size()) +
                             " targets for logits " + shape_str(tl.shape));
        int64_t kept = 0;
        for (auto k : keep) kept += k ? 1 : 0;
        if (kept == 0) throw NumericError("cross_entropy_mean: all rows masked");

        // log-softmax per row, loss against the smoothed target distribution
        // q = (1-eps)*onehot + eps/V.
        Tensor<Float> logp({rows, v});
        double total = 0;
        const double eps = static_cast<double>(label_smoothing);
        for (int64_t i = 0; i < rows; ++i) {
            const Float* row = tl.data.data() + i * v;
            double mx = row[0];
            for (int64_t j = 1; j < v; ++j) mx = std::max<double>(mx, row[j]);
            double lse = 0;
            for (int64_t j = 0; j < v; ++j) lse += std::exp(static_cast<double>(row[j]) - mx);
            lse = mx + std::log(lse);
            Float* lp = logp.data.data() + i * v;
            for (int64_t j = 0; j < v; ++j) lp[j] = static_cast<Float>(row[j] - lse);
            if (!keep[static_cast<size_t>(i)]) continue;
            if (targets[static_cast<size_t>(i)] < 0 || targets[static_cast<size_t>(i)] >= v)
                throw DataError("cross_entropy_mean: target id out of range");
            double loss_i = -(1.0 - eps) * lp[targets[static_cast<size_t>(i)]];
            if (eps > 0) {
                double mean_lp = 0;
                for (int64_t j = 0; j < v; ++j) mean_lp += lp[j];
                loss_i -= eps * mean_lp / v;
            }
            total += loss_i;
        }
        const double mean = total / kept;
        Var r = push(Tensor<Float>::scalar(static_cast<Float>(mean)), {logits}, nullptr);
        set_backward(r, [this, logits, r, targets, keep, kept, logp = std::move(logp), eps]() {
            const Float g = node(r).grad.data[0];
            auto& gl = node_mut(logits).grad;
            const int64_t rows = gl.shape[0], v = gl.shape[1];
            for (int64_t i = 0; i < rows; ++i) {
                if (!keep[static_cast<size_t>(i)]) continue;
                const Float* lp = logp.data.data() + i * v;
                Float* dst = gl.data.data() + i * v;
                const Float w = g / static_cast<Float>(kept);
                for (int64_t j = 0; j < v; ++j) {
                    double p = std::exp(static_cast<double>(lp[j]));
                    double q = eps / v + (j == targets[static_cast<size_t>(i)] ? 1.0 - eps : 0.0);
                    dst[j] += static_cast<Float>(w * (p - q));
                }
            }
        });
        return r;
    }

    // -------- backward --------

    // Accumulates d(loss)/d(param) into every reachable Parameter::grad,
    // then clears the tape. Returns the loss value.
    double backward(Var loss) {
        Node& ln = node_mut(loss);  // validates generation
        if (ln.value.numel() != 1)
            throw NumericError("backward: loss must be scalar, got shape " + shape_str(ln.value.shape));
        const double loss_value = static_cast<double>(ln.value.data[0]);
        ln.grad.data[0] = Float(1);
        for (int64_t i = static_cast<int64_t>(nodes_.size()) - 1; i >= 0; --i) {
            if (nodes_[static_cast<size_t>(i)].backward) nodes_[static_cast<size_t>(i)].backward();
        }
        for (auto& n : nodes_) {
            if (n.param) {
                auto& pg = n.param->grad;
                for (size_t i = 0; i < pg.data.size(); ++i) pg.data[i] += n.grad.data[i];
            }
        }
        clear();
        return loss_value;
    }

    void clear() {
        nodes_.clear();
        param_vars_.clear();
        ++gen_;
    }

    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor<Float> value;
        Tensor<Float> grad;
        std::function<void()> backward;
        Parameter<Float>* param = nullptr;
    };

    Var push(Tensor<Float> value, const std::vector<Var>& parents, Parameter<Float>* p) {
        for (Var v : parents) (void)node(v);  // validate generations
        Node n;
        n.grad = Tensor<Float>(value.shape);
        n.value = std::move(value);
        n.param = p;
        if (check_finite_ && !n.value.all_finite())
            throw NumericError("op produced or received non-finite values");
        nodes_.push_back(std::move(n));
        return Var{static_cast<int32_t>(nodes_.size() - 1), gen_};
    }

    void set_backward(Var v, std::function<void()> fn) { node_mut(v).backward = std::move(fn); }

    const Node& node(Var v) const {
        if (v.gen != gen_ || v.idx < 0 || v.idx >= static_cast<int32_t>(nodes_.size()))
            throw NumericError("use of a tensor that is not on the tape (already consumed or cleared)");
        return nodes_[static_cast<size_t>(v.idx)];
    }

    Node& node_mut(Var v) { return const_cast<Node&>(node(v)); }

    void check(const Tensor<Float>& t, const char* what) const {
        if (check_finite_ && !t.all_finite())
            throw NumericError(std::string(what) + ": non-finite input rejected in checked mode");
    }

    std::vector<Node> nodes_;
    std::unordered_map<Parameter<Float>*, int32_t> param_vars_;
    uint32_t gen_ = 1;
    bool check_finite_ = false;
};

// Op kinds enumerated by the finite-difference harness; model code calls
// the typed ops directly.
enum class OpKind {
    matmul,
    add,
    mul,
    softmax,
    layer_norm,
    embedding_lookup,
    relu,
    concat,
    slice,
    transpose,
    cross_entropy_mean,
    sigmoid,
    tanh
};

inline const char* op_kind_name(OpKind k) {
    switch (k) {
        case OpKind::matmul: return "matmul";
        case OpKind::add: return "add";
        case OpKind::mul: return "mul";
        case OpKind::softmax: return "softmax";
        case OpKind::layer_norm: return "layer_norm";
        case OpKind::embedding_lookup: return "embedding_lookup";
        case OpKind::relu: return "relu";
        case OpKind::concat: return "concat";
        case OpKind::slice: return "slice";
        case OpKind::transpose: return "transpose";
        case OpKind::cross_entropy_mean: return "cross_entropy_mean";
        case OpKind::sigmoid: return "sigmoid";
        case OpKind::tanh: return "tanh";
    }
    return "?";
}

}  // namespace propex
