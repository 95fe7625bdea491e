#pragma once

// Finite-difference verification harness behind the grad-check
// subcommand: every primitive op on random small shapes, plus toy-sized
// instances of both full models. Losses are fixed random projections of
// the op outputs so gradients are non-uniform. Runs at f64.

#include <functional>
#include <vector>

#include "propex/grad_check.hpp"
#include "propex/graph.hpp"
#include "propex/seq2seq.hpp"
#include "propex/transformer.hpp"

namespace propex {

inline const std::vector<OpKind>& checked_op_kinds() {
    static const std::vector<OpKind> kinds = {
        OpKind::matmul,  OpKind::add,     OpKind::mul,
        OpKind::softmax, OpKind::layer_norm, OpKind::embedding_lookup,
        OpKind::relu,    OpKind::concat,  OpKind::slice,
        OpKind::transpose, OpKind::cross_entropy_mean, OpKind::sigmoid,
        OpKind::tanh};
    return kinds;
}

inline GradCheckReport run_primitive_check(OpKind kind, uint64_t seed) {
    using F = double;
    SplitMix64 rng(seed * 2654435761ull + 17);
    auto dim = [&]() { return static_cast<int64_t>(1 + rng.below(5)); };

    ParameterStore<F> store;
    std::function<Var(Graph<F>&, ParameterStore<F>&)> build;

    switch (kind) {
        case OpKind::matmul: {
            int64_t m = dim(), k = dim(), n = dim();
            store.add("a", Tensor<F>::randn({m, k}, rng, 1.0));
            store.add("b", Tensor<F>::randn({k, n}, rng, 1.0));
            Tensor<F> w = Tensor<F>::randn({m, n}, rng, 1.0);
            build = [w](Graph<F>& g, ParameterStore<F>& s) {
                return g.sum(g.mul(g.matmul(g.param(s.get("a")), g.param(s.get("b"))), g.input(w)));
            };
            break;
        }
        case OpKind::add:
        case OpKind::mul: {
            int64_t m = dim(), n = dim();
            store.add("a", Tensor<F>::randn({m, n}, rng, 1.0));
            const bool bcast = rng.below(2) == 0;
            store.add("b", Tensor<F>::randn(bcast ? std::vector<int64_t>{n}
                                                  : std::vector<int64_t>{m, n},
                                            rng, 1.0));
            Tensor<F> w = Tensor<F>::randn({m, n}, rng, 1.0);
            const bool is_add = kind == OpKind::add;
            build = [w, is_add](Graph<F>& g, ParameterStore<F>& s) {
                Var a = g.param(s.get("a"));
                Var b = g.param(s.get("b"));
                Var out = is_add ? g.add(a, b) : g.mul(a, b);
                return g.sum(g.mul(out, g.input(w)));
            };
            break;
        }
        case OpKind::softmax:
        case OpKind::layer_norm:
        case OpKind::relu:
        case OpKind::sigmoid:
        case OpKind::tanh:
        case OpKind::transpose: {
            // width-2 layer_norm pins outputs to +-1 with eps-scale slopes,
            // which central differences cannot resolve; use width >= 3
            int64_t m = dim();
            int64_t n = kind == OpKind::layer_norm ? 3 + static_cast<int64_t>(rng.below(3)) : dim();
            Tensor<F> a = Tensor<F>::randn({m, n}, rng, 1.0);
            if (kind == OpKind::relu)  // keep values away from the kink
                for (auto& v : a.data)
                    if (std::abs(v) < 0.01) v += (v >= 0 ? 0.02 : -0.02);
            store.add("a", std::move(a));
            Tensor<F> w = Tensor<F>::randn(kind == OpKind::transpose ? std::vector<int64_t>{n, m}
                                                                     : std::vector<int64_t>{m, n},
                                           rng, 1.0);
            OpKind k2 = kind;
            build = [w, k2](Graph<F>& g, ParameterStore<F>& s) {
                Var a = g.param(s.get("a"));
                Var out;
                switch (k2) {
                    case OpKind::softmax: out = g.softmax(a); break;
                    case OpKind::layer_norm: out = g.layer_norm(a); break;
                    case OpKind::relu: out = g.relu(a); break;
                    case OpKind::sigmoid: out = g.sigmoid(a); break;
                    case OpKind::tanh: out = g.tanh_op(a); break;
                    default: out = g.transpose(a); break;
                }
                return g.sum(g.mul(out, g.input(w)));
            };
            break;
        }
        case OpKind::embedding_lookup: {
            int64_t v = 2 + static_cast<int64_t>(rng.below(4)), d = dim();
            int64_t len = 1 + static_cast<int64_t>(rng.below(5));
            store.add("table", Tensor<F>::randn({v, d}, rng, 1.0));
            std::vector<int> ids;
            for (int64_t i = 0; i < len; ++i)
                ids.push_back(static_cast<int>(rng.below(static_cast<uint64_t>(v))));
            Tensor<F> w = Tensor<F>::randn({len, d}, rng, 1.0);
            build = [w, ids](Graph<F>& g, ParameterStore<F>& s) {
                return g.sum(g.mul(g.embedding_lookup(g.param(s.get("table")), ids), g.input(w)));
            };
            break;
        }
        case OpKind::concat: {
            int64_t n = dim(), m1 = dim(), m2 = dim();
            const int axis = rng.below(2) == 0 ? 0 : 1;
            if (axis == 0) {
                store.add("a", Tensor<F>::randn({m1, n}, rng, 1.0));
                store.add("b", Tensor<F>::randn({m2, n}, rng, 1.0));
            } else {
                store.add("a", Tensor<F>::randn({n, m1}, rng, 1.0));
                store.add("b", Tensor<F>::randn({n, m2}, rng, 1.0));
            }
            Tensor<F> w = Tensor<F>::randn(axis == 0 ? std::vector<int64_t>{m1 + m2, n}
                                                     : std::vector<int64_t>{n, m1 + m2},
                                           rng, 1.0);
            build = [w, axis](Graph<F>& g, ParameterStore<F>& s) {
                Var c = g.concat({g.param(s.get("a")), g.param(s.get("b"))}, axis);
                return g.sum(g.mul(c, g.input(w)));
            };
            break;
        }
        case OpKind::slice: {
            int64_t m = 2 + static_cast<int64_t>(rng.below(4));
            int64_t n = 2 + static_cast<int64_t>(rng.below(4));
            store.add("a", Tensor<F>::randn({m, n}, rng, 1.0));
            const int axis = rng.below(2) == 0 ? 0 : 1;
            const int64_t extent = axis == 0 ? m : n;
            int64_t b = static_cast<int64_t>(rng.below(static_cast<uint64_t>(extent)));
            int64_t e = b + 1 + static_cast<int64_t>(rng.below(static_cast<uint64_t>(extent - b)));
            Tensor<F> w = Tensor<F>::randn(axis == 0 ? std::vector<int64_t>{e - b, n}
                                                     : std::vector<int64_t>{m, e - b},
                                           rng, 1.0);
            build = [w, axis, b, e](Graph<F>& g, ParameterStore<F>& s) {
                return g.sum(g.mul(g.slice(g.param(s.get("a")), axis, b, e), g.input(w)));
            };
            break;
        }
        case OpKind::cross_entropy_mean: {
            int64_t rows = 1 + static_cast<int64_t>(rng.below(5));
            int64_t v = 2 + static_cast<int64_t>(rng.below(4));
            store.add("logits", Tensor<F>::randn({rows, v}, rng, 1.0));
            std::vector<int> targets;
            std::vector<uint8_t> keep;
            for (int64_t i = 0; i < rows; ++i) {
                targets.push_back(static_cast<int>(rng.below(static_cast<uint64_t>(v))));
                keep.push_back(rng.below(4) != 0 ? 1 : 0);
            }
            keep[0] = 1;
            const double smoothing = (seed % 2 == 0) ? 0.0 : 0.1;
            build = [targets, keep, smoothing](Graph<F>& g, ParameterStore<F>& s) {
                return g.cross_entropy_mean(g.param(s.get("logits")), targets, keep, smoothing);
            };
            break;
        }
    }

    auto loss_fn = [&build](ParameterStore<F>& s) {
        Graph<F> g(true);
        return g.backward(build(g, s));
    };
    return grad_check<F>(loss_fn, store, 1e-5);
}

namespace op_checks_detail {

inline std::vector<int> random_sequence(SplitMix64& rng, size_t len, int vocab, bool wrap) {
    std::vector<int> ids;
    if (wrap) ids.push_back(Specials{}.bos);
    for (size_t i = 0; i < len; ++i)
        ids.push_back(Specials::count +
                      static_cast<int>(rng.below(static_cast<uint64_t>(vocab - Specials::count))));
    if (wrap) ids.push_back(Specials{}.eos);
    return ids;
}

}  // namespace op_checks_detail

// Full toy dual-source model (d=16, heads=2, depth=2, vocab=50) against
// central differences; coordinates subsampled per parameter.
inline double run_dual_model_check(uint64_t seed) {
    DualSourceConfig cfg;
    cfg.model_dim = 16;
    cfg.heads = 2;
    cfg.ffn_dim = 32;
    cfg.depth = 2;
    cfg.vocab_size = 50;
    cfg.max_positions = 32;
    DualSourceModel<double> model(cfg, seed + 101);
    SplitMix64 rng(seed * 77 + 5);
    TrainingExample ex;
    ex.article_ids = op_checks_detail::random_sequence(rng, 6, 50, true);
    ex.property_ids = op_checks_detail::random_sequence(rng, 3, 50, true);
    ex.target_ids = op_checks_detail::random_sequence(rng, 4, 50, false);
    ex.target_ids.push_back(Specials{}.eos);
    auto loss_fn = [&](ParameterStore<double>&) {
        Graph<double> g;
        return g.backward(model.example_loss(g, ex));
    };
    return grad_check<double>(loss_fn, model.params(), 1e-5, 6, seed).max_rel_err;
}

// Toy seq2seq baseline under the same scheme.
inline double run_basic_model_check(uint64_t seed) {
    Seq2SeqConfig cfg;
    cfg.embed_dim = 8;
    cfg.hidden_dim = 12;
    cfg.layers = 1;
    cfg.vocab_size = 40;
    Seq2SeqModel<double> model(cfg, seed + 55);
    SplitMix64 rng(seed * 33 + 9);
    auto src = op_checks_detail::random_sequence(rng, 5, 40, true);
    auto tgt = op_checks_detail::random_sequence(rng, 3, 40, false);
    tgt.push_back(Specials{}.eos);
    auto loss_fn = [&](ParameterStore<double>&) {
        Graph<double> g;
        return g.backward(model.example_loss(g, src, tgt));
    };
    return grad_check<double>(loss_fn, model.params(), 1e-5, 6, seed).max_rel_err;
}

}  // namespace propex
