#pragma once

#include <atomic>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "propex/graph.hpp"
#include "propex/subword.hpp"
#include "propex/tensor.hpp"

namespace propex {

struct DualSourceConfig {
    int model_dim = 64;
    int heads = 4;
    int ffn_dim = 256;
    int depth = 2;  // encoder depth == decoder depth
    int vocab_size = 0;
    int max_positions = 256;
    double dropout = 0.0;
    double label_smoothing = 0.0;
    // cross-attention order inside each decoder layer; property first by
    // default, configurable because the source architecture leaves it open
    bool property_attention_first = true;
    // zeroing the position table turns the encoder into a set function;
    // used by ablation checks
    bool sinusoidal_positions = true;

    void validate() const {
        if (model_dim < 1 || heads < 1 || model_dim % heads != 0)
            throw UsageError("dual config: model_dim must be a positive multiple of heads");
        if (depth < 1) throw UsageError("dual config: depth must be >= 1");
        if (vocab_size <= Specials::count) throw UsageError("dual config: vocab_size not set");
    }

    nlohmann::json to_json() const {
        return {{"model_dim", model_dim},     {"heads", heads},
                {"ffn_dim", ffn_dim},         {"depth", depth},
                {"vocab_size", vocab_size},   {"max_positions", max_positions},
                {"dropout", dropout},         {"label_smoothing", label_smoothing},
                {"property_attention_first", property_attention_first}};
    }

    static DualSourceConfig from_json(const nlohmann::json& j) {
        DualSourceConfig c;
        c.model_dim = j.at("model_dim").get<int>();
        c.heads = j.at("heads").get<int>();
        c.ffn_dim = j.at("ffn_dim").get<int>();
        c.depth = j.at("depth").get<int>();
        c.vocab_size = j.at("vocab_size").get<int>();
        c.max_positions = j.at("max_positions").get<int>();
        c.dropout = j.value("dropout", 0.0);
        c.label_smoothing = j.value("label_smoothing", 0.0);
        c.property_attention_first = j.value("property_attention_first", true);
        return c;
    }
};

// One tokenized training example. target_ids end with EOS and carry no
// BOS; the decoder input is BOS + target_ids[:-1].
struct TrainingExample {
    std::vector<int> article_ids;
    std::vector<int> property_ids;
    std::vector<int> target_ids;

    int64_t total_tokens() const {
        return static_cast<int64_t>(article_ids.size() + property_ids.size() + target_ids.size());
    }
};

namespace nn {

// Sinusoidal position table, rows 0..n-1.
template <class Float>
Tensor<Float> sinusoid_positions(int64_t n, int64_t dim) {
    Tensor<Float> t({n, dim});
    for (int64_t pos = 0; pos < n; ++pos)
        for (int64_t i = 0; i < dim; ++i) {
            const double angle =
                static_cast<double>(pos) /
                std::pow(10000.0, 2.0 * std::floor(static_cast<double>(i) / 2.0) / static_cast<double>(dim));
            t.at(pos, i) = static_cast<Float>((i % 2 == 0) ? std::sin(angle) : std::cos(angle));
        }
    return t;
}

struct AttentionNames {
    std::string wq, bq, wk, wv, bv, wo, bo;
    explicit AttentionNames(const std::string& prefix)
        : wq(prefix + ".wq"), bq(prefix + ".bq"), wk(prefix + ".wk"), wv(prefix + ".wv"),
          bv(prefix + ".bv"), wo(prefix + ".wo"), bo(prefix + ".bo") {}
};

template <class Float>
void add_linear(ParameterStore<Float>& store, SplitMix64& rng, const std::string& w,
                const std::string& b, int64_t in, int64_t out) {
    const double std = std::sqrt(2.0 / static_cast<double>(in + out));
    store.add(w, Tensor<Float>::randn({in, out}, rng, std));
    store.add(b, Tensor<Float>({out}));
}

template <class Float>
void add_attention(ParameterStore<Float>& store, SplitMix64& rng, const AttentionNames& n, int d) {
    add_linear(store, rng, n.wq, n.bq, d, d);
    // no key bias: softmax cancels a per-query constant shift, so the
    // parameter would be permanently gradient-free
    const double std = std::sqrt(2.0 / static_cast<double>(d + d));
    store.add(n.wk, Tensor<Float>::randn({d, d}, rng, std));
    add_linear(store, rng, n.wv, n.bv, d, d);
    add_linear(store, rng, n.wo, n.bo, d, d);
}

template <class Float>
void add_layer_norm(ParameterStore<Float>& store, const std::string& prefix, int d) {
    Tensor<Float> ones({d});
    ones.fill(Float(1));
    store.add(prefix + ".g", std::move(ones));
    store.add(prefix + ".b", Tensor<Float>({d}));
}

template <class Float>
Var linear(Graph<Float>& g, ParameterStore<Float>& store, const std::string& w, const std::string& b,
           Var x) {
    return g.add(g.matmul(x, g.param(store.get(w))), g.param(store.get(b)));
}

// Post-norm residual: LN(x + sub) * g + b.
template <class Float>
Var residual_norm(Graph<Float>& g, ParameterStore<Float>& store, const std::string& prefix, Var x,
                  Var sub) {
    Var n = g.layer_norm(g.add(x, sub));
    return g.add(g.mul(n, g.param(store.get(prefix + ".g"))), g.param(store.get(prefix + ".b")));
}

// Multi-head attention from queries over (keys == values) states.
// `causal` masks future key positions in self-attention.
template <class Float>
Var attention(Graph<Float>& g, ParameterStore<Float>& store, const AttentionNames& names, Var queries,
              Var keys, int heads, bool causal) {
    const int64_t d = g.value(queries).shape[1];
    const int64_t dh = d / heads;
    const int64_t lq = g.value(queries).shape[0];
    const int64_t lk = g.value(keys).shape[0];
    Var q = linear(g, store, names.wq, names.bq, queries);
    Var k = g.matmul(keys, g.param(store.get(names.wk)));
    Var v = linear(g, store, names.wv, names.bv, keys);

    std::vector<uint8_t> causal_mask;
    if (causal) {
        causal_mask.assign(static_cast<size_t>(lq * lk), 0);
        for (int64_t i = 0; i < lq; ++i)
            for (int64_t j = i + 1; j < lk; ++j) causal_mask[static_cast<size_t>(i * lk + j)] = 1;
    }

    std::vector<Var> head_outputs;
    head_outputs.reserve(static_cast<size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        Var qh = g.slice(q, 1, h * dh, (h + 1) * dh);
        Var kh = g.slice(k, 1, h * dh, (h + 1) * dh);
        Var vh = g.slice(v, 1, h * dh, (h + 1) * dh);
        Var scores = g.scale(g.matmul(qh, g.transpose(kh)),
                             static_cast<Float>(1.0 / std::sqrt(static_cast<double>(dh))));
        if (causal) scores = g.mask_fill(scores, causal_mask, Float(-1e9));
        head_outputs.push_back(g.matmul(g.softmax(scores), vh));
    }
    Var ctx = heads == 1 ? head_outputs[0] : g.concat(head_outputs, 1);
    return linear(g, store, names.wo, names.bo, ctx);
}

template <class Float>
Var feed_forward(Graph<Float>& g, ParameterStore<Float>& store, const std::string& prefix, Var x) {
    Var h = g.relu(linear(g, store, prefix + ".w1", prefix + ".b1", x));
    return linear(g, store, prefix + ".w2", prefix + ".b2", h);
}

}  // namespace nn

// The dual-source model: one shared encoder parameter stack applied to
// the article and to the property names, a decoder whose layers attend to
// both encodings, and a token embedding tied to the output projection.
template <class Float>
class DualSourceModel {
public:
    DualSourceModel(DualSourceConfig cfg, uint64_t seed) : cfg_(cfg) {
        cfg_.validate();
        SplitMix64 rng(seed * 0x9e3779b97f4a7c15ull + 3);
        const int d = cfg_.model_dim;
        params_.add("emb", Tensor<Float>::randn({cfg_.vocab_size, d}, rng,
                                                1.0 / std::sqrt(static_cast<double>(d))));
        for (int l = 0; l < cfg_.depth; ++l) {
            const std::string p = "enc." + std::to_string(l);
            nn::add_attention(params_, rng, nn::AttentionNames(p + ".attn"), d);
            nn::add_layer_norm(params_, p + ".ln1", d);
            nn::add_linear(params_, rng, p + ".ffn.w1", p + ".ffn.b1", d, cfg_.ffn_dim);
            nn::add_linear(params_, rng, p + ".ffn.w2", p + ".ffn.b2", cfg_.ffn_dim, d);
            nn::add_layer_norm(params_, p + ".ln2", d);
        }
        for (int l = 0; l < cfg_.depth; ++l) {
            const std::string p = "dec." + std::to_string(l);
            nn::add_attention(params_, rng, nn::AttentionNames(p + ".self"), d);
            nn::add_layer_norm(params_, p + ".ln1", d);
            nn::add_attention(params_, rng, nn::AttentionNames(p + ".xprop"), d);
            nn::add_layer_norm(params_, p + ".ln2", d);
            nn::add_attention(params_, rng, nn::AttentionNames(p + ".xart"), d);
            nn::add_layer_norm(params_, p + ".ln3", d);
            nn::add_linear(params_, rng, p + ".ffn.w1", p + ".ffn.b1", d, cfg_.ffn_dim);
            nn::add_linear(params_, rng, p + ".ffn.w2", p + ".ffn.b2", cfg_.ffn_dim, d);
            nn::add_layer_norm(params_, p + ".ln4", d);
        }
        positions_ = cfg_.sinusoidal_positions
                         ? nn::sinusoid_positions<Float>(cfg_.max_positions, d)
                         : Tensor<Float>({cfg_.max_positions, d});
    }

    const DualSourceConfig& config() const { return cfg_; }
    ParameterStore<Float>& params() { return params_; }

    void set_training(bool on) { training_ = on; }
    void reseed_dropout(uint64_t seed) { dropout_rng_ = SplitMix64(seed); }
    int64_t truncation_warnings() const { return truncation_warnings_.load(); }

    // Token embedding + positions; the same parameters serve both sources
    // and the decoder input.
    Var embed(Graph<Float>& g, const std::vector<int>& ids) {
        const int64_t len = static_cast<int64_t>(ids.size());
        Var e = g.embedding_lookup(g.param(params_.get("emb")), ids);
        e = g.scale(e, static_cast<Float>(std::sqrt(static_cast<double>(cfg_.model_dim))));
        Tensor<Float> pos({len, cfg_.model_dim});
        for (int64_t i = 0; i < len; ++i)
            for (int64_t j = 0; j < cfg_.model_dim; ++j) pos.at(i, j) = positions_.at(i, j);
        return g.add(e, g.input(pos));
    }

    // One shared encoder pass. Used verbatim for both sources.
    Var encode(Graph<Float>& g, const std::vector<int>& ids) {
        Var x = dropout(g, embed(g, ids));
        for (int l = 0; l < cfg_.depth; ++l) {
            const std::string p = "enc." + std::to_string(l);
            Var attn = nn::attention(g, params_, nn::AttentionNames(p + ".attn"), x, x, cfg_.heads,
                                     /*causal=*/false);
            x = nn::residual_norm(g, params_, p + ".ln1", x, dropout(g, attn));
            Var ffn = nn::feed_forward(g, params_, p + ".ffn", x);
            x = nn::residual_norm(g, params_, p + ".ln2", x, dropout(g, ffn));
        }
        return x;
    }

    // Encodes both sources with the shared stack. Overlong articles are
    // truncated (warning counted); overlong properties are an error
    // because they are the query.
    std::pair<Var, Var> encode_pair(Graph<Float>& g, std::vector<int> article_ids,
                                    const std::vector<int>& property_ids) {
        if (article_ids.empty() || property_ids.empty())
            throw DataError("encode_pair: empty source sequence");
        if (static_cast<int64_t>(property_ids.size()) > cfg_.max_positions)
            throw DataError("encode_pair: property sequence of " +
                            std::to_string(property_ids.size()) + " tokens exceeds max positions " +
                            std::to_string(cfg_.max_positions) + " and must not be truncated");
        if (static_cast<int64_t>(article_ids.size()) > cfg_.max_positions) {
            article_ids.resize(static_cast<size_t>(cfg_.max_positions));
            article_ids.back() = Specials{}.eos;
            ++truncation_warnings_;
        }
        Var art = encode(g, article_ids);
        Var prop = encode(g, property_ids);
        return {art, prop};
    }

    // Decoder over an already-embedded target prefix and two encoded
    // sources. Returns the pre-logits states.
    Var decode_states(Graph<Float>& g, const std::vector<int>& decoder_input, Var article_states,
                      Var property_states) {
        Var x = dropout(g, embed(g, decoder_input));
        for (int l = 0; l < cfg_.depth; ++l) {
            const std::string p = "dec." + std::to_string(l);
            Var self = nn::attention(g, params_, nn::AttentionNames(p + ".self"), x, x, cfg_.heads,
                                     /*causal=*/true);
            x = nn::residual_norm(g, params_, p + ".ln1", x, dropout(g, self));
            const bool prop_first = cfg_.property_attention_first;
            Var first_src = prop_first ? property_states : article_states;
            Var second_src = prop_first ? article_states : property_states;
            Var x1 = nn::attention(g, params_, nn::AttentionNames(p + (prop_first ? ".xprop" : ".xart")),
                                   x, first_src, cfg_.heads, false);
            x = nn::residual_norm(g, params_, p + ".ln2", x, dropout(g, x1));
            Var x2 = nn::attention(g, params_, nn::AttentionNames(p + (prop_first ? ".xart" : ".xprop")),
                                   x, second_src, cfg_.heads, false);
            x = nn::residual_norm(g, params_, p + ".ln3", x, dropout(g, x2));
            Var ffn = nn::feed_forward(g, params_, p + ".ffn", x);
            x = nn::residual_norm(g, params_, p + ".ln4", x, dropout(g, ffn));
        }
        return x;
    }

    // Tied output projection, scaled to keep initial logits near uniform.
    Var logits(Graph<Float>& g, Var states) {
        Var w = g.transpose(g.param(params_.get("emb")));
        return g.scale(g.matmul(states, w),
                       static_cast<Float>(1.0 / std::sqrt(static_cast<double>(cfg_.model_dim))));
    }

    // Teacher-forced per-example loss: mean smoothed NLL per target token.
    Var example_loss(Graph<Float>& g, const TrainingExample& ex) {
        if (ex.target_ids.empty()) throw DataError("example_loss: empty target");
        auto [art, prop] = encode_pair(g, ex.article_ids, ex.property_ids);
        std::vector<int> decoder_input;
        decoder_input.reserve(ex.target_ids.size());
        decoder_input.push_back(Specials{}.bos);
        decoder_input.insert(decoder_input.end(), ex.target_ids.begin(), ex.target_ids.end() - 1);
        Var states = decode_states(g, decoder_input, art, prop);
        std::vector<uint8_t> keep(ex.target_ids.size(), 1);
        return g.cross_entropy_mean(logits(g, states), ex.target_ids, keep,
                                    static_cast<Float>(cfg_.label_smoothing));
    }

private:
    Var dropout(Graph<Float>& g, Var x) {
        if (!training_ || cfg_.dropout <= 0.0) return x;
        const auto& shape = g.value(x).shape;
        Tensor<Float> mask(shape);
        const double keep = 1.0 - cfg_.dropout;
        for (auto& v : mask.data)
            v = dropout_rng_.uniform() < keep ? static_cast<Float>(1.0 / keep) : Float(0);
        return g.mul(x, g.input(mask));
    }

    DualSourceConfig cfg_;
    ParameterStore<Float> params_;
    Tensor<Float> positions_;
    bool training_ = false;
    SplitMix64 dropout_rng_{0x0d50u};
    std::atomic<int64_t> truncation_warnings_{0};  // decode shards run in parallel
};

}  // namespace propex
