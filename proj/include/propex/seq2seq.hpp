#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "propex/graph.hpp"
#include "propex/subword.hpp"
#include "propex/tensor.hpp"

namespace propex {

struct Seq2SeqConfig {
    int embed_dim = 128;
    int hidden_dim = 256;
    int layers = 1;
    int vocab_size = 0;
    int64_t validation_interval = 10000;  // updates between validations
    int64_t patience = 10;                // validations without progress

    void validate() const {
        if (embed_dim < 1 || hidden_dim < 1 || layers < 1)
            throw UsageError("seq2seq config: dimensions must be positive");
        if (vocab_size <= Specials::count) throw UsageError("seq2seq config: vocab_size not set");
        if (validation_interval < 1) throw UsageError("seq2seq config: validation_interval must be > 0");
        if (patience < 1) throw UsageError("seq2seq config: patience must be > 0");
    }

    nlohmann::json to_json() const {
        return {{"embed_dim", embed_dim},
                {"hidden_dim", hidden_dim},
                {"layers", layers},
                {"vocab_size", vocab_size},
                {"validation_interval", validation_interval},
                {"patience", patience}};
    }

    static Seq2SeqConfig from_json(const nlohmann::json& j) {
        Seq2SeqConfig c;
        c.embed_dim = j.at("embed_dim").get<int>();
        c.hidden_dim = j.at("hidden_dim").get<int>();
        c.layers = j.at("layers").get<int>();
        c.vocab_size = j.at("vocab_size").get<int>();
        c.validation_interval = j.at("validation_interval").get<int64_t>();
        c.patience = j.at("patience").get<int64_t>();
        return c;
    }
};

template <class Float>
struct LstmState {
    Var h;
    Var c;
};

// Standard LSTM recurrence over a 1 x input row: gates from [x; h],
// input/forget/output sigmoids, tanh cell candidate.
template <class Float>
LstmState<Float> lstm_cell_step(Graph<Float>& g, Parameter<Float>& w, Parameter<Float>& b, Var x,
                                const LstmState<Float>& prev) {
    const int64_t hidden = g.value(prev.h).shape[1];
    Var xs = g.concat({x, prev.h}, 1);
    Var gates = g.add(g.matmul(xs, g.param(w)), g.param(b));
    Var in_gate = g.sigmoid(g.slice(gates, 1, 0, hidden));
    Var forget_gate = g.sigmoid(g.slice(gates, 1, hidden, 2 * hidden));
    Var out_gate = g.sigmoid(g.slice(gates, 1, 2 * hidden, 3 * hidden));
    Var candidate = g.tanh_op(g.slice(gates, 1, 3 * hidden, 4 * hidden));
    Var c = g.add(g.mul(forget_gate, prev.c), g.mul(in_gate, candidate));
    Var h = g.mul(out_gate, g.tanh_op(c));
    return {h, c};
}

// Unidirectional LSTM encoder-decoder without attention: the encoder's
// final (h, c) per layer seeds the decoder state.
template <class Float>
class Seq2SeqModel {
public:
    Seq2SeqModel(Seq2SeqConfig cfg, uint64_t seed) : cfg_(cfg) {
        cfg_.validate();
        SplitMix64 rng(seed * 0x9e3779b97f4a7c15ull + 11);
        const int e = cfg_.embed_dim, h = cfg_.hidden_dim;
        params_.add("emb", Tensor<Float>::randn({cfg_.vocab_size, e}, rng,
                                                1.0 / std::sqrt(static_cast<double>(e))));
        auto add_lstm = [&](const std::string& p, int in_dim) {
            const double std = std::sqrt(2.0 / static_cast<double>(in_dim + h + 4 * h));
            params_.add(p + ".w", Tensor<Float>::randn({in_dim + h, 4 * h}, rng, std));
            Tensor<Float> bias({4 * h});
            // forget gate bias starts open
            for (int i = h; i < 2 * h; ++i) bias.data[static_cast<size_t>(i)] = Float(1);
            params_.add(p + ".b", std::move(bias));
        };
        for (int l = 0; l < cfg_.layers; ++l) add_lstm("enc." + std::to_string(l), l == 0 ? e : h);
        for (int l = 0; l < cfg_.layers; ++l) add_lstm("dec." + std::to_string(l), l == 0 ? e : h);
        const double std_out = std::sqrt(1.0 / static_cast<double>(h));
        params_.add("out.w", Tensor<Float>::randn({h, cfg_.vocab_size}, rng, std_out));
        params_.add("out.b", Tensor<Float>({cfg_.vocab_size}));
    }

    const Seq2SeqConfig& config() const { return cfg_; }
    ParameterStore<Float>& params() { return params_; }

    std::vector<LstmState<Float>> initial_states(Graph<Float>& g) {
        std::vector<LstmState<Float>> states;
        for (int l = 0; l < cfg_.layers; ++l) {
            Var h = g.input(Tensor<Float>({1, cfg_.hidden_dim}));
            Var c = g.input(Tensor<Float>({1, cfg_.hidden_dim}));
            states.push_back({h, c});
        }
        return states;
    }

    // Runs the stacked cells over a sequence; returns the final states.
    std::vector<LstmState<Float>> run_encoder(Graph<Float>& g, const std::vector<int>& ids) {
        auto states = initial_states(g);
        for (int id : ids) {
            Var x = g.embedding_lookup(g.param(params_.get("emb")), {id});
            for (int l = 0; l < cfg_.layers; ++l) {
                const std::string p = "enc." + std::to_string(l);
                states[static_cast<size_t>(l)] = lstm_cell_step(
                    g, params_.get(p + ".w"), params_.get(p + ".b"), x, states[static_cast<size_t>(l)]);
                x = states[static_cast<size_t>(l)].h;
            }
        }
        return states;
    }

    // One decoder step; mutates `states`, returns the logits row.
    Var decoder_step(Graph<Float>& g, std::vector<LstmState<Float>>& states, int token) {
        Var x = g.embedding_lookup(g.param(params_.get("emb")), {token});
        for (int l = 0; l < cfg_.layers; ++l) {
            const std::string p = "dec." + std::to_string(l);
            states[static_cast<size_t>(l)] = lstm_cell_step(
                g, params_.get(p + ".w"), params_.get(p + ".b"), x, states[static_cast<size_t>(l)]);
            x = states[static_cast<size_t>(l)].h;
        }
        return g.add(g.matmul(x, g.param(params_.get("out.w"))), g.param(params_.get("out.b")));
    }

    // Mean per-token cross entropy, teacher forced.
    Var example_loss(Graph<Float>& g, const std::vector<int>& source_ids,
                     const std::vector<int>& target_ids) {
        if (target_ids.empty()) throw DataError("seq2seq loss: empty target");
        auto states = run_encoder(g, source_ids);
        std::vector<Var> rows;
        int prev = Specials{}.bos;
        for (int target : target_ids) {
            rows.push_back(decoder_step(g, states, prev));
            prev = target;
        }
        Var all = rows.size() == 1 ? rows[0] : g.concat(rows, 0);
        std::vector<uint8_t> keep(target_ids.size(), 1);
        return g.cross_entropy_mean(all, target_ids, keep);
    }

private:
    Seq2SeqConfig cfg_;
    ParameterStore<Float> params_;
};

}  // namespace propex
