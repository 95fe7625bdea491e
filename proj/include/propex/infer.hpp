#pragma once

#include <cmath>
#include <memory>
#include <thread>
#include <vector>

#include "propex/beam.hpp"
#include "propex/encoding.hpp"
#include "propex/metrics.hpp"
#include "propex/seq2seq.hpp"
#include "propex/transformer.hpp"
#include "propex/truecase.hpp"

namespace propex {

namespace detail {

inline std::vector<double> row_log_softmax(const std::vector<double>& logits) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double lse = 0;
    for (double v : logits) lse += std::exp(v - mx);
    lse = mx + std::log(lse);
    std::vector<double> out(logits.size());
    for (size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
    return out;
}

}  // namespace detail

// Scorer over one (article, properties) pair. Source states are encoded
// once and cached as plain tensors; each next_log_probs call re-runs the
// decoder over the prefix. Not thread-safe; one scorer per worker.
template <class Float>
class DualScorer : public Scorer {
public:
    DualScorer(DualSourceModel<Float>& model, const std::vector<int>& article_ids,
               const std::vector<int>& property_ids, bool ablate_article = false)
        : model_(model) {
        Graph<Float> g;
        std::vector<int> art = ablate_article
                                   ? std::vector<int>{Specials{}.bos, Specials{}.eos}
                                   : article_ids;
        auto [a, p] = model_.encode_pair(g, art, property_ids);
        article_states_ = g.value(a);
        property_states_ = g.value(p);
    }

    int vocab_size() const override { return model_.config().vocab_size; }

    std::vector<double> next_log_probs(const std::vector<int>& prefix) override {
        Graph<Float> g;
        std::vector<int> decoder_input{Specials{}.bos};
        decoder_input.insert(decoder_input.end(), prefix.begin(), prefix.end());
        Var states = model_.decode_states(g, decoder_input, g.input(article_states_),
                                          g.input(property_states_));
        const int64_t last = g.value(states).shape[0] - 1;
        Var row = g.slice(states, 0, last, last + 1);
        Var logits = model_.logits(g, row);
        const auto& t = g.value(logits);
        std::vector<double> raw(t.data.begin(), t.data.end());
        return detail::row_log_softmax(raw);
    }

private:
    DualSourceModel<Float>& model_;
    Tensor<Float> article_states_;
    Tensor<Float> property_states_;
};

// Scorer for the LSTM baseline. Recomputes the full prefix per call;
// sequences are short enough that simplicity wins.
template <class Float>
class BasicScorer : public Scorer {
public:
    BasicScorer(Seq2SeqModel<Float>& model, std::vector<int> source_ids)
        : model_(model), source_ids_(std::move(source_ids)) {}

    int vocab_size() const override { return model_.config().vocab_size; }

    std::vector<double> next_log_probs(const std::vector<int>& prefix) override {
        Graph<Float> g;
        auto states = model_.run_encoder(g, source_ids_);
        Var logits = model_.decoder_step(g, states, Specials{}.bos);
        for (int tok : prefix) logits = model_.decoder_step(g, states, tok);
        const auto& t = g.value(logits);
        std::vector<double> raw(t.data.begin(), t.data.end());
        return detail::row_log_softmax(raw);
    }

private:
    Seq2SeqModel<Float>& model_;
    std::vector<int> source_ids_;
};

struct DecodeOptions {
    int beam_width = 8;
    int max_len = 64;
    double length_norm_alpha = 0.6;
    bool ablate_article = false;
    int jobs = 1;
};

// Deterministic sharded map: workers own disjoint contiguous index ranges
// and write into preallocated slots; per-worker counters merge in worker
// order, so the output is independent of scheduling.
template <class Fn>
void run_sharded(size_t n, int jobs, Fn&& fn, int64_t& malformed, int64_t& unfinished) {
    const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(n == 0 ? 1 : n)));
    if (workers == 1) {
        for (size_t i = 0; i < n; ++i) fn(i, malformed, unfinished);
        return;
    }
    std::vector<int64_t> wm(static_cast<size_t>(workers), 0), wu(static_cast<size_t>(workers), 0);
    std::vector<std::exception_ptr> errors(static_cast<size_t>(workers));
    std::vector<std::thread> threads;
    const size_t chunk = (n + static_cast<size_t>(workers) - 1) / static_cast<size_t>(workers);
    for (int w = 0; w < workers; ++w) {
        threads.emplace_back([&, w]() {
            const size_t begin = static_cast<size_t>(w) * chunk;
            const size_t end = std::min(n, begin + chunk);
            try {
                for (size_t i = begin; i < end; ++i)
                    fn(i, wm[static_cast<size_t>(w)], wu[static_cast<size_t>(w)]);
            } catch (...) {
                errors[static_cast<size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    for (int w = 0; w < workers; ++w) {
        if (errors[static_cast<size_t>(w)]) std::rethrow_exception(errors[static_cast<size_t>(w)]);
        malformed += wm[static_cast<size_t>(w)];
        unfinished += wu[static_cast<size_t>(w)];
    }
}

struct DecodeOutcome {
    std::vector<Prediction> predictions;
    int64_t malformed_segments = 0;
    int64_t unfinished = 0;  // hypotheses that never reached EOS
    std::vector<double> scores;
    std::vector<std::vector<std::string>> flags;  // per record: unfinished, malformed
};

// Decodes every gold record with its queried property set. An ensemble
// of size one is a single model.
template <class Float>
DecodeOutcome decode_dual(std::vector<DualSourceModel<Float>*> models, const SubwordModel& tok,
                          const std::vector<MultiPropertyRecord>& records, TrainingMode mode,
                          const DecodeOptions& opts) {
    if (models.empty()) throw UsageError("decode: no models");
    DecodeOutcome out;
    out.predictions.resize(records.size());
    out.scores.resize(records.size(), 0.0);
    out.flags.resize(records.size());

    auto decode_one = [&](size_t i, int64_t& malformed, int64_t& unfinished) {
        const auto& r = records[i];
        Prediction pred;
        pred.article_id = r.article_id;
        std::vector<std::string> names;
        for (const auto& [name, vals] : r.properties) names.push_back(name);
        double score = 0.0;
        int64_t rec_malformed = 0, rec_unfinished = 0;

        if (mode == TrainingMode::multi_property) {
            auto article_ids = encode_article(tok, r.text);
            auto property_ids = encode_property_names(tok, names);
            std::vector<std::unique_ptr<DualScorer<Float>>> scorers;
            std::vector<Scorer*> raw;
            for (auto* m : models) {
                scorers.push_back(std::make_unique<DualScorer<Float>>(*m, article_ids, property_ids,
                                                                      opts.ablate_article));
                raw.push_back(scorers.back().get());
            }
            EnsembleScorer ens(raw);
            auto result = beam_search(ens, tok.specials().eos, opts.beam_width, opts.max_len,
                                      opts.length_norm_alpha);
            if (result.hit_max_len) ++rec_unfinished;
            score = result.best.log_prob;
            auto parsed = parse_target(tok.decode(result.best.tokens));
            rec_malformed += parsed.malformed_segments;
            // only queried keys count; anything else would be rejected by
            // the metrics layer
            for (auto& [name, vals] : parsed.properties)
                if (r.properties.count(name)) pred.properties[name] = vals;
        } else {
            auto article_ids = encode_article(tok, r.text);
            for (const auto& name : names) {
                auto property_ids = encode_property_names(tok, {name});
                std::vector<std::unique_ptr<DualScorer<Float>>> scorers;
                std::vector<Scorer*> raw;
                for (auto* m : models) {
                    scorers.push_back(std::make_unique<DualScorer<Float>>(*m, article_ids, property_ids,
                                                                          opts.ablate_article));
                    raw.push_back(scorers.back().get());
                }
                EnsembleScorer ens(raw);
                auto result = beam_search(ens, tok.specials().eos, opts.beam_width, opts.max_len,
                                          opts.length_norm_alpha);
                if (result.hit_max_len) ++rec_unfinished;
                score += result.best.log_prob;
                pred.properties[name] = parse_values(tok.decode(result.best.tokens));
            }
        }
        malformed += rec_malformed;
        unfinished += rec_unfinished;
        if (rec_unfinished > 0) out.flags[i].push_back("unfinished");
        if (rec_malformed > 0) out.flags[i].push_back("malformed");
        out.predictions[i] = std::move(pred);
        out.scores[i] = score;
    };

    run_sharded(records.size(), opts.jobs, decode_one, out.malformed_segments, out.unfinished);
    return out;
}

template <class Float>
DecodeOutcome decode_basic(Seq2SeqModel<Float>& model, const SubwordModel& tok,
                           const std::vector<MultiPropertyRecord>& records,
                           const Truecaser* truecaser, const DecodeOptions& opts) {
    DecodeOutcome out;
    out.predictions.resize(records.size());
    out.scores.resize(records.size(), 0.0);
    out.flags.resize(records.size());

    auto decode_one = [&](size_t i, int64_t& malformed, int64_t& unfinished) {
        (void)malformed;
        const auto& r = records[i];
        Prediction pred;
        pred.article_id = r.article_id;
        double score = 0.0;
        int64_t rec_unfinished = 0;
        for (const auto& [name, gold_vals] : r.properties) {
            std::vector<MultiPropertyRecord> one{MultiPropertyRecord{
                r.article_id, r.text, {{name, gold_vals}}}};
            auto built = build_basic_examples(one, tok);
            BasicScorer<Float> scorer(model, built[0].source_ids);
            auto result = beam_search(scorer, tok.specials().eos, opts.beam_width, opts.max_len,
                                      opts.length_norm_alpha);
            if (result.hit_max_len) ++rec_unfinished;
            score += result.best.log_prob;
            std::string text = tok.decode(result.best.tokens);
            if (truecaser) text = truecaser->apply(text);
            pred.properties[name] = parse_values(text);
        }
        unfinished += rec_unfinished;
        if (rec_unfinished > 0) out.flags[i].push_back("unfinished");
        out.predictions[i] = std::move(pred);
        out.scores[i] = score;
    };

    run_sharded(records.size(), opts.jobs, decode_one, out.malformed_segments, out.unfinished);
    return out;
}

}  // namespace propex
