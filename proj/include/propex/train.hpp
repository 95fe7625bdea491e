#pragma once

#include <chrono>
#include <limits>
#include <cstdio>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "propex/adam.hpp"
#include "propex/batching.hpp"
#include "propex/checkpoint.hpp"
#include "propex/encoding.hpp"
#include "propex/seq2seq.hpp"
#include "propex/transformer.hpp"

namespace propex {

struct OptimizerSettings {
    double lr = 3e-4;
    int64_t warmup_steps = 4000;  // 0 means a constant rate
    double beta1 = 0.9;
    double beta2 = 0.98;
    double epsilon = 1e-9;

    double rate(int64_t step) const {
        return warmup_steps > 0 ? warmup_inv_sqrt_lr(lr, step, warmup_steps) : lr;
    }

    nlohmann::json to_json() const {
        return {{"lr", lr},       {"warmup_steps", warmup_steps}, {"beta1", beta1},
                {"beta2", beta2}, {"epsilon", epsilon}};
    }

    static OptimizerSettings from_json(const nlohmann::json& j) {
        OptimizerSettings o;
        o.lr = j.at("lr").get<double>();
        o.warmup_steps = j.at("warmup_steps").get<int64_t>();
        o.beta1 = j.value("beta1", 0.9);
        o.beta2 = j.value("beta2", 0.98);
        o.epsilon = j.value("epsilon", 1e-9);
        return o;
    }

    AdamConfig adam() const { return AdamConfig{lr, beta1, beta2, epsilon}; }
};

struct TrainResult {
    int64_t steps_done = 0;
    double final_loss = 0.0;
    int64_t nan_steps = 0;
    double best_val_loss = std::numeric_limits<double>::infinity();
    int64_t best_val_step = -1;
    std::vector<double> loss_trace;
    std::vector<double> val_trace;
    std::vector<std::string> checkpoints;
    bool stopped_early = false;
};

struct TrainHooks {
    // called every `interval` steps; return true to stop training
    int64_t interval = 0;
    std::function<bool(int64_t step)> callback;
};

namespace detail {

inline void log_step(std::ostream* log, int64_t step, double loss, double lr, double tokens_per_s) {
    if (!log) return;
    nlohmann::json j{{"step", step}, {"loss", loss}, {"lr", lr}, {"tokens_per_s", tokens_per_s}};
    (*log) << j.dump() << "\n";
}

inline std::string checkpoint_name(const std::string& dir, int64_t step) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "ckpt-%06lld.bin", static_cast<long long>(step));
    return dir + "/" + buf;
}

}  // namespace detail

struct DualTrainOptions {
    OptimizerSettings optim{3e-4, 4000};
    int64_t steps = 2000;
    int64_t token_budget = 1024;
    uint64_t seed = 1;
    int64_t log_every = 50;
    int64_t checkpoint_every = 0;  // 0 = only the final checkpoint
    std::string output_dir;        // empty = keep everything in memory
    TrainHooks hooks;
};

// Teacher-forced training with token-budgeted dynamic batches. The batch
// loss is the token-weighted mean of per-example means, i.e. the mean
// over all non-pad target tokens in the batch.
template <class Float>
TrainResult train_dual(DualSourceModel<Float>& model, const std::vector<BuiltExample>& examples,
                       const DualTrainOptions& opts, std::ostream* log = nullptr) {
    if (examples.empty()) throw DataError("train: no examples");
    Adam<Float> adam(opts.optim.adam());
    Graph<Float> graph;
    TrainResult result;
    model.set_training(true);
    model.reseed_dropout(opts.seed ^ 0xd80u);

    std::vector<int64_t> lengths;
    lengths.reserve(examples.size());
    for (const auto& b : examples) lengths.push_back(b.ex.total_tokens());

    double lr_scale = 1.0;
    int64_t step = 0;
    uint64_t epoch = 0;
    while (step < opts.steps) {
        auto batches = make_token_batches(lengths, opts.token_budget, opts.seed + epoch);
        ++epoch;
        for (const auto& batch : batches) {
            if (step >= opts.steps) break;
            ++step;
            int64_t batch_tokens = 0;
            for (size_t idx : batch) batch_tokens += static_cast<int64_t>(examples[idx].ex.target_ids.size());
            const auto t0 = std::chrono::steady_clock::now();
            Var total{};
            bool first = true;
            for (size_t idx : batch) {
                const auto& ex = examples[idx].ex;
                Var w = graph.scale(model.example_loss(graph, ex),
                                    static_cast<Float>(static_cast<double>(ex.target_ids.size()) /
                                                       static_cast<double>(batch_tokens)));
                total = first ? w : graph.add(total, w);
                first = false;
            }
            const double loss = graph.backward(total);
            const double lr = opts.optim.rate(step) * lr_scale;
            if (!std::isfinite(loss)) {
                // skip the update and halve the rate once per event
                model.params().zero_grads();
                lr_scale *= 0.5;
                ++result.nan_steps;
            } else {
                adam.step(model.params(), lr);
                result.final_loss = loss;
            }
            result.loss_trace.push_back(loss);
            const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            if (opts.log_every > 0 && step % opts.log_every == 0)
                detail::log_step(log, step, loss, lr, static_cast<double>(batch_tokens) / dt);
            if (!opts.output_dir.empty() && opts.checkpoint_every > 0 &&
                step % opts.checkpoint_every == 0) {
                auto path = detail::checkpoint_name(opts.output_dir, step);
                save_checkpoint(path, model.params(), step);
                result.checkpoints.push_back(path);
            }
            if (opts.hooks.interval > 0 && opts.hooks.callback && step % opts.hooks.interval == 0) {
                model.set_training(false);
                const bool stop = opts.hooks.callback(step);
                model.set_training(true);
                if (stop) {
                    result.stopped_early = true;
                    break;
                }
            }
        }
        if (result.stopped_early) break;
    }
    result.steps_done = step;
    model.set_training(false);
    if (!opts.output_dir.empty()) {
        auto path = opts.output_dir + "/last.bin";
        save_checkpoint(path, model.params(), step);
        result.checkpoints.push_back(path);
    }
    return result;
}

struct BasicTrainOptions {
    OptimizerSettings optim{1e-3, 0};
    int64_t max_steps = 100000;
    int64_t token_budget = 1024;
    uint64_t seed = 1;
    int64_t log_every = 50;
    std::string output_dir;
    TrainHooks hooks;
};

// Validation-loss early stopping: train until `patience` validations in
// a row fail to improve, keep the best checkpoint. Aborts when the
// validation loss exceeds twice its initial value three times running.
template <class Float>
TrainResult train_basic(Seq2SeqModel<Float>& model, const std::vector<BasicExample>& train_examples,
                        const std::vector<BasicExample>& valid_examples,
                        const BasicTrainOptions& opts, std::ostream* log = nullptr) {
    if (train_examples.empty()) throw DataError("train: no examples");
    if (valid_examples.empty()) throw DataError("train: early stopping needs a validation set");
    const auto& cfg = model.config();
    Adam<Float> adam(opts.optim.adam());
    Graph<Float> graph;
    TrainResult result;

    auto validation_loss = [&]() {
        double total_nll = 0;
        int64_t total_tokens = 0;
        for (const auto& ex : valid_examples) {
            Graph<Float> g;
            Var loss = model.example_loss(g, ex.source_ids, ex.target_ids);
            total_nll += static_cast<double>(g.value(loss).data[0]) *
                         static_cast<double>(ex.target_ids.size());
            total_tokens += static_cast<int64_t>(ex.target_ids.size());
        }
        return total_nll / static_cast<double>(total_tokens);
    };

    std::vector<int64_t> lengths;
    for (const auto& b : train_examples) lengths.push_back(b.total_tokens());

    std::vector<Tensor<Float>> best_values;
    double initial_val = 0.0;
    int64_t validations = 0, since_best = 0, diverged_checks = 0;
    int64_t step = 0;
    uint64_t epoch = 0;
    bool stop = false;
    while (!stop && step < opts.max_steps) {
        auto batches = make_token_batches(lengths, opts.token_budget, opts.seed + epoch);
        ++epoch;
        for (const auto& batch : batches) {
            if (stop || step >= opts.max_steps) break;
            ++step;
            int64_t batch_tokens = 0;
            for (size_t idx : batch)
                batch_tokens += static_cast<int64_t>(train_examples[idx].target_ids.size());
            const auto t0 = std::chrono::steady_clock::now();
            Var total{};
            bool first = true;
            for (size_t idx : batch) {
                const auto& ex = train_examples[idx];
                Var w = graph.scale(model.example_loss(graph, ex.source_ids, ex.target_ids),
                                    static_cast<Float>(static_cast<double>(ex.target_ids.size()) /
                                                       static_cast<double>(batch_tokens)));
                total = first ? w : graph.add(total, w);
                first = false;
            }
            const double loss = graph.backward(total);
            if (!std::isfinite(loss)) {
                model.params().zero_grads();
                ++result.nan_steps;
            } else {
                adam.step(model.params(), opts.optim.rate(step));
                result.final_loss = loss;
            }
            result.loss_trace.push_back(loss);
            const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            if (opts.log_every > 0 && step % opts.log_every == 0)
                detail::log_step(log, step, loss, opts.optim.rate(step),
                                 static_cast<double>(batch_tokens) / dt);

            if (step % cfg.validation_interval == 0) {
                const double val = validation_loss();
                ++validations;
                result.val_trace.push_back(val);
                if (validations == 1) initial_val = val;
                detail::log_step(log, step, val, 0.0, 0.0);
                if (val < result.best_val_loss) {
                    result.best_val_loss = val;
                    result.best_val_step = step;
                    since_best = 0;
                    best_values.clear();
                    for (size_t i = 0; i < model.params().size(); ++i)
                        best_values.push_back(model.params()[i].value);
                } else {
                    ++since_best;
                }
                diverged_checks = val > 2.0 * initial_val ? diverged_checks + 1 : 0;
                if (diverged_checks >= 3)
                    throw NumericError("train: diverged, validation loss " + std::to_string(val) +
                                       " above twice the initial " + std::to_string(initial_val));
                if (since_best >= cfg.patience) {
                    stop = true;
                    result.stopped_early = true;
                }
            }
            if (opts.hooks.interval > 0 && opts.hooks.callback && step % opts.hooks.interval == 0 &&
                opts.hooks.callback(step)) {
                stop = true;
                result.stopped_early = true;
            }
        }
    }
    result.steps_done = step;
    // retain the best checkpoint
    if (!best_values.empty())
        for (size_t i = 0; i < model.params().size(); ++i)
            model.params()[i].value = best_values[i];
    if (!opts.output_dir.empty()) {
        auto path = opts.output_dir + "/best.bin";
        save_checkpoint(path, model.params(),
                        result.best_val_step >= 0 ? result.best_val_step : step);
        result.checkpoints.push_back(path);
    }
    return result;
}

// Named presets: `desk` is the CI scale, `paper` the full-scale
// configuration (depth 4, 32k vocabulary, 10k-update validations).
struct DualPreset {
    DualSourceConfig model;
    OptimizerSettings optim;
    int64_t token_budget = 1024;
    int vocab_size_cap = 800;
};

inline DualPreset dual_preset(const std::string& name) {
    if (name == "desk") {
        DualPreset p;
        p.model.model_dim = 64;
        p.model.heads = 4;
        p.model.ffn_dim = 256;
        p.model.depth = 2;
        p.model.max_positions = 256;
        p.model.label_smoothing = 0.0;
        p.optim = OptimizerSettings{3e-3, 200};
        p.token_budget = 1024;
        p.vocab_size_cap = 800;
        return p;
    }
    if (name == "paper") {
        DualPreset p;
        p.model.model_dim = 512;
        p.model.heads = 8;
        p.model.ffn_dim = 2048;
        p.model.depth = 4;
        p.model.max_positions = 1024;
        p.model.dropout = 0.1;
        p.model.label_smoothing = 0.1;
        p.optim = OptimizerSettings{3e-4, 4000};
        p.token_budget = 12800;  // roughly 100 examples per batch
        p.vocab_size_cap = 32000;
        return p;
    }
    throw UsageError("unknown preset '" + name + "' (expected desk|paper)");
}

struct BasicPreset {
    Seq2SeqConfig model;
    OptimizerSettings optim;
    int64_t token_budget = 1024;
    int vocab_size_cap = 800;
};

inline BasicPreset basic_preset(const std::string& name) {
    if (name == "desk") {
        BasicPreset p;
        p.model.embed_dim = 128;
        p.model.hidden_dim = 256;
        p.model.layers = 1;
        p.model.validation_interval = 100;
        p.model.patience = 5;
        p.optim = OptimizerSettings{1e-3, 0};
        p.vocab_size_cap = 800;
        return p;
    }
    if (name == "paper") {
        BasicPreset p;
        p.model.embed_dim = 512;
        p.model.hidden_dim = 1024;
        p.model.layers = 2;
        p.model.validation_interval = 10000;
        p.model.patience = 10;
        p.optim = OptimizerSettings{1e-3, 0};
        p.token_budget = 12800;
        p.vocab_size_cap = 32000;
        return p;
    }
    throw UsageError("unknown preset '" + name + "' (expected desk|paper)");
}

}  // namespace propex
