#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace propex::pipeline {

// End-to-end subcommand implementations shared by the CLI binary and the
// python module. Every run writes a resolved-config JSON next to its
// outputs; directories get resolved_config.json, single files get
// <path>.run.json.

struct TokenizerTrainOptions {
    std::string input;
    std::string output;
    int vocab_size = 800;
};
void tokenizer_train(const TokenizerTrainOptions& opts);

struct BuildRecycledOptions {
    std::string input;
    std::string output;
    std::string id_field = "id";
    std::string text_field = "text";
    std::string property_field = "property";
    std::string values_field = "values";
};
struct BuildRecycledReport {
    int64_t instances_in = 0;
    int64_t records_out = 0;
    int64_t text_conflicts = 0;
};
BuildRecycledReport build_recycled(const BuildRecycledOptions& opts);

struct SplitOptions {
    std::string input;
    std::string output_dir;
    std::array<double, 4> proportions{0.2, 0.2, 0.1, 0.5};
    double block_scale = 1.0;
    std::optional<std::array<int64_t, 6>> blocks;  // overrides the scaled defaults
    uint64_t seed = 1;
    std::string annotation_filter;  // optional; applies to the test split
};
struct SplitReport {
    int64_t train = 0, validation = 0, test = 0;
    int64_t dropped_articles = 0;
    int64_t stripped_values = 0;
    double filter_removed_pct = 0.0;
};
SplitReport split(const SplitOptions& opts);

// Re-checks the leakage invariants of a finished split directory.
// Throws AuditError when any invariant fails.
void audit_split_dir(const std::string& dir);

struct TagOptions {
    std::string input;
    std::string output;
    int jobs = 1;
};
struct TagReport {
    int64_t values = 0;
    int64_t exact_match = 0;
};
TagReport tag_em_in_file(const TagOptions& opts);

struct TrainOptions {
    std::string model = "dual";  // dual | basic
    std::string mode = "multi";  // single | multi (dual only)
    std::string preset = "desk";
    std::string train_path;
    std::string valid_path;  // required for basic
    std::string tokenizer_path;
    std::string output_dir;
    int64_t steps = 2000;
    uint64_t seed = 1;
    std::string dtype = "f32";  // f32 | f64
    std::map<std::string, std::string> overrides;
};
struct TrainReport {
    int64_t steps_done = 0;
    double final_loss = 0.0;
    double best_val_loss = 0.0;
    int64_t nan_steps = 0;
    std::vector<std::string> checkpoints;
};
TrainReport train(const TrainOptions& opts);

struct DecodeCliOptions {
    std::string model_dir;                 // directory written by train
    std::vector<std::string> checkpoints;  // >= 1; several form an ensemble
    std::string tokenizer_path;
    std::string input;
    std::string output;
    int beam_width = 8;
    int max_len = 64;
    double length_norm_alpha = 0.6;
    bool ablate_article = false;
    int jobs = 1;
};
struct DecodeReport {
    int64_t records = 0;
    int64_t malformed_segments = 0;
    int64_t unfinished = 0;
};
DecodeReport decode(const DecodeCliOptions& opts);

struct EvaluateOptions {
    std::string predictions;
    std::string gold;
    std::string tags;  // optional
    std::string output;
};
// Returns the metric report JSON; also prints the aligned table when
// `table_out` is given.
std::string evaluate_files(const EvaluateOptions& opts, std::string* table_out = nullptr);

struct GradCheckOptions {
    int seeds = 100;
    bool include_models = true;
    double tolerance = 1e-4;
};
struct GradCheckSummary {
    double worst_rel_err = 0.0;
    int64_t checks = 0;
    bool passed = false;
};
// Throws NumericError when any check exceeds the tolerance.
GradCheckSummary grad_check_suite(const GradCheckOptions& opts);

}  // namespace propex::pipeline
