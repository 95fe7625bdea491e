#include "propex/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "propex/checkpoint.hpp"
#include "propex/common.hpp"
#include "propex/grad_check.hpp"
#include "propex/op_checks.hpp"
#include "propex/infer.hpp"
#include "propex/metrics.hpp"
#include "propex/records.hpp"
#include "propex/recycler.hpp"
#include "propex/subword.hpp"
#include "propex/train.hpp"
#include "propex/truecase.hpp"

namespace propex::pipeline {

namespace fs = std::filesystem;

namespace {

void write_text(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open '" + path + "' for writing");
    os << content;
    if (!os) throw DataError("write failed for '" + path + "'");
}

std::string read_text(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << is.rdbuf();
    return buf.str();
}

// resolved-config sidecar: <file>.run.json, or resolved_config.json for
// directory outputs
void write_run_config(const std::string& out_path, bool is_dir, const std::string& subcommand,
                      const nlohmann::json& options) {
    nlohmann::json j;
    j["tool"] = "propex";
    j["version"] = kVersion;
    j["subcommand"] = subcommand;
    j["options"] = options;
    const std::string path =
        is_dir ? out_path + "/resolved_config.json" : out_path + ".run.json";
    write_text(path, j.dump(2) + "\n");
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open '" + path + "'");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(is, line)) lines.push_back(line);
    return lines;
}

int64_t override_int(const std::map<std::string, std::string>& o, const std::string& key,
                     int64_t fallback) {
    auto it = o.find(key);
    return it == o.end() ? fallback : std::stoll(it->second);
}

double override_double(const std::map<std::string, std::string>& o, const std::string& key,
                       double fallback) {
    auto it = o.find(key);
    return it == o.end() ? fallback : std::stod(it->second);
}

}  // namespace

void tokenizer_train(const TokenizerTrainOptions& opts) {
    auto lines = read_lines(opts.input);
    SubwordModel model = SubwordModel::train(lines, opts.vocab_size);
    model.save(opts.output);
    write_run_config(opts.output, false, "tokenizer-train",
                     {{"input", opts.input}, {"output", opts.output}, {"vocab_size", opts.vocab_size}});
}

BuildRecycledReport build_recycled(const BuildRecycledOptions& opts) {
    InstanceFieldNames fields;
    fields.id = opts.id_field;
    fields.text = opts.text_field;
    fields.property = opts.property_field;
    fields.values = opts.values_field;
    auto instances = read_instances_jsonl(opts.input, fields);
    MergeStats stats;
    auto records = merge_instances(instances, &stats);
    write_records_jsonl(opts.output, records);
    write_run_config(opts.output, false, "build-recycled",
                     {{"input", opts.input},
                      {"output", opts.output},
                      {"instances_in", stats.instances_in},
                      {"records_out", stats.records_out},
                      {"text_conflicts", stats.text_conflicts}});
    return {stats.instances_in, stats.records_out, stats.text_conflicts};
}

SplitReport split(const SplitOptions& opts) {
    auto records = read_records_jsonl(opts.input);
    std::set<std::string> properties;
    for (const auto& r : records)
        for (const auto& [name, vals] : r.properties) properties.insert(name);

    LabelPartition partition = partition_labels(properties, opts.proportions, opts.seed);
    BlockSizes blocks =
        opts.blocks ? BlockSizes{(*opts.blocks)[0], (*opts.blocks)[1], (*opts.blocks)[2],
                                 (*opts.blocks)[3], (*opts.blocks)[4], (*opts.blocks)[5]}
                    : BlockSizes{}.scaled(opts.block_scale);
    SplitPlan plan = draft_splits(records, partition, blocks, opts.seed);

    SplitReport report;
    FilterStats filter_stats;
    if (!opts.annotation_filter.empty()) {
        auto filter = read_filter_jsonl(opts.annotation_filter);
        plan.test = apply_annotation_filter(plan.test, filter, &filter_stats);
        report.filter_removed_pct = filter_stats.values_removed_pct();
    }

    fs::create_directories(opts.output_dir);
    write_records_jsonl(opts.output_dir + "/train.jsonl", plan.train);
    write_records_jsonl(opts.output_dir + "/validation.jsonl", plan.validation);
    write_records_jsonl(opts.output_dir + "/test.jsonl", plan.test);
    write_text(opts.output_dir + "/partition.json", partition.to_json() + "\n");

    auto audit = audit_split(plan.train, plan.validation, plan.test, partition);
    nlohmann::json audit_json = nlohmann::json::parse(audit.report_json);
    audit_json["blocks"] = plan.block_counts;
    audit_json["stripped_values"] = plan.stripped_values;
    audit_json["dropped_articles"] = plan.dropped_articles;
    audit_json["dropped_values"] = plan.dropped_values;
    audit_json["input_values"] = plan.input_values;
    if (!opts.annotation_filter.empty()) {
        audit_json["filter"] = {{"values_before", filter_stats.values_before},
                                {"values_removed", filter_stats.values_removed},
                                {"properties_removed", filter_stats.properties_removed},
                                {"articles_dropped", filter_stats.articles_dropped},
                                {"unknown_refs", filter_stats.unknown_refs},
                                {"values_removed_pct", filter_stats.values_removed_pct()}};
    }
    write_text(opts.output_dir + "/audit.json", audit_json.dump(2) + "\n");

    nlohmann::json options{{"input", opts.input},
                           {"output_dir", opts.output_dir},
                           {"proportions", opts.proportions},
                           {"seed", opts.seed},
                           {"blocks", {blocks.a, blocks.b, blocks.c, blocks.d, blocks.e, blocks.f}}};
    if (!opts.annotation_filter.empty()) options["annotation_filter"] = opts.annotation_filter;
    write_run_config(opts.output_dir, true, "split", options);

    if (!audit.ok) throw AuditError("split: audit failed, see " + opts.output_dir + "/audit.json");
    report.train = static_cast<int64_t>(plan.train.size());
    report.validation = static_cast<int64_t>(plan.validation.size());
    report.test = static_cast<int64_t>(plan.test.size());
    report.dropped_articles = plan.dropped_articles;
    report.stripped_values = plan.stripped_values;
    return report;
}

void audit_split_dir(const std::string& dir) {
    auto train = read_records_jsonl(dir + "/train.jsonl");
    auto validation = read_records_jsonl(dir + "/validation.jsonl");
    auto test = read_records_jsonl(dir + "/test.jsonl");
    auto partition = LabelPartition::from_json(read_text(dir + "/partition.json"));
    auto audit = audit_split(train, validation, test, partition);
    write_text(dir + "/audit.json", audit.report_json + "\n");
    if (!audit.ok) throw AuditError("audit-split: leakage invariants violated in '" + dir + "'");
}

TagReport tag_em_in_file(const TagOptions& opts) {
    auto records = read_records_jsonl(opts.input);
    std::vector<std::vector<EmInTag>> tags(records.size());
    int64_t dummy1 = 0, dummy2 = 0;
    run_sharded(
        records.size(), opts.jobs,
        [&](size_t i, int64_t&, int64_t&) { tags[i] = tag_em_in(records[i]); }, dummy1, dummy2);

    TagReport report;
    std::ofstream os(opts.output, std::ios::binary);
    if (!os) throw DataError("cannot open '" + opts.output + "' for writing");
    for (size_t i = 0; i < records.size(); ++i) {
        for (const auto& t : tags[i]) {
            nlohmann::json j{{"id", records[i].article_id},
                             {"property", t.property},
                             {"value", t.value},
                             {"tag", t.exact_match ? "EM" : "IN"}};
            os << j.dump() << "\n";
            ++report.values;
            report.exact_match += t.exact_match ? 1 : 0;
        }
    }
    write_run_config(opts.output, false, "tag-em-in",
                     {{"input", opts.input}, {"output", opts.output}, {"jobs", opts.jobs}});
    return report;
}

namespace {

nlohmann::json train_options_json(const TrainOptions& opts) {
    return {{"model", opts.model},       {"mode", opts.mode},
            {"preset", opts.preset},     {"train", opts.train_path},
            {"valid", opts.valid_path},  {"tokenizer", opts.tokenizer_path},
            {"output_dir", opts.output_dir}, {"steps", opts.steps},
            {"seed", opts.seed},         {"dtype", opts.dtype},
            {"overrides", opts.overrides}};
}

template <class Float>
TrainReport train_dual_impl(const TrainOptions& opts) {
    auto records = read_records_jsonl(opts.train_path);
    SubwordModel tok = SubwordModel::load(opts.tokenizer_path);
    DualPreset preset = dual_preset(opts.preset);

    DualSourceConfig cfg = preset.model;
    cfg.vocab_size = tok.vocab_size();
    cfg.model_dim = static_cast<int>(override_int(opts.overrides, "model_dim", cfg.model_dim));
    cfg.heads = static_cast<int>(override_int(opts.overrides, "heads", cfg.heads));
    cfg.ffn_dim = static_cast<int>(override_int(opts.overrides, "ffn_dim", cfg.ffn_dim));
    cfg.depth = static_cast<int>(override_int(opts.overrides, "depth", cfg.depth));
    cfg.max_positions = static_cast<int>(override_int(opts.overrides, "max_positions", cfg.max_positions));
    cfg.dropout = override_double(opts.overrides, "dropout", cfg.dropout);
    cfg.label_smoothing = override_double(opts.overrides, "label_smoothing", cfg.label_smoothing);

    DualTrainOptions topts;
    topts.optim = preset.optim;
    topts.optim.lr = override_double(opts.overrides, "lr", topts.optim.lr);
    topts.optim.warmup_steps = override_int(opts.overrides, "warmup", topts.optim.warmup_steps);
    topts.steps = opts.steps;
    topts.token_budget = override_int(opts.overrides, "token_budget", preset.token_budget);
    topts.seed = opts.seed;
    topts.checkpoint_every = override_int(opts.overrides, "checkpoint_every", 0);
    topts.output_dir = opts.output_dir;

    const TrainingMode mode = training_mode_from_string(opts.mode);
    DualSourceModel<Float> model(cfg, opts.seed);
    auto examples = build_dual_examples(records, tok, mode);

    std::ofstream log(opts.output_dir + "/train_log.jsonl", std::ios::binary);
    TrainResult result = train_dual(model, examples, topts, &log);

    nlohmann::json model_json{{"type", "dual"},
                              {"mode", opts.mode},
                              {"dtype", opts.dtype},
                              {"config", cfg.to_json()},
                              {"optimizer", topts.optim.to_json()}};
    write_text(opts.output_dir + "/model.json", model_json.dump(2) + "\n");
    write_run_config(opts.output_dir, true, "train", train_options_json(opts));

    TrainReport report;
    report.steps_done = result.steps_done;
    report.final_loss = result.final_loss;
    report.nan_steps = result.nan_steps;
    report.checkpoints = result.checkpoints;
    return report;
}

template <class Float>
TrainReport train_basic_impl(const TrainOptions& opts) {
    auto records = read_records_jsonl(opts.train_path);
    if (opts.valid_path.empty())
        throw UsageError("train: the basic model needs --valid for early stopping");
    auto valid_records = read_records_jsonl(opts.valid_path);
    SubwordModel tok = SubwordModel::load(opts.tokenizer_path);
    BasicPreset preset = basic_preset(opts.preset);

    Seq2SeqConfig cfg = preset.model;
    cfg.vocab_size = tok.vocab_size();
    cfg.embed_dim = static_cast<int>(override_int(opts.overrides, "embed_dim", cfg.embed_dim));
    cfg.hidden_dim = static_cast<int>(override_int(opts.overrides, "hidden_dim", cfg.hidden_dim));
    cfg.layers = static_cast<int>(override_int(opts.overrides, "layers", cfg.layers));
    cfg.validation_interval =
        override_int(opts.overrides, "validation_interval", cfg.validation_interval);
    cfg.patience = override_int(opts.overrides, "patience", cfg.patience);

    BasicTrainOptions topts;
    topts.optim = preset.optim;
    topts.optim.lr = override_double(opts.overrides, "lr", topts.optim.lr);
    topts.max_steps = opts.steps;
    topts.token_budget = override_int(opts.overrides, "token_budget", preset.token_budget);
    topts.seed = opts.seed;
    topts.output_dir = opts.output_dir;

    Seq2SeqModel<Float> model(cfg, opts.seed);
    auto train_examples = build_basic_examples(records, tok);
    auto valid_examples = build_basic_examples(valid_records, tok);

    std::ofstream log(opts.output_dir + "/train_log.jsonl", std::ios::binary);
    TrainResult result = train_basic(model, train_examples, valid_examples, topts, &log);

    // truecaser learned from the raw (cased) article texts
    std::vector<std::string> cased_lines;
    for (const auto& r : records) cased_lines.push_back(r.text);
    Truecaser tc = Truecaser::train(cased_lines);
    tc.save(opts.output_dir + "/truecaser.json");

    nlohmann::json model_json{{"type", "basic"},
                              {"mode", "single"},
                              {"dtype", opts.dtype},
                              {"config", cfg.to_json()},
                              {"optimizer", topts.optim.to_json()}};
    write_text(opts.output_dir + "/model.json", model_json.dump(2) + "\n");
    write_run_config(opts.output_dir, true, "train", train_options_json(opts));

    TrainReport report;
    report.steps_done = result.steps_done;
    report.final_loss = result.final_loss;
    report.best_val_loss = result.best_val_loss;
    report.nan_steps = result.nan_steps;
    report.checkpoints = result.checkpoints;
    return report;
}

}  // namespace

TrainReport train(const TrainOptions& opts) {
    if (opts.dtype != "f32" && opts.dtype != "f64")
        throw UsageError("train: dtype must be f32 or f64");
    fs::create_directories(opts.output_dir);
    if (opts.model == "dual")
        return opts.dtype == "f32" ? train_dual_impl<float>(opts) : train_dual_impl<double>(opts);
    if (opts.model == "basic")
        return opts.dtype == "f32" ? train_basic_impl<float>(opts) : train_basic_impl<double>(opts);
    throw UsageError("train: model must be dual or basic");
}

namespace {

template <class Float>
DecodeReport decode_impl(const DecodeCliOptions& opts, const nlohmann::json& model_json) {
    SubwordModel tok = SubwordModel::load(opts.tokenizer_path);
    auto records = read_records_jsonl(opts.input);

    DecodeOptions dopts;
    dopts.beam_width = opts.beam_width;
    dopts.max_len = opts.max_len;
    dopts.length_norm_alpha = opts.length_norm_alpha;
    dopts.ablate_article = opts.ablate_article;
    dopts.jobs = opts.jobs;

    const std::string type = model_json.at("type").get<std::string>();
    DecodeOutcome outcome;
    if (type == "dual") {
        DualSourceConfig cfg = DualSourceConfig::from_json(model_json.at("config"));
        const TrainingMode mode = training_mode_from_string(model_json.at("mode").get<std::string>());
        std::vector<std::unique_ptr<DualSourceModel<Float>>> models;
        std::vector<DualSourceModel<Float>*> raw;
        for (const auto& ckpt : opts.checkpoints) {
            models.push_back(std::make_unique<DualSourceModel<Float>>(cfg, 0));
            load_checkpoint(ckpt, models.back()->params());
            raw.push_back(models.back().get());
        }
        outcome = decode_dual<Float>(raw, tok, records, mode, dopts);
    } else if (type == "basic") {
        if (opts.checkpoints.size() != 1)
            throw UsageError("decode: the basic model does not support ensembles");
        Seq2SeqConfig cfg = Seq2SeqConfig::from_json(model_json.at("config"));
        Seq2SeqModel<Float> model(cfg, 0);
        load_checkpoint(opts.checkpoints[0], model.params());
        Truecaser tc;
        const std::string tc_path = opts.model_dir + "/truecaser.json";
        bool have_tc = fs::exists(tc_path);
        if (have_tc) tc = Truecaser::load(tc_path);
        outcome = decode_basic<Float>(model, tok, records, have_tc ? &tc : nullptr, dopts);
    } else {
        throw DataError("decode: unknown model type '" + type + "'");
    }

    std::ofstream os(opts.output, std::ios::binary);
    if (!os) throw DataError("cannot open '" + opts.output + "' for writing");
    for (size_t i = 0; i < outcome.predictions.size(); ++i) {
        nlohmann::json j{{"id", outcome.predictions[i].article_id},
                         {"properties", outcome.predictions[i].properties},
                         {"score", outcome.scores[i]},
                         {"flags", outcome.flags[i]}};
        os << j.dump() << "\n";
    }
    os.close();

    nlohmann::json options{{"model_dir", opts.model_dir}, {"checkpoints", opts.checkpoints},
                           {"tokenizer", opts.tokenizer_path}, {"input", opts.input},
                           {"output", opts.output},       {"beam", opts.beam_width},
                           {"max_len", opts.max_len},     {"alpha", opts.length_norm_alpha},
                           {"ablate_article", opts.ablate_article}, {"jobs", opts.jobs}};
    write_run_config(opts.output, false, "decode", options);

    DecodeReport report;
    report.records = static_cast<int64_t>(records.size());
    report.malformed_segments = outcome.malformed_segments;
    report.unfinished = outcome.unfinished;
    return report;
}

}  // namespace

DecodeReport decode(const DecodeCliOptions& opts) {
    if (opts.checkpoints.empty()) throw UsageError("decode: need at least one checkpoint");
    nlohmann::json model_json = nlohmann::json::parse(read_text(opts.model_dir + "/model.json"));
    const std::string dtype = model_json.value("dtype", "f32");
    return dtype == "f64" ? decode_impl<double>(opts, model_json)
                          : decode_impl<float>(opts, model_json);
}

std::string evaluate_files(const EvaluateOptions& opts, std::string* table_out) {
    auto preds = read_predictions_jsonl(opts.predictions);
    auto golds = read_records_jsonl(opts.gold);
    std::vector<TaggedValue> tags;
    if (!opts.tags.empty()) tags = read_tags_jsonl(opts.tags);
    MetricReport report = evaluate(preds, golds, opts.tags.empty() ? nullptr : &tags);
    const std::string json = report.to_json();
    if (!opts.output.empty()) {
        write_text(opts.output, json + "\n");
        write_run_config(opts.output, false, "evaluate",
                         {{"predictions", opts.predictions},
                          {"gold", opts.gold},
                          {"tags", opts.tags},
                          {"output", opts.output}});
    }
    if (table_out) *table_out = report.to_table();
    return json;
}

GradCheckSummary grad_check_suite(const GradCheckOptions& opts) {
    GradCheckSummary summary;
    for (OpKind kind : checked_op_kinds()) {
        for (int seed = 0; seed < opts.seeds; ++seed) {
            auto report = run_primitive_check(kind, static_cast<uint64_t>(seed));
            summary.worst_rel_err = std::max(summary.worst_rel_err, report.max_rel_err);
            ++summary.checks;
            if (report.max_rel_err > opts.tolerance)
                throw NumericError(std::string("grad-check: ") + op_kind_name(kind) + " seed " +
                                   std::to_string(seed) + " rel err " +
                                   std::to_string(report.max_rel_err));
        }
    }
    if (opts.include_models) {
        for (uint64_t seed = 0; seed < 3; ++seed) {
            auto dual = run_dual_model_check(seed);
            auto basic = run_basic_model_check(seed);
            summary.worst_rel_err = std::max({summary.worst_rel_err, dual, basic});
            summary.checks += 2;
            if (dual > opts.tolerance || basic > opts.tolerance)
                throw NumericError("grad-check: model check failed at seed " + std::to_string(seed));
        }
    }
    summary.passed = true;
    return summary;
}

}  // namespace propex::pipeline
