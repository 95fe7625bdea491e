// propex: multi-property information extraction toolkit.
//
// One entry point, batch subcommands, all randomness behind --seed.
// Exit codes: 0 ok, 2 usage, 3 data/schema, 4 audit failure, 5 numeric.

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "propex/common.hpp"
#include "propex/pipeline.hpp"

namespace {

using namespace propex;
namespace pl = propex::pipeline;

std::map<std::string, std::string> parse_overrides(const std::vector<std::string>& kvs) {
    std::map<std::string, std::string> out;
    for (const auto& kv : kvs) {
        auto pos = kv.find('=');
        if (pos == std::string::npos || pos == 0)
            throw UsageError("--set expects key=value, got '" + kv + "'");
        out[kv.substr(0, pos)] = kv.substr(pos + 1);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"propex: multi-property information extraction toolkit"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    // tokenizer-train
    pl::TokenizerTrainOptions tt;
    auto* cmd_tt = app.add_subcommand("tokenizer-train", "Train the subword model on a text corpus");
    cmd_tt->add_option("--input", tt.input, "Corpus, one line per sentence")->required();
    cmd_tt->add_option("--output", tt.output, "Model JSON path")->required();
    cmd_tt->add_option("--vocab-size", tt.vocab_size, "Total vocabulary size");

    // build-recycled
    pl::BuildRecycledOptions br;
    auto* cmd_br = app.add_subcommand("build-recycled",
                                      "Merge per-property instances into per-article records");
    cmd_br->add_option("--input", br.input, "Instances JSONL")->required();
    cmd_br->add_option("--output", br.output, "Records JSONL")->required();
    cmd_br->add_option("--id-field", br.id_field, "Instance id field name");
    cmd_br->add_option("--text-field", br.text_field, "Instance text field name");
    cmd_br->add_option("--property-field", br.property_field, "Instance property field name");
    cmd_br->add_option("--values-field", br.values_field, "Instance values field name");

    // split
    pl::SplitOptions sp;
    std::vector<double> proportions;
    std::vector<int64_t> blocks;
    auto* cmd_sp = app.add_subcommand("split", "Partition labels and draft the A-G block split");
    cmd_sp->add_option("--input", sp.input, "Records JSONL")->required();
    cmd_sp->add_option("--output-dir", sp.output_dir, "Split output directory")->required();
    cmd_sp->add_option("--proportions", proportions, "Label set proportions (4 values)")
        ->expected(4);
    cmd_sp->add_option("--scale", sp.block_scale, "Scale factor for the default block sizes");
    cmd_sp->add_option("--blocks", blocks, "Explicit block sizes A B C D E F")->expected(6);
    cmd_sp->add_option("--seed", sp.seed, "Random seed");
    cmd_sp->add_option("--annotation-filter", sp.annotation_filter,
                       "Filter JSONL applied to the test split");

    // audit-split
    std::string audit_dir;
    auto* cmd_au = app.add_subcommand("audit-split", "Re-check leakage invariants of a split");
    cmd_au->add_option("--dir", audit_dir, "Split directory")->required();

    // tag-em-in
    pl::TagOptions tg;
    auto* cmd_tg = app.add_subcommand("tag-em-in", "Tag gold values as exact-match or inferable");
    cmd_tg->add_option("--input", tg.input, "Records JSONL")->required();
    cmd_tg->add_option("--output", tg.output, "Tags JSONL")->required();
    cmd_tg->add_option("--jobs", tg.jobs, "Parallel shards");

    // train
    pl::TrainOptions tr;
    std::vector<std::string> overrides;
    auto* cmd_tr = app.add_subcommand("train", "Train a model");
    cmd_tr->add_option("--model", tr.model, "dual|basic")->check(CLI::IsMember({"dual", "basic"}));
    cmd_tr->add_option("--mode", tr.mode, "single|multi")->check(CLI::IsMember({"single", "multi"}));
    cmd_tr->add_option("--preset", tr.preset, "desk|paper")->check(CLI::IsMember({"desk", "paper"}));
    cmd_tr->add_option("--train", tr.train_path, "Training records JSONL")->required();
    cmd_tr->add_option("--valid", tr.valid_path, "Validation records JSONL (required for basic)");
    cmd_tr->add_option("--tokenizer", tr.tokenizer_path, "Subword model JSON")->required();
    cmd_tr->add_option("--output-dir", tr.output_dir, "Run directory")->required();
    cmd_tr->add_option("--steps", tr.steps, "Step budget");
    cmd_tr->add_option("--seed", tr.seed, "Random seed");
    cmd_tr->add_option("--dtype", tr.dtype, "f32|f64")->check(CLI::IsMember({"f32", "f64"}));
    cmd_tr->add_option("--set", overrides, "Config overrides as key=value");

    // decode
    pl::DecodeCliOptions dc;
    auto* cmd_dc = app.add_subcommand("decode", "Generate predictions with beam search");
    cmd_dc->add_option("--model-dir", dc.model_dir, "Run directory written by train")->required();
    cmd_dc->add_option("--checkpoint", dc.checkpoints,
                       "Checkpoint file(s); several form an ensemble");
    cmd_dc->add_option("--ensemble", dc.checkpoints, "Alias for repeated --checkpoint");
    cmd_dc->add_option("--tokenizer", dc.tokenizer_path, "Subword model JSON")->required();
    cmd_dc->add_option("--input", dc.input, "Gold records JSONL (queried keys)")->required();
    cmd_dc->add_option("--output", dc.output, "Predictions JSONL")->required();
    cmd_dc->add_option("--beam", dc.beam_width, "Beam width");
    cmd_dc->add_option("--max-len", dc.max_len, "Maximum generated tokens");
    cmd_dc->add_option("--alpha", dc.length_norm_alpha, "Length normalization exponent");
    cmd_dc->add_flag("--ablate-article", dc.ablate_article,
                     "Replace the article with a single PAD state");
    cmd_dc->add_option("--jobs", dc.jobs, "Parallel shards");

    // evaluate
    pl::EvaluateOptions ev;
    auto* cmd_ev = app.add_subcommand("evaluate", "Score predictions against gold records");
    cmd_ev->add_option("--predictions", ev.predictions, "Predictions JSONL")->required();
    cmd_ev->add_option("--gold", ev.gold, "Gold records JSONL")->required();
    cmd_ev->add_option("--tags", ev.tags, "EM/IN tags JSONL for subset recall");
    cmd_ev->add_option("--output", ev.output, "Report JSON path");

    // grad-check
    pl::GradCheckOptions gc;
    auto* cmd_gc = app.add_subcommand("grad-check", "Finite-difference verification suite");
    cmd_gc->add_option("--seeds", gc.seeds, "Seeds per primitive op");
    cmd_gc->add_option("--tolerance", gc.tolerance, "Relative error tolerance");
    cmd_gc->add_flag("!--no-models", gc.include_models, "Skip the full-model checks");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*cmd_tt) {
            pl::tokenizer_train(tt);
            std::printf("tokenizer-train: wrote %s\n", tt.output.c_str());
        } else if (*cmd_br) {
            auto r = pl::build_recycled(br);
            std::printf("build-recycled: %lld instances -> %lld records (%lld text conflicts)\n",
                        static_cast<long long>(r.instances_in), static_cast<long long>(r.records_out),
                        static_cast<long long>(r.text_conflicts));
        } else if (*cmd_sp) {
            if (!proportions.empty())
                sp.proportions = {proportions[0], proportions[1], proportions[2], proportions[3]};
            if (!blocks.empty())
                sp.blocks = std::array<int64_t, 6>{blocks[0], blocks[1], blocks[2],
                                                   blocks[3], blocks[4], blocks[5]};
            auto r = pl::split(sp);
            std::printf("split: train=%lld validation=%lld test=%lld dropped=%lld stripped=%lld\n",
                        static_cast<long long>(r.train), static_cast<long long>(r.validation),
                        static_cast<long long>(r.test), static_cast<long long>(r.dropped_articles),
                        static_cast<long long>(r.stripped_values));
        } else if (*cmd_au) {
            pl::audit_split_dir(audit_dir);
            std::printf("audit-split: ok\n");
        } else if (*cmd_tg) {
            auto r = pl::tag_em_in_file(tg);
            std::printf("tag-em-in: %lld values, %lld exact-match\n",
                        static_cast<long long>(r.values), static_cast<long long>(r.exact_match));
        } else if (*cmd_tr) {
            tr.overrides = parse_overrides(overrides);
            auto r = pl::train(tr);
            std::printf("train: %lld steps, final loss %.4f, %zu checkpoints\n",
                        static_cast<long long>(r.steps_done), r.final_loss, r.checkpoints.size());
        } else if (*cmd_dc) {
            auto r = pl::decode(dc);
            std::printf("decode: %lld records, %lld malformed segments, %lld unfinished\n",
                        static_cast<long long>(r.records),
                        static_cast<long long>(r.malformed_segments),
                        static_cast<long long>(r.unfinished));
        } else if (*cmd_ev) {
            std::string table;
            pl::evaluate_files(ev, &table);
            std::fputs(table.c_str(), stdout);
        } else if (*cmd_gc) {
            auto r = pl::grad_check_suite(gc);
            std::printf("grad-check: %lld checks, worst relative error %.3g\n",
                        static_cast<long long>(r.checks), r.worst_rel_err);
        }
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: usage: %s\n", e.what());
        return 2;
    } catch (const AuditError& e) {
        std::fprintf(stderr, "error: audit: %s\n", e.what());
        return 4;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "error: numeric: %s\n", e.what());
        return 5;
    } catch (const DataError& e) {
        std::fprintf(stderr, "error: data: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
