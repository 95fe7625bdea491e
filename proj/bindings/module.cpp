#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "propex/beam.hpp"
#include "propex/common.hpp"
#include "propex/metrics.hpp"
#include "propex/op_checks.hpp"
#include "propex/pipeline.hpp"
#include "propex/records.hpp"
#include "propex/recycler.hpp"
#include "propex/subword.hpp"
#include "propex/target_format.hpp"
#include "propex/text_util.hpp"
#include "propex/truecase.hpp"

namespace py = pybind11;
using namespace propex;

namespace {

// Scorer backed by a Python callable: prefix -> list of log-probs.
class PyScorer : public Scorer {
public:
    PyScorer(py::function fn, int vocab) : fn_(std::move(fn)), vocab_(vocab) {}
    int vocab_size() const override { return vocab_; }
    std::vector<double> next_log_probs(const std::vector<int>& prefix) override {
        return fn_(prefix).cast<std::vector<double>>();
    }

private:
    py::function fn_;
    int vocab_;
};

MultiPropertyRecord record_from_dict(const py::dict& d) {
    MultiPropertyRecord r;
    r.article_id = d["id"].cast<std::string>();
    r.text = d.contains("text") ? d["text"].cast<std::string>() : std::string();
    for (auto item : d["properties"].cast<py::dict>())
        r.properties[item.first.cast<std::string>()] = item.second.cast<std::vector<std::string>>();
    return r;
}

std::vector<MultiPropertyRecord> records_from_list(const py::list& items) {
    std::vector<MultiPropertyRecord> out;
    for (auto item : items) out.push_back(record_from_dict(item.cast<py::dict>()));
    return out;
}

std::vector<Prediction> predictions_from_list(const py::list& items) {
    std::vector<Prediction> out;
    for (auto item : items) {
        auto d = item.cast<py::dict>();
        Prediction p;
        p.article_id = d["id"].cast<std::string>();
        for (auto kv : d["properties"].cast<py::dict>())
            p.properties[kv.first.cast<std::string>()] = kv.second.cast<std::vector<std::string>>();
        out.push_back(std::move(p));
    }
    return out;
}

py::dict record_to_dict(const MultiPropertyRecord& r) {
    py::dict d;
    d["id"] = r.article_id;
    d["text"] = r.text;
    py::dict props;
    for (const auto& [name, vals] : r.properties) props[py::str(name)] = vals;
    d["properties"] = props;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Multi-property information extraction toolkit";
    m.attr("__version__") = kVersion;

    py::register_exception<UsageError>(m, "UsageError");
    py::register_exception<DataError>(m, "DataError");
    py::register_exception<AuditError>(m, "AuditError");
    py::register_exception<NumericError>(m, "NumericError");

    // ---- tokenization ----
    py::class_<SubwordModel>(m, "SubwordModel")
        .def_static("train", &SubwordModel::train, py::arg("corpus_lines"), py::arg("vocab_size"))
        .def_static("load", &SubwordModel::load, py::arg("path"))
        .def("save", &SubwordModel::save, py::arg("path"))
        .def("encode", &SubwordModel::encode, py::arg("text"), py::arg("add_bos_eos") = false)
        .def("decode", &SubwordModel::decode, py::arg("ids"))
        .def("piece", &SubwordModel::piece_text, py::arg("id"))
        .def_property_readonly("vocab_size", &SubwordModel::vocab_size)
        .def_property_readonly("merge_count", &SubwordModel::merge_count);

    py::class_<Truecaser>(m, "Truecaser")
        .def_static("train", &Truecaser::train, py::arg("cased_lines"),
                    py::arg("skip_sentence_initial") = true)
        .def_static("load", &Truecaser::load, py::arg("path"))
        .def("save", &Truecaser::save, py::arg("path"))
        .def("apply", &Truecaser::apply, py::arg("lowercased_text"));

    m.def("normalize_value", [](const std::string& s) { return normalize_value(s); });

    // ---- dataset construction ----
    m.def(
        "merge_instances",
        [](const py::list& instances) {
            std::vector<SingleInstance> in;
            for (auto item : instances) {
                auto d = item.cast<py::dict>();
                SingleInstance inst;
                inst.article_id = d["id"].cast<std::string>();
                inst.text = d["text"].cast<std::string>();
                inst.property = d["property"].cast<std::string>();
                inst.values = d["values"].cast<std::vector<std::string>>();
                in.push_back(std::move(inst));
            }
            MergeStats stats;
            auto records = merge_instances(in, &stats);
            py::list out;
            for (const auto& r : records) out.append(record_to_dict(r));
            py::dict st;
            st["instances_in"] = stats.instances_in;
            st["records_out"] = stats.records_out;
            st["text_conflicts"] = stats.text_conflicts;
            return py::make_tuple(out, st);
        },
        py::arg("instances"));

    m.def(
        "partition_labels",
        [](const std::vector<std::string>& properties, const std::array<double, 4>& proportions,
           uint64_t seed) {
            std::set<std::string> props(properties.begin(), properties.end());
            auto p = partition_labels(props, proportions, seed);
            py::dict d;
            d["set1"] = p.set1;
            d["set2"] = p.set2;
            d["set3"] = p.set3;
            d["set4"] = p.set4;
            d["seed"] = p.seed;
            return d;
        },
        py::arg("properties"), py::arg("proportions"), py::arg("seed"));

    m.def(
        "draft_splits",
        [](const py::list& records, const py::dict& partition, const std::array<int64_t, 6>& blocks,
           uint64_t seed) {
            LabelPartition p;
            p.set1 = partition["set1"].cast<std::set<std::string>>();
            p.set2 = partition["set2"].cast<std::set<std::string>>();
            p.set3 = partition["set3"].cast<std::set<std::string>>();
            p.set4 = partition["set4"].cast<std::set<std::string>>();
            BlockSizes sizes{blocks[0], blocks[1], blocks[2], blocks[3], blocks[4], blocks[5]};
            auto plan = draft_splits(records_from_list(records), p, sizes, seed);
            auto pack = [](const std::vector<MultiPropertyRecord>& v) {
                py::list out;
                for (const auto& r : v) out.append(record_to_dict(r));
                return out;
            };
            py::dict d;
            d["train"] = pack(plan.train);
            d["validation"] = pack(plan.validation);
            d["test"] = pack(plan.test);
            d["blocks"] = plan.block_counts;
            d["dropped_articles"] = plan.dropped_articles;
            d["stripped_values"] = plan.stripped_values;
            return d;
        },
        py::arg("records"), py::arg("partition"), py::arg("blocks"), py::arg("seed"));

    m.def(
        "tag_em_in",
        [](const py::dict& record) {
            py::list out;
            for (const auto& t : tag_em_in(record_from_dict(record))) {
                py::dict d;
                d["property"] = t.property;
                d["value"] = t.value;
                d["tag"] = t.exact_match ? "EM" : "IN";
                out.append(d);
            }
            return out;
        },
        py::arg("record"));

    // ---- metrics ----
    m.def("set_f1", &set_f1, py::arg("pred"), py::arg("gold"));
    m.def(
        "mean_f1",
        [](const std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>>& pairs) {
            return mean_f1(pairs);
        },
        py::arg("pairs"));
    m.def(
        "mean_multilabel_f1",
        [](const py::list& preds, const py::list& golds) {
            return mean_multilabel_f1(predictions_from_list(preds), records_from_list(golds));
        },
        py::arg("predictions"), py::arg("golds"));
    m.def(
        "per_label_f1",
        [](const py::list& preds, const py::list& golds, const std::string& key) {
            return per_label_f1(predictions_from_list(preds), records_from_list(golds), key);
        },
        py::arg("predictions"), py::arg("golds"), py::arg("key"));

    // ---- target format ----
    m.def("serialize_target", &serialize_target, py::arg("properties"));
    m.def(
        "parse_target",
        [](const std::string& text) {
            auto parsed = parse_target(text);
            return py::make_tuple(parsed.properties, parsed.malformed_segments);
        },
        py::arg("text"));

    // ---- decoding ----
    m.def(
        "beam_search",
        [](py::function scorer, int vocab, int eos_id, int beam_width, int max_len, double alpha) {
            PyScorer s(std::move(scorer), vocab);
            auto r = beam_search(s, eos_id, beam_width, max_len, alpha);
            py::dict d;
            d["tokens"] = r.best.tokens;
            d["log_prob"] = r.best.log_prob;
            d["finished"] = r.best.finished;
            d["hit_max_len"] = r.hit_max_len;
            py::list nbest;
            for (const auto& h : r.nbest) {
                py::dict hd;
                hd["tokens"] = h.tokens;
                hd["log_prob"] = h.log_prob;
                nbest.append(hd);
            }
            d["nbest"] = nbest;
            return d;
        },
        py::arg("scorer"), py::arg("vocab_size"), py::arg("eos_id"), py::arg("beam_width") = 8,
        py::arg("max_len") = 64, py::arg("length_norm_alpha") = 0.6);

    m.def(
        "ensemble_log_probs",
        [](const std::vector<std::vector<double>>& member_log_probs) {
            class Fixed : public Scorer {
            public:
                explicit Fixed(std::vector<double> lp) : lp_(std::move(lp)) {}
                int vocab_size() const override { return static_cast<int>(lp_.size()); }
                std::vector<double> next_log_probs(const std::vector<int>&) override { return lp_; }

            private:
                std::vector<double> lp_;
            };
            std::vector<std::unique_ptr<Fixed>> owners;
            std::vector<Scorer*> members;
            for (const auto& lp : member_log_probs) owners.push_back(std::make_unique<Fixed>(lp));
            for (auto& o : owners) members.push_back(o.get());
            EnsembleScorer ens(members);
            return ens.next_log_probs({});
        },
        py::arg("member_log_probs"));

    // ---- verification ----
    m.def(
        "grad_check_ops",
        [](int seeds) {
            double worst = 0.0;
            for (OpKind kind : checked_op_kinds())
                for (int seed = 0; seed < seeds; ++seed)
                    worst = std::max(
                        worst, run_primitive_check(kind, static_cast<uint64_t>(seed)).max_rel_err);
            return worst;
        },
        py::arg("seeds") = 5);
    m.def("grad_check_dual_model", &run_dual_model_check, py::arg("seed") = 0);
    m.def("grad_check_basic_model", &run_basic_model_check, py::arg("seed") = 0);

    // ---- file pipeline (mirrors the CLI) ----
    auto pipe = m.def_submodule("pipeline", "File-based pipeline entry points");
    pipe.def(
        "tokenizer_train",
        [](const std::string& input, const std::string& output, int vocab_size) {
            pipeline::tokenizer_train({input, output, vocab_size});
        },
        py::arg("input"), py::arg("output"), py::arg("vocab_size") = 800);
    pipe.def(
        "split",
        [](const std::string& input, const std::string& output_dir,
           const std::array<double, 4>& proportions, const std::array<int64_t, 6>& blocks,
           uint64_t seed, const std::string& annotation_filter) {
            pipeline::SplitOptions opts;
            opts.input = input;
            opts.output_dir = output_dir;
            opts.proportions = proportions;
            opts.blocks = blocks;
            opts.seed = seed;
            opts.annotation_filter = annotation_filter;
            auto r = pipeline::split(opts);
            py::dict d;
            d["train"] = r.train;
            d["validation"] = r.validation;
            d["test"] = r.test;
            d["dropped_articles"] = r.dropped_articles;
            d["stripped_values"] = r.stripped_values;
            return d;
        },
        py::arg("input"), py::arg("output_dir"),
        py::arg("proportions") = std::array<double, 4>{0.2, 0.2, 0.1, 0.5},
        py::arg("blocks") = std::array<int64_t, 6>{1000, 1000, 2000, 2000, 2000, 2000},
        py::arg("seed") = 1, py::arg("annotation_filter") = std::string());
    pipe.def("audit_split", &pipeline::audit_split_dir, py::arg("dir"));
    pipe.def("train", [](const py::kwargs& kwargs) {
        pipeline::TrainOptions opts;
        if (kwargs.contains("model")) opts.model = kwargs["model"].cast<std::string>();
        if (kwargs.contains("mode")) opts.mode = kwargs["mode"].cast<std::string>();
        if (kwargs.contains("preset")) opts.preset = kwargs["preset"].cast<std::string>();
        opts.train_path = kwargs["train"].cast<std::string>();
        if (kwargs.contains("valid")) opts.valid_path = kwargs["valid"].cast<std::string>();
        opts.tokenizer_path = kwargs["tokenizer"].cast<std::string>();
        opts.output_dir = kwargs["output_dir"].cast<std::string>();
        if (kwargs.contains("steps")) opts.steps = kwargs["steps"].cast<int64_t>();
        if (kwargs.contains("seed")) opts.seed = kwargs["seed"].cast<uint64_t>();
        if (kwargs.contains("dtype")) opts.dtype = kwargs["dtype"].cast<std::string>();
        if (kwargs.contains("overrides"))
            opts.overrides = kwargs["overrides"].cast<std::map<std::string, std::string>>();
        auto r = pipeline::train(opts);
        py::dict d;
        d["steps_done"] = r.steps_done;
        d["final_loss"] = r.final_loss;
        d["checkpoints"] = r.checkpoints;
        return d;
    });
    pipe.def("decode", [](const py::kwargs& kwargs) {
        pipeline::DecodeCliOptions opts;
        opts.model_dir = kwargs["model_dir"].cast<std::string>();
        opts.checkpoints = kwargs["checkpoints"].cast<std::vector<std::string>>();
        opts.tokenizer_path = kwargs["tokenizer"].cast<std::string>();
        opts.input = kwargs["input"].cast<std::string>();
        opts.output = kwargs["output"].cast<std::string>();
        if (kwargs.contains("beam")) opts.beam_width = kwargs["beam"].cast<int>();
        if (kwargs.contains("max_len")) opts.max_len = kwargs["max_len"].cast<int>();
        if (kwargs.contains("ablate_article"))
            opts.ablate_article = kwargs["ablate_article"].cast<bool>();
        if (kwargs.contains("jobs")) opts.jobs = kwargs["jobs"].cast<int>();
        auto r = pipeline::decode(opts);
        py::dict d;
        d["records"] = r.records;
        d["malformed_segments"] = r.malformed_segments;
        d["unfinished"] = r.unfinished;
        return d;
    });
    pipe.def(
        "evaluate",
        [](const std::string& predictions, const std::string& gold, const std::string& tags,
           const std::string& output) {
            pipeline::EvaluateOptions opts{predictions, gold, tags, output};
            return pipeline::evaluate_files(opts);
        },
        py::arg("predictions"), py::arg("gold"), py::arg("tags") = std::string(),
        py::arg("output") = std::string());
}
