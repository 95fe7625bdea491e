#include "propex/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "propex/common.hpp"
#include "propex/text_util.hpp"

namespace propex {

namespace {

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << is.rdbuf();
    return buf.str();
}

std::set<std::string> normalized_set(const std::vector<std::string>& values) {
    std::set<std::string> out;
    for (const auto& v : values) out.insert(normalize_value(v));
    return out;
}

}  // namespace

std::vector<Prediction> parse_predictions_jsonl(const std::string& content) {
    std::vector<Prediction> out;
    std::istringstream is(content);
    std::string line;
    size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            nlohmann::json j = nlohmann::json::parse(line);
            Prediction p;
            p.article_id = j.at("id").get<std::string>();
            for (const auto& [name, vals] : j.at("properties").items())
                p.properties[name] = vals.get<std::vector<std::string>>();
            out.push_back(std::move(p));
        } catch (const nlohmann::json::exception& e) {
            throw DataError("predictions: bad entry on line " + std::to_string(lineno) + ": " +
                            e.what());
        }
    }
    return out;
}

std::vector<Prediction> read_predictions_jsonl(const std::string& path) {
    return parse_predictions_jsonl(slurp(path));
}

double set_f1(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
    const auto p = normalized_set(pred);
    const auto g = normalized_set(gold);
    if (p.empty() && g.empty()) return 1.0;
    if (p.empty() || g.empty()) return 0.0;
    int64_t inter = 0;
    for (const auto& v : p) inter += g.count(v) ? 1 : 0;
    if (inter == 0) return 0.0;
    const double precision = static_cast<double>(inter) / static_cast<double>(p.size());
    const double recall = static_cast<double>(inter) / static_cast<double>(g.size());
    return 2.0 * precision * recall / (precision + recall);
}

double mean_f1(const std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>>& pairs) {
    if (pairs.empty()) throw DataError("mean_f1: no instances");
    double sum = 0.0;
    for (const auto& [pred, gold] : pairs) sum += set_f1(pred, gold);
    return sum / static_cast<double>(pairs.size());
}

namespace {

// Validates the prediction list against the gold records and returns an
// article-id index. Missing predictions are allowed (scored empty);
// unknown articles and unqueried keys are not.
std::map<std::string, const Prediction*> index_predictions(
    const std::vector<Prediction>& preds, const std::vector<MultiPropertyRecord>& golds) {
    std::map<std::string, const MultiPropertyRecord*> gold_index;
    for (const auto& g : golds) gold_index[g.article_id] = &g;
    std::map<std::string, const Prediction*> out;
    for (const auto& p : preds) {
        auto git = gold_index.find(p.article_id);
        if (git == gold_index.end())
            throw DataError("metrics: prediction for unknown article '" + p.article_id + "'");
        for (const auto& [key, vals] : p.properties)
            if (!git->second->properties.count(key))
                throw DataError("metrics: prediction for unqueried key '" + key + "' of article '" +
                                p.article_id + "'");
        if (!out.emplace(p.article_id, &p).second)
            throw DataError("metrics: duplicate prediction for article '" + p.article_id + "'");
    }
    return out;
}

const std::vector<std::string>& predicted_values(
    const std::map<std::string, const Prediction*>& index, const std::string& article_id,
    const std::string& key) {
    static const std::vector<std::string> kEmpty;
    auto it = index.find(article_id);
    if (it == index.end()) return kEmpty;
    auto vit = it->second->properties.find(key);
    return vit == it->second->properties.end() ? kEmpty : vit->second;
}

// Reductions run in sorted article order so scores are bit-identical
// under input permutations.
std::vector<const MultiPropertyRecord*> sorted_golds(const std::vector<MultiPropertyRecord>& golds) {
    std::vector<const MultiPropertyRecord*> out;
    out.reserve(golds.size());
    for (const auto& g : golds) out.push_back(&g);
    std::sort(out.begin(), out.end(),
              [](const auto* a, const auto* b) { return a->article_id < b->article_id; });
    for (size_t i = 1; i < out.size(); ++i)
        if (out[i]->article_id == out[i - 1]->article_id)
            throw DataError("metrics: duplicate gold record for article '" + out[i]->article_id + "'");
    return out;
}

}  // namespace

double mean_multilabel_f1(const std::vector<Prediction>& preds,
                          const std::vector<MultiPropertyRecord>& golds) {
    if (golds.empty()) throw DataError("mean_multilabel_f1: no gold records");
    const auto index = index_predictions(preds, golds);
    double article_sum = 0.0;
    for (const auto* g : sorted_golds(golds)) {
        double key_sum = 0.0;
        for (const auto& [key, gold_vals] : g->properties)
            key_sum += set_f1(predicted_values(index, g->article_id, key), gold_vals);
        article_sum += key_sum / static_cast<double>(g->properties.size());
    }
    return article_sum / static_cast<double>(golds.size());
}

double per_label_f1(const std::vector<Prediction>& preds,
                    const std::vector<MultiPropertyRecord>& golds, const std::string& key) {
    const auto index = index_predictions(preds, golds);
    double sum = 0.0;
    int64_t n = 0;
    for (const auto* g : sorted_golds(golds)) {
        auto it = g->properties.find(key);
        if (it == g->properties.end()) continue;
        sum += set_f1(predicted_values(index, g->article_id, key), it->second);
        ++n;
    }
    if (n == 0) throw DataError("per_label_f1: key '" + key + "' absent from every gold record");
    return sum / static_cast<double>(n);
}

std::vector<TaggedValue> parse_tags_jsonl(const std::string& content) {
    std::vector<TaggedValue> out;
    std::istringstream is(content);
    std::string line;
    size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            nlohmann::json j = nlohmann::json::parse(line);
            TaggedValue t;
            t.article_id = j.at("id").get<std::string>();
            t.property = j.at("property").get<std::string>();
            t.value = j.at("value").get<std::string>();
            const std::string tag = j.at("tag").get<std::string>();
            if (tag != "EM" && tag != "IN")
                throw DataError("tags: tag must be EM or IN, got '" + tag + "'");
            t.exact_match = tag == "EM";
            out.push_back(std::move(t));
        } catch (const nlohmann::json::exception& e) {
            throw DataError("tags: bad entry on line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::vector<TaggedValue> read_tags_jsonl(const std::string& path) {
    return parse_tags_jsonl(slurp(path));
}

double subset_recall(const std::vector<Prediction>& preds,
                     const std::vector<MultiPropertyRecord>& golds,
                     const std::vector<TaggedValue>& tags, bool exact_match) {
    const auto index = index_predictions(preds, golds);
    // (article, property, normalized value) -> tag
    std::map<std::tuple<std::string, std::string, std::string>, bool> tag_index;
    for (const auto& t : tags)
        tag_index[{t.article_id, t.property, normalize_value(t.value)}] = t.exact_match;

    int64_t total = 0, hit = 0;
    for (const auto& g : golds) {
        for (const auto& [key, gold_vals] : g.properties) {
            const auto pred_set = normalized_set(predicted_values(index, g.article_id, key));
            for (const auto& v : gold_vals) {
                const std::string norm = normalize_value(v);
                auto it = tag_index.find({g.article_id, key, norm});
                if (it == tag_index.end() || it->second != exact_match) continue;
                ++total;
                hit += pred_set.count(norm) ? 1 : 0;
            }
        }
    }
    if (total == 0)
        throw DataError(std::string("subset_recall: no gold value tagged ") +
                        (exact_match ? "EM" : "IN"));
    return static_cast<double>(hit) / static_cast<double>(total);
}

MetricReport evaluate(const std::vector<Prediction>& preds,
                      const std::vector<MultiPropertyRecord>& golds,
                      const std::vector<TaggedValue>* tags) {
    MetricReport report;
    report.articles = static_cast<int64_t>(golds.size());
    const auto index = index_predictions(preds, golds);

    std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> pairs;
    for (const auto* g : sorted_golds(golds))
        for (const auto& [key, gold_vals] : g->properties)
            pairs.emplace_back(predicted_values(index, g->article_id, key), gold_vals);
    report.instances = static_cast<int64_t>(pairs.size());
    report.mean_f1 = mean_f1(pairs);
    report.mean_multilabel_f1 = mean_multilabel_f1(preds, golds);

    std::set<std::string> keys;
    for (const auto& g : golds)
        for (const auto& [key, gold_vals] : g.properties) keys.insert(key);
    for (const auto& key : keys) report.per_label[key] = per_label_f1(preds, golds, key);

    if (tags && !tags->empty()) {
        bool any_em = false, any_in = false;
        for (const auto& t : *tags) (t.exact_match ? any_em : any_in) = true;
        if (any_em) report.em_recall = subset_recall(preds, golds, *tags, true);
        if (any_in) report.in_recall = subset_recall(preds, golds, *tags, false);
    }
    return report;
}

std::string MetricReport::to_json() const {
    nlohmann::json j;
    j["mean_f1"] = mean_f1;
    j["mean_multilabel_f1"] = mean_multilabel_f1;
    j["per_label"] = per_label;
    if (em_recall) j["em_recall"] = *em_recall;
    if (in_recall) j["in_recall"] = *in_recall;
    j["articles"] = articles;
    j["instances"] = instances;
    return j.dump(2);
}

std::string MetricReport::to_table() const {
    std::ostringstream os;
    auto row = [&os](const std::string& name, double value) {
        os << name;
        for (size_t i = name.size(); i < 28; ++i) os << ' ';
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%8.4f", value);
        os << buf << "\n";
    };
    row("Mean-F1", mean_f1);
    row("Mean-MultiLabel-F1", mean_multilabel_f1);
    if (em_recall) row("EM recall", *em_recall);
    if (in_recall) row("IN recall", *in_recall);
    os << "articles" << std::string(20, ' ') << articles << "\n";
    os << "instances" << std::string(19, ' ') << instances << "\n";
    os << "-- per label --\n";
    for (const auto& [key, score] : per_label) row(key, score);
    return os.str();
}

}  // namespace propex
