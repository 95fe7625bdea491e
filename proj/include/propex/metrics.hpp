#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "propex/records.hpp"
#include "propex/recycler.hpp"

namespace propex {

// Model output for one article: predicted values per queried property.
struct Prediction {
    std::string article_id;
    std::map<std::string, std::vector<std::string>> properties;
};

std::vector<Prediction> parse_predictions_jsonl(const std::string& content);
std::vector<Prediction> read_predictions_jsonl(const std::string& path);

// Set-level F1 between normalized value sets. Both empty scores 1 (can
// only arise after annotation filtering); empty prediction against a
// non-empty gold scores 0.
double set_f1(const std::vector<std::string>& pred, const std::vector<std::string>& gold);

// Unweighted mean of per-instance set F1, the original per-property
// metric.
double mean_f1(const std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>>& pairs);

// Per-article mean over the gold keys, then mean over articles. A missing
// prediction entry scores as an empty value set; a prediction for an
// unknown article or an unqueried key is rejected.
double mean_multilabel_f1(const std::vector<Prediction>& preds,
                          const std::vector<MultiPropertyRecord>& golds);

// Mean set F1 over the articles whose gold record contains `key`.
double per_label_f1(const std::vector<Prediction>& preds,
                    const std::vector<MultiPropertyRecord>& golds, const std::string& key);

// One EM/IN tag per (article, property, value).
struct TaggedValue {
    std::string article_id;
    std::string property;
    std::string value;
    bool exact_match = false;
};

std::vector<TaggedValue> parse_tags_jsonl(const std::string& content);
std::vector<TaggedValue> read_tags_jsonl(const std::string& path);

// Fraction of gold values carrying the chosen tag that appear among the
// predicted values of the same (article, key). Precision is undefined on
// these subsets, so recall is all there is.
double subset_recall(const std::vector<Prediction>& preds,
                     const std::vector<MultiPropertyRecord>& golds,
                     const std::vector<TaggedValue>& tags, bool exact_match);

struct MetricReport {
    double mean_f1 = 0.0;
    double mean_multilabel_f1 = 0.0;
    std::map<std::string, double> per_label;
    std::optional<double> em_recall;
    std::optional<double> in_recall;
    int64_t articles = 0;
    int64_t instances = 0;  // (article, key) pairs

    std::string to_json() const;
    std::string to_table() const;
};

MetricReport evaluate(const std::vector<Prediction>& preds,
                      const std::vector<MultiPropertyRecord>& golds,
                      const std::vector<TaggedValue>* tags = nullptr);

}  // namespace propex
