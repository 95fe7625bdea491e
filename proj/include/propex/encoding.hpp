#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "propex/records.hpp"
#include "propex/subword.hpp"
#include "propex/target_format.hpp"
#include "propex/text_util.hpp"
#include "propex/transformer.hpp"

namespace propex {

enum class TrainingMode { single_property, multi_property };

inline TrainingMode training_mode_from_string(const std::string& s) {
    if (s == "single") return TrainingMode::single_property;
    if (s == "multi") return TrainingMode::multi_property;
    throw UsageError("unknown training mode '" + s + "' (expected single|multi)");
}

inline std::string to_string(TrainingMode m) {
    return m == TrainingMode::single_property ? "single" : "multi";
}

inline std::vector<int> encode_article(const SubwordModel& tok, const std::string& text,
                                       bool lowercase = false) {
    return tok.encode(lowercase ? ascii_lower(text) : text, /*add_bos_eos=*/true);
}

// BOS name1 SEP name2 ... EOS, names sorted lexicographically.
inline std::vector<int> encode_property_names(const SubwordModel& tok,
                                              std::vector<std::string> names,
                                              bool lowercase = false) {
    if (names.empty()) throw DataError("encode_property_names: no names");
    std::sort(names.begin(), names.end());
    std::vector<int> ids{tok.specials().bos};
    for (size_t i = 0; i < names.size(); ++i) {
        if (i) ids.push_back(tok.specials().sep);
        auto part = tok.encode(lowercase ? ascii_lower(names[i]) : names[i], false);
        ids.insert(ids.end(), part.begin(), part.end());
    }
    ids.push_back(tok.specials().eos);
    return ids;
}

// target token ids: text tokens + EOS (no BOS; the decoder adds it).
inline std::vector<int> encode_target(const SubwordModel& tok, const std::string& text,
                                      bool lowercase = false) {
    auto ids = tok.encode(lowercase ? ascii_lower(text) : text, false);
    ids.push_back(tok.specials().eos);
    return ids;
}

// A training example plus the bookkeeping needed to score decodes.
struct BuiltExample {
    TrainingExample ex;
    std::string article_id;
    std::string property;  // single-property mode only
};

// single mode: one example per (article, property), target is the value
// list. multi mode: one example per article, properties joined by SEP,
// target is the serialized property map.
inline std::vector<BuiltExample> build_dual_examples(const std::vector<MultiPropertyRecord>& records,
                                                     const SubwordModel& tok, TrainingMode mode) {
    std::vector<BuiltExample> out;
    for (const auto& r : records) {
        if (mode == TrainingMode::multi_property) {
            BuiltExample b;
            b.article_id = r.article_id;
            std::vector<std::string> names;
            for (const auto& [name, vals] : r.properties) names.push_back(name);
            b.ex.article_ids = encode_article(tok, r.text);
            b.ex.property_ids = encode_property_names(tok, names);
            b.ex.target_ids = encode_target(tok, serialize_target(r.properties));
            out.push_back(std::move(b));
        } else {
            for (const auto& [name, vals] : r.properties) {
                BuiltExample b;
                b.article_id = r.article_id;
                b.property = name;
                b.ex.article_ids = encode_article(tok, r.text);
                b.ex.property_ids = encode_property_names(tok, {name});
                b.ex.target_ids = encode_target(tok, serialize_values(vals));
                out.push_back(std::move(b));
            }
        }
    }
    return out;
}

// Baseline input: "property SEP article" as one lowercased sequence.
struct BasicExample {
    std::vector<int> source_ids;
    std::vector<int> target_ids;
    std::string article_id;
    std::string property;

    int64_t total_tokens() const {
        return static_cast<int64_t>(source_ids.size() + target_ids.size());
    }
};

inline std::vector<BasicExample> build_basic_examples(const std::vector<MultiPropertyRecord>& records,
                                                      const SubwordModel& tok) {
    std::vector<BasicExample> out;
    for (const auto& r : records) {
        for (const auto& [name, vals] : r.properties) {
            BasicExample b;
            b.article_id = r.article_id;
            b.property = name;
            b.source_ids.push_back(tok.specials().bos);
            auto prop_ids = tok.encode(ascii_lower(name), false);
            b.source_ids.insert(b.source_ids.end(), prop_ids.begin(), prop_ids.end());
            b.source_ids.push_back(tok.specials().sep);
            auto art_ids = tok.encode(ascii_lower(r.text), false);
            b.source_ids.insert(b.source_ids.end(), art_ids.begin(), art_ids.end());
            b.source_ids.push_back(tok.specials().eos);
            b.target_ids = encode_target(tok, serialize_values(vals), /*lowercase=*/true);
            out.push_back(std::move(b));
        }
    }
    return out;
}

}  // namespace propex
