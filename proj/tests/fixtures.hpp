#pragma once

// Synthetic corpora shared by the unit tests and the acceptance run.

#include <string>
#include <vector>

#include "propex/common.hpp"
#include "propex/records.hpp"
#include "propex/recycler.hpp"
#include "propex/target_format.hpp"
#include "propex/text_util.hpp"

namespace propex::testing {

// Articles composed so that every draft block has an ample eligible pool:
// 20% carry a test-only label, 20% a validation-only label, 15% a shared
// label (and nothing restricted), the rest only unrestricted labels.
inline std::vector<MultiPropertyRecord> make_split_corpus(const LabelPartition& partition,
                                                          int64_t n_articles, uint64_t seed) {
    std::vector<std::string> s1(partition.set1.begin(), partition.set1.end());
    std::vector<std::string> s2(partition.set2.begin(), partition.set2.end());
    std::vector<std::string> s3(partition.set3.begin(), partition.set3.end());
    std::vector<std::string> s4(partition.set4.begin(), partition.set4.end());
    SplitMix64 rng(seed);
    auto pick = [&](const std::vector<std::string>& v) { return v[rng.below(v.size())]; };

    std::vector<MultiPropertyRecord> out;
    for (int64_t i = 0; i < n_articles; ++i) {
        MultiPropertyRecord r;
        char idbuf[24];
        std::snprintf(idbuf, sizeof(idbuf), "a%06lld", static_cast<long long>(i));
        r.article_id = idbuf;
        const uint64_t cls = rng.below(100);
        if (cls < 20) {
            r.properties[pick(s1)] = {"v" + std::to_string(rng.below(50))};
            if (rng.below(2)) r.properties[pick(s2)] = {"w" + std::to_string(rng.below(50))};
            r.properties[pick(s4)] = {"x" + std::to_string(rng.below(50))};
        } else if (cls < 40) {
            r.properties[pick(s2)] = {"v" + std::to_string(rng.below(50))};
            if (rng.below(2)) r.properties[pick(s1)] = {"w" + std::to_string(rng.below(50))};
            r.properties[pick(s3)] = {"y" + std::to_string(rng.below(50))};
        } else if (cls < 55) {
            r.properties[pick(s3)] = {"v" + std::to_string(rng.below(50))};
            if (rng.below(2)) r.properties[pick(s4)] = {"x" + std::to_string(rng.below(50))};
        } else {
            r.properties[pick(s4)] = {"v" + std::to_string(rng.below(50))};
            if (rng.below(3) == 0) r.properties[pick(s4)] = {"z" + std::to_string(rng.below(50))};
        }
        r.text = "article " + r.article_id + " mentions";
        for (const auto& [prop, vals] : r.properties) r.text += " " + prop + " " + vals[0];
        out.push_back(std::move(r));
    }
    return out;
}

// Small extraction corpus for overfit checks: every value is spelled out
// in the article text by a fixed template, so a model that learns to
// extract reaches a perfect score.
inline std::vector<MultiPropertyRecord> make_extraction_corpus(int n_articles, uint64_t seed) {
    const std::vector<std::string> colors = {"red", "blue", "green", "gold"};
    const std::vector<std::string> shapes = {"square", "circle", "triangle"};
    const std::vector<std::string> sizes = {"small", "large"};
    SplitMix64 rng(seed);
    std::vector<MultiPropertyRecord> out;
    for (int i = 0; i < n_articles; ++i) {
        MultiPropertyRecord r;
        char idbuf[24];
        std::snprintf(idbuf, sizeof(idbuf), "item%03d", i);
        r.article_id = idbuf;
        r.properties["color"] = {colors[rng.below(colors.size())]};
        r.text = "the " + r.article_id + " is " + r.properties["color"][0];
        if (rng.below(10) < 7) {
            r.properties["shape"] = {shapes[rng.below(shapes.size())]};
            r.text += " shaped like a " + r.properties["shape"][0];
        }
        if (rng.below(10) < 5) {
            r.properties["size"] = {sizes[rng.below(sizes.size())]};
            r.text += " and is " + r.properties["size"][0];
        }
        out.push_back(std::move(r));
    }
    return out;
}

// Lines for tokenizer training: article texts, property names and
// serialized targets of a record set.
inline std::vector<std::string> tokenizer_lines(const std::vector<MultiPropertyRecord>& records) {
    std::vector<std::string> lines;
    for (const auto& r : records) {
        lines.push_back(r.text);
        lines.push_back(ascii_lower(r.text));
        for (const auto& [name, vals] : r.properties) {
            lines.push_back(name);
            for (const auto& v : vals) lines.push_back(v);
        }
        lines.push_back(serialize_target(r.properties));
    }
    return lines;
}

inline std::set<std::string> numbered_properties(int n, const std::string& prefix = "prop") {
    std::set<std::string> props;
    for (int i = 0; i < n; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%s%02d", prefix.c_str(), i);
        props.insert(buf);
    }
    return props;
}

}  // namespace propex::testing
