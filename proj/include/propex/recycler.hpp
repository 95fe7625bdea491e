#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "propex/records.hpp"

namespace propex {

struct MergeStats {
    int64_t instances_in = 0;
    int64_t records_out = 0;
    int64_t text_conflicts = 0;  // same article id with different texts; longest kept
};

// One record per article id, value lists unioned per property, output
// ordered by article id.
std::vector<MultiPropertyRecord> merge_instances(const std::vector<SingleInstance>& instances,
                                                 MergeStats* stats = nullptr);

// Disjoint property-name sets: test-only, validation-only, shared
// test+validation, and unrestricted.
struct LabelPartition {
    std::set<std::string> set1, set2, set3, set4;
    uint64_t seed = 0;

    int which(const std::string& prop) const;  // 1..4, or 0 when unknown
    std::string to_json() const;
    static LabelPartition from_json(const std::string& text);
};

// Sizes are round(p*N) for sets 1-3 with the remainder going to the
// unrestricted set. The assignment is a seeded shuffle of the sorted
// property list, so it is reproducible and input-order independent.
LabelPartition partition_labels(const std::set<std::string>& properties,
                                const std::array<double, 4>& proportions, uint64_t seed);

struct BlockSizes {
    int64_t a = 1000, b = 1000, c = 2000, d = 2000, e = 2000, f = 2000;

    BlockSizes scaled(double factor) const;
    int64_t test_total() const { return a + c + e; }
    int64_t validation_total() const { return b + d + f; }
};

struct SplitPlan {
    std::vector<MultiPropertyRecord> train, validation, test;
    std::map<std::string, int64_t> block_counts;  // A..G
    int64_t stripped_values = 0;   // removed by not-allowed stripping (A, B)
    int64_t dropped_articles = 0;  // leftovers carrying restricted labels
    int64_t dropped_values = 0;
    int64_t input_values = 0;
};

// Drafts blocks A..F in order and leaves G as the train remainder:
//   A (test): must have a set1 property; set2 properties stripped.
//   B (val):  must have a set2 property; set1 properties stripped.
//   C (test), D (val): must have a set3 property; articles carrying
//     set1/set2 are not eligible.
//   E (test), F (val), G (train): articles whose properties are all set4.
// Blocks A-D prefer articles with the most must-have properties (ties by
// article id); E and F are a seeded shuffle of the eligible pool.
// Leftover articles still carrying set1/set2/set3 labels are dropped.
SplitPlan draft_splits(const std::vector<MultiPropertyRecord>& records,
                       const LabelPartition& partition, const BlockSizes& blocks, uint64_t seed);

// Exhaustive leakage audit over a finished split. Returns a JSON-ready
// report; `ok` is false if any invariant fails.
struct AuditResult {
    bool ok = true;
    std::string report_json;
};
AuditResult audit_split(const std::vector<MultiPropertyRecord>& train,
                        const std::vector<MultiPropertyRecord>& validation,
                        const std::vector<MultiPropertyRecord>& test,
                        const LabelPartition& partition);

// Human-annotation ingestion: each entry removes one value, or a whole
// property when no value is given.
struct FilterEntry {
    std::string article_id;
    std::string property;
    std::optional<std::string> value;
};

struct FilterStats {
    int64_t values_before = 0;
    int64_t values_removed = 0;
    int64_t properties_removed = 0;
    int64_t articles_dropped = 0;
    int64_t unknown_refs = 0;

    double values_removed_pct() const {
        return values_before == 0 ? 0.0 : 100.0 * static_cast<double>(values_removed) /
                                              static_cast<double>(values_before);
    }
};

std::vector<MultiPropertyRecord> apply_annotation_filter(
    const std::vector<MultiPropertyRecord>& records, const std::vector<FilterEntry>& filter,
    FilterStats* stats = nullptr);

std::vector<FilterEntry> read_filter_jsonl(const std::string& path);
std::vector<FilterEntry> parse_filter_jsonl(const std::string& content);

// EM when the normalized value occurs as a contiguous token run in the
// normalized article text; IN otherwise.
struct EmInTag {
    std::string property;
    std::string value;
    bool exact_match = false;
};

std::vector<EmInTag> tag_em_in(const MultiPropertyRecord& record);

}  // namespace propex
