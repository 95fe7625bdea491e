#include "propex/recycler.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "propex/common.hpp"
#include "propex/text_util.hpp"

namespace propex {

std::vector<MultiPropertyRecord> merge_instances(const std::vector<SingleInstance>& instances,
                                                 MergeStats* stats) {
    std::map<std::string, MultiPropertyRecord> by_id;
    int64_t conflicts = 0;
    for (const auto& inst : instances) {
        auto& rec = by_id[inst.article_id];
        if (rec.article_id.empty()) {
            rec.article_id = inst.article_id;
            rec.text = inst.text;
        } else if (rec.text != inst.text) {
            ++conflicts;
            if (inst.text.size() > rec.text.size()) rec.text = inst.text;
        }
        auto& values = rec.properties[inst.property];
        for (const auto& v : inst.values)
            if (std::find(values.begin(), values.end(), v) == values.end()) values.push_back(v);
    }
    std::vector<MultiPropertyRecord> out;
    out.reserve(by_id.size());
    for (auto& [id, rec] : by_id) out.push_back(std::move(rec));
    if (stats) {
        stats->instances_in = static_cast<int64_t>(instances.size());
        stats->records_out = static_cast<int64_t>(out.size());
        stats->text_conflicts = conflicts;
    }
    return out;
}

int LabelPartition::which(const std::string& prop) const {
    if (set1.count(prop)) return 1;
    if (set2.count(prop)) return 2;
    if (set3.count(prop)) return 3;
    if (set4.count(prop)) return 4;
    return 0;
}

std::string LabelPartition::to_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["set1"] = set1;
    j["set2"] = set2;
    j["set3"] = set3;
    j["set4"] = set4;
    return j.dump(2);
}

LabelPartition LabelPartition::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    LabelPartition p;
    p.seed = j.at("seed").get<uint64_t>();
    p.set1 = j.at("set1").get<std::set<std::string>>();
    p.set2 = j.at("set2").get<std::set<std::string>>();
    p.set3 = j.at("set3").get<std::set<std::string>>();
    p.set4 = j.at("set4").get<std::set<std::string>>();
    return p;
}

LabelPartition partition_labels(const std::set<std::string>& properties,
                                const std::array<double, 4>& proportions, uint64_t seed) {
    double sum = 0;
    for (double p : proportions) sum += p;
    if (std::abs(sum - 1.0) > 1e-9)
        throw DataError("partition_labels: proportions sum to " + std::to_string(sum) + ", not 1");
    const int64_t n = static_cast<int64_t>(properties.size());
    if (n < 4) throw DataError("partition_labels: need at least 4 properties, got " + std::to_string(n));

    const int64_t n1 = std::lround(proportions[0] * static_cast<double>(n));
    const int64_t n2 = std::lround(proportions[1] * static_cast<double>(n));
    const int64_t n3 = std::lround(proportions[2] * static_cast<double>(n));
    if (n1 + n2 + n3 > n)
        throw DataError("partition_labels: rounded sizes exceed the property count");

    std::vector<std::string> names(properties.begin(), properties.end());
    SplitMix64 rng(seed);
    rng.shuffle(names);

    LabelPartition out;
    out.seed = seed;
    int64_t i = 0;
    for (; i < n1; ++i) out.set1.insert(names[static_cast<size_t>(i)]);
    for (; i < n1 + n2; ++i) out.set2.insert(names[static_cast<size_t>(i)]);
    for (; i < n1 + n2 + n3; ++i) out.set3.insert(names[static_cast<size_t>(i)]);
    for (; i < n; ++i) out.set4.insert(names[static_cast<size_t>(i)]);
    return out;
}

BlockSizes BlockSizes::scaled(double factor) const {
    if (factor <= 0) throw DataError("block sizes: scale factor must be positive");
    auto s = [factor](int64_t v) {
        int64_t r = std::lround(static_cast<double>(v) * factor);
        return r < 1 ? 1 : r;
    };
    return BlockSizes{s(a), s(b), s(c), s(d), s(e), s(f)};
}

namespace {

int64_t count_values(const MultiPropertyRecord& r) {
    int64_t n = 0;
    for (const auto& [prop, vals] : r.properties) n += static_cast<int64_t>(vals.size());
    return n;
}

// Removes all properties from `sets` in the record; returns removed value
// count.
int64_t strip_sets(MultiPropertyRecord& r, const std::set<std::string>& labels) {
    int64_t removed = 0;
    for (auto it = r.properties.begin(); it != r.properties.end();) {
        if (labels.count(it->first)) {
            removed += static_cast<int64_t>(it->second.size());
            it = r.properties.erase(it);
        } else {
            ++it;
        }
    }
    return removed;
}

struct Pool {
    std::vector<MultiPropertyRecord> records;  // sorted by article id
    std::vector<bool> taken;

    explicit Pool(std::vector<MultiPropertyRecord> recs) : records(std::move(recs)) {
        std::sort(records.begin(), records.end(),
                  [](const auto& a, const auto& b) { return a.article_id < b.article_id; });
        taken.assign(records.size(), false);
    }
};

int count_in_set(const MultiPropertyRecord& r, const std::set<std::string>& labels) {
    int n = 0;
    for (const auto& [prop, vals] : r.properties) n += labels.count(prop) ? 1 : 0;
    return n;
}

bool any_in_set(const MultiPropertyRecord& r, const std::set<std::string>& labels) {
    for (const auto& [prop, vals] : r.properties)
        if (labels.count(prop)) return true;
    return false;
}

}  // namespace

SplitPlan draft_splits(const std::vector<MultiPropertyRecord>& records,
                       const LabelPartition& partition, const BlockSizes& blocks, uint64_t seed) {
    for (const auto& r : records) {
        if (r.properties.empty())
            throw DataError("draft_splits: article '" + r.article_id + "' has no properties");
        for (const auto& [prop, vals] : r.properties)
            if (partition.which(prop) == 0)
                throw DataError("draft_splits: property '" + prop + "' missing from the partition");
    }

    Pool pool(records);
    SplitPlan plan;
    for (const auto& r : pool.records) plan.input_values += count_values(r);

    std::map<std::string, int64_t> shortfall;

    // Blocks A-D: rank eligible articles by how many must-have properties
    // they carry so stripping wastes as little as possible, ties by id.
    auto draft_ranked = [&](const std::string& name, int64_t want,
                            const std::set<std::string>& must_have,
                            const std::set<std::string>& strip,
                            bool exclude_set1_set2) -> std::vector<MultiPropertyRecord> {
        std::vector<std::pair<int, size_t>> eligible;  // (-count, pool index)
        for (size_t i = 0; i < pool.records.size(); ++i) {
            if (pool.taken[i]) continue;
            const auto& r = pool.records[i];
            if (exclude_set1_set2 &&
                (any_in_set(r, partition.set1) || any_in_set(r, partition.set2)))
                continue;
            const int have = count_in_set(r, must_have);
            if (have == 0) continue;
            // stripping must not empty the map; the must-have labels are
            // never stripped, so this only rejects pathological inputs
            int64_t left = 0;
            for (const auto& [prop, vals] : r.properties)
                if (!strip.count(prop)) ++left;
            if (left == 0) continue;
            eligible.emplace_back(-have, i);
        }
        std::sort(eligible.begin(), eligible.end(), [&](const auto& x, const auto& y) {
            if (x.first != y.first) return x.first < y.first;
            return pool.records[x.second].article_id < pool.records[y.second].article_id;
        });
        if (static_cast<int64_t>(eligible.size()) < want)
            shortfall[name] = want - static_cast<int64_t>(eligible.size());
        std::vector<MultiPropertyRecord> out;
        const int64_t take = std::min<int64_t>(want, static_cast<int64_t>(eligible.size()));
        for (int64_t k = 0; k < take; ++k) {
            const size_t i = eligible[static_cast<size_t>(k)].second;
            pool.taken[i] = true;
            MultiPropertyRecord r = pool.records[i];
            plan.stripped_values += strip_sets(r, strip);
            out.push_back(std::move(r));
        }
        plan.block_counts[name] = static_cast<int64_t>(out.size());
        return out;
    };

    auto block_a = draft_ranked("A", blocks.a, partition.set1, partition.set2, false);
    auto block_b = draft_ranked("B", blocks.b, partition.set2, partition.set1, false);
    auto block_c = draft_ranked("C", blocks.c, partition.set3, {}, true);
    auto block_d = draft_ranked("D", blocks.d, partition.set3, {}, true);

    // Blocks E/F: set4-only articles, drawn in seeded shuffle order.
    std::vector<size_t> set4_only;
    for (size_t i = 0; i < pool.records.size(); ++i) {
        if (pool.taken[i]) continue;
        const auto& r = pool.records[i];
        if (!any_in_set(r, partition.set1) && !any_in_set(r, partition.set2) &&
            !any_in_set(r, partition.set3))
            set4_only.push_back(i);
    }
    SplitMix64 rng(seed ^ 0xb10c5eedULL);
    rng.shuffle(set4_only);
    auto draft_shuffled = [&](const std::string& name, int64_t want, size_t offset)
        -> std::vector<MultiPropertyRecord> {
        std::vector<MultiPropertyRecord> out;
        const int64_t avail = static_cast<int64_t>(set4_only.size()) - static_cast<int64_t>(offset);
        if (avail < want) shortfall[name] = want - std::max<int64_t>(avail, 0);
        const int64_t take = std::min<int64_t>(want, std::max<int64_t>(avail, 0));
        for (int64_t k = 0; k < take; ++k) {
            const size_t i = set4_only[offset + static_cast<size_t>(k)];
            pool.taken[i] = true;
            out.push_back(pool.records[i]);
        }
        plan.block_counts[name] = static_cast<int64_t>(out.size());
        return out;
    };
    auto block_e = draft_shuffled("E", blocks.e, 0);
    auto block_f = draft_shuffled("F", blocks.f, static_cast<size_t>(block_e.size()));

    if (!shortfall.empty()) {
        std::string msg = "draft_splits: insufficient eligible articles:";
        for (const auto& [name, n] : shortfall)
            msg += " block " + name + " short " + std::to_string(n) + ";";
        throw DataError(msg);
    }

    // G: remaining set4-only articles form the train split; leftovers that
    // still carry restricted labels are dropped.
    for (size_t i = 0; i < pool.records.size(); ++i) {
        if (pool.taken[i]) continue;
        const auto& r = pool.records[i];
        if (any_in_set(r, partition.set1) || any_in_set(r, partition.set2) ||
            any_in_set(r, partition.set3)) {
            ++plan.dropped_articles;
            plan.dropped_values += count_values(r);
        } else {
            plan.train.push_back(r);
        }
    }
    plan.block_counts["G"] = static_cast<int64_t>(plan.train.size());

    auto append = [](std::vector<MultiPropertyRecord>& dst, std::vector<MultiPropertyRecord>& src) {
        for (auto& r : src) dst.push_back(std::move(r));
    };
    append(plan.test, block_a);
    append(plan.test, block_c);
    append(plan.test, block_e);
    append(plan.validation, block_b);
    append(plan.validation, block_d);
    append(plan.validation, block_f);
    auto by_id = [](const auto& a, const auto& b) { return a.article_id < b.article_id; };
    std::sort(plan.test.begin(), plan.test.end(), by_id);
    std::sort(plan.validation.begin(), plan.validation.end(), by_id);
    return plan;
}

AuditResult audit_split(const std::vector<MultiPropertyRecord>& train,
                        const std::vector<MultiPropertyRecord>& validation,
                        const std::vector<MultiPropertyRecord>& test,
                        const LabelPartition& partition) {
    nlohmann::json report;
    bool ok = true;

    auto ids_of = [](const std::vector<MultiPropertyRecord>& v) {
        std::set<std::string> s;
        for (const auto& r : v) s.insert(r.article_id);
        return s;
    };
    const auto train_ids = ids_of(train), val_ids = ids_of(validation), test_ids = ids_of(test);
    auto overlap = [](const std::set<std::string>& a, const std::set<std::string>& b) {
        int64_t n = 0;
        for (const auto& id : a) n += b.count(id) ? 1 : 0;
        return n;
    };
    const int64_t tv = overlap(train_ids, val_ids);
    const int64_t tt = overlap(train_ids, test_ids);
    const int64_t vt = overlap(val_ids, test_ids);
    report["article_overlap"] = {{"train_validation", tv}, {"train_test", tt}, {"validation_test", vt}};
    ok = ok && tv == 0 && tt == 0 && vt == 0;

    // Label containment: set1 only in test, set2 only in validation,
    // set3 never in train.
    auto violations = [&](const std::vector<MultiPropertyRecord>& split,
                          std::initializer_list<int> forbidden) {
        int64_t n = 0;
        for (const auto& r : split)
            for (const auto& [prop, vals] : r.properties)
                for (int f : forbidden)
                    if (partition.which(prop) == f) ++n;
        return n;
    };
    const int64_t train_bad = violations(train, {1, 2, 3});
    const int64_t val_bad = violations(validation, {1});
    const int64_t test_bad = violations(test, {2});
    report["label_violations"] = {{"train_restricted", train_bad},
                                  {"validation_set1", val_bad},
                                  {"test_set2", test_bad}};
    ok = ok && train_bad == 0 && val_bad == 0 && test_bad == 0;

    report["sizes"] = {{"train", train.size()}, {"validation", validation.size()}, {"test", test.size()}};
    report["ok"] = ok;
    return AuditResult{ok, report.dump(2)};
}

std::vector<FilterEntry> parse_filter_jsonl(const std::string& content) {
    std::vector<FilterEntry> out;
    std::istringstream is(content);
    std::string line;
    size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            nlohmann::json j = nlohmann::json::parse(line);
            FilterEntry e;
            e.article_id = j.at("id").get<std::string>();
            e.property = j.at("property").get<std::string>();
            if (j.contains("value") && !j["value"].is_null())
                e.value = j["value"].get<std::string>();
            out.push_back(std::move(e));
        } catch (const nlohmann::json::exception& ex) {
            throw DataError("filter: bad entry on line " + std::to_string(lineno) + ": " + ex.what());
        }
    }
    return out;
}

std::vector<FilterEntry> read_filter_jsonl(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_filter_jsonl(buf.str());
}

std::vector<MultiPropertyRecord> apply_annotation_filter(
    const std::vector<MultiPropertyRecord>& records, const std::vector<FilterEntry>& filter,
    FilterStats* stats) {
    FilterStats st;
    std::map<std::string, size_t> index;
    for (size_t i = 0; i < records.size(); ++i) index[records[i].article_id] = i;
    std::vector<MultiPropertyRecord> out = records;
    for (const auto& r : out) st.values_before += count_values(r);

    for (const auto& e : filter) {
        auto it = index.find(e.article_id);
        if (it == index.end()) {
            ++st.unknown_refs;
            continue;
        }
        auto& rec = out[it->second];
        auto pit = rec.properties.find(e.property);
        if (pit == rec.properties.end()) {
            ++st.unknown_refs;
            continue;
        }
        if (!e.value) {
            st.values_removed += static_cast<int64_t>(pit->second.size());
            ++st.properties_removed;
            rec.properties.erase(pit);
            continue;
        }
        auto& vals = pit->second;
        auto vit = std::find(vals.begin(), vals.end(), *e.value);
        if (vit == vals.end()) {
            ++st.unknown_refs;
            continue;
        }
        vals.erase(vit);
        ++st.values_removed;
        if (vals.empty()) {
            ++st.properties_removed;
            rec.properties.erase(pit);
        }
    }

    std::vector<MultiPropertyRecord> kept;
    for (auto& r : out) {
        if (r.properties.empty())
            ++st.articles_dropped;
        else
            kept.push_back(std::move(r));
    }
    if (stats) *stats = st;
    return kept;
}

std::vector<EmInTag> tag_em_in(const MultiPropertyRecord& record) {
    const auto text_tokens = match_tokens(record.text);
    std::vector<EmInTag> out;
    for (const auto& [prop, vals] : record.properties) {
        for (const auto& v : vals) {
            const auto value_tokens = match_tokens(v);
            bool em = false;
            if (!value_tokens.empty() && value_tokens.size() <= text_tokens.size()) {
                for (size_t i = 0; i + value_tokens.size() <= text_tokens.size() && !em; ++i) {
                    bool all = true;
                    for (size_t j = 0; j < value_tokens.size() && all; ++j)
                        all = text_tokens[i + j] == value_tokens[j];
                    em = all;
                }
            }
            out.push_back({prop, v, em});
        }
    }
    return out;
}

}  // namespace propex
