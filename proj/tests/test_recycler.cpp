#include <doctest.h>

#include "fixtures.hpp"
#include "propex/common.hpp"
#include "propex/recycler.hpp"

using namespace propex;
using propex::testing::make_split_corpus;
using propex::testing::numbered_properties;

TEST_CASE("partition sizing follows the rounding rule") {
    auto p10 = partition_labels(numbered_properties(10), {0.2, 0.2, 0.1, 0.5}, 1);
    CHECK(p10.set1.size() == 2);
    CHECK(p10.set2.size() == 2);
    CHECK(p10.set3.size() == 1);
    CHECK(p10.set4.size() == 5);

    auto p703 = partition_labels(numbered_properties(703, "p"), {0.2, 0.2, 0.1, 0.5}, 1);
    CHECK(p703.set1.size() == 141);
    CHECK(p703.set2.size() == 141);
    CHECK(p703.set3.size() == 70);
    CHECK(p703.set4.size() == 351);
}

TEST_CASE("partition is deterministic per seed and disjoint") {
    auto props = numbered_properties(40);
    auto a = partition_labels(props, {0.2, 0.2, 0.1, 0.5}, 7);
    auto b = partition_labels(props, {0.2, 0.2, 0.1, 0.5}, 7);
    CHECK(a.to_json() == b.to_json());
    auto c = partition_labels(props, {0.2, 0.2, 0.1, 0.5}, 8);
    CHECK(a.to_json() != c.to_json());

    std::set<std::string> all;
    for (const auto* s : {&a.set1, &a.set2, &a.set3, &a.set4})
        for (const auto& name : *s) CHECK(all.insert(name).second);
    CHECK(all == props);
}

TEST_CASE("partition rejects bad proportions") {
    CHECK_THROWS_AS(partition_labels(numbered_properties(10), {0.2, 0.2, 0.1, 0.6}, 1), DataError);
    CHECK_THROWS_AS(partition_labels({{"a", "b", "c"}}, {0.2, 0.2, 0.1, 0.5}, 1), DataError);
}

TEST_CASE("paper-shaped block sums give 5000-article test and validation") {
    BlockSizes paper;
    CHECK(paper.test_total() == 5000);
    CHECK(paper.validation_total() == 5000);
}

TEST_CASE("draft splits satisfy the block table exhaustively") {
    auto props = numbered_properties(40);
    auto partition = partition_labels(props, {0.2, 0.2, 0.1, 0.5}, 11);
    auto corpus = make_split_corpus(partition, 2000, 22);
    BlockSizes blocks = BlockSizes{}.scaled(0.04);  // 40/40/80/80/80/80
    SplitPlan plan = draft_splits(corpus, partition, blocks, 33);

    CHECK(plan.test.size() == static_cast<size_t>(blocks.test_total()));
    CHECK(plan.validation.size() == static_cast<size_t>(blocks.validation_total()));
    CHECK(plan.block_counts.at("A") == blocks.a);
    CHECK(plan.block_counts.at("G") == static_cast<int64_t>(plan.train.size()));

    auto audit = audit_split(plan.train, plan.validation, plan.test, partition);
    CHECK(audit.ok);

    // set1 only in test, set2 only in validation, train strictly set4
    for (const auto& r : plan.train)
        for (const auto& [prop, vals] : r.properties) CHECK(partition.which(prop) == 4);
    for (const auto& r : plan.validation)
        for (const auto& [prop, vals] : r.properties) CHECK(partition.which(prop) != 1);
    for (const auto& r : plan.test)
        for (const auto& [prop, vals] : r.properties) CHECK(partition.which(prop) != 2);

    // value accounting: inputs = placed + stripped + dropped
    int64_t placed = 0;
    for (const auto* split : {&plan.train, &plan.validation, &plan.test})
        for (const auto& r : *split)
            for (const auto& [prop, vals] : r.properties) placed += static_cast<int64_t>(vals.size());
    CHECK(plan.input_values == placed + plan.stripped_values + plan.dropped_values);
}

TEST_CASE("draft is deterministic for a fixed seed") {
    auto partition = partition_labels(numbered_properties(40), {0.2, 0.2, 0.1, 0.5}, 5);
    auto corpus = make_split_corpus(partition, 1500, 6);
    BlockSizes blocks = BlockSizes{}.scaled(0.02);
    SplitPlan p1 = draft_splits(corpus, partition, blocks, 9);
    SplitPlan p2 = draft_splits(corpus, partition, blocks, 9);
    auto dump = [](const SplitPlan& p) {
        std::string s;
        for (const auto* split : {&p.train, &p.validation, &p.test})
            for (const auto& r : *split) s += record_to_json_line(r) + "\n";
        return s;
    };
    CHECK(dump(p1) == dump(p2));
}

TEST_CASE("draft rejects with per-block shortfalls") {
    auto partition = partition_labels(numbered_properties(8), {0.25, 0.25, 0.25, 0.25}, 1);
    std::vector<MultiPropertyRecord> tiny;
    for (int i = 0; i < 3; ++i) {
        MultiPropertyRecord r;
        r.article_id = "a" + std::to_string(i);
        r.text = "t";
        r.properties[*partition.set4.begin()] = {"v"};
        tiny.push_back(r);
    }
    try {
        draft_splits(tiny, partition, BlockSizes{}, 1);
        FAIL("expected shortfall rejection");
    } catch (const DataError& e) {
        std::string msg = e.what();
        CHECK(msg.find("block A") != std::string::npos);
        CHECK(msg.find("block E") != std::string::npos);
    }
}

TEST_CASE("annotation filter removes values, properties and articles") {
    std::vector<MultiPropertyRecord> records(2);
    records[0].article_id = "a1";
    records[0].text = "t";
    records[0].properties["p"] = {"x", "y"};
    records[0].properties["q"] = {"z"};
    records[1].article_id = "a2";
    records[1].text = "t";
    records[1].properties["p"] = {"only"};

    SUBCASE("empty filter is the identity") {
        FilterStats st;
        auto out = apply_annotation_filter(records, {}, &st);
        CHECK(out.size() == 2);
        CHECK(st.values_removed == 0);
        CHECK(out[0].properties == records[0].properties);
    }

    SUBCASE("value removal and whole-property removal") {
        std::vector<FilterEntry> filter = {{"a1", "p", "x"}, {"a1", "q", std::nullopt}};
        FilterStats st;
        auto out = apply_annotation_filter(records, filter, &st);
        REQUIRE(out.size() == 2);
        CHECK(out[0].properties.at("p") == std::vector<std::string>{"y"});
        CHECK(out[0].properties.count("q") == 0);
        CHECK(st.values_removed == 2);
        CHECK(st.properties_removed == 1);
    }

    SUBCASE("removing every property drops the article") {
        std::vector<FilterEntry> filter = {{"a2", "p", std::nullopt}};
        FilterStats st;
        auto out = apply_annotation_filter(records, filter, &st);
        REQUIRE(out.size() == 1);
        CHECK(out[0].article_id == "a1");
        CHECK(st.articles_dropped == 1);
    }

    SUBCASE("unknown references are counted and ignored") {
        std::vector<FilterEntry> filter = {{"nope", "p", std::nullopt}, {"a1", "nope", std::nullopt}};
        FilterStats st;
        auto out = apply_annotation_filter(records, filter, &st);
        CHECK(out.size() == 2);
        CHECK(st.unknown_refs == 2);
    }
}

TEST_CASE("filter report matches the removal percentage") {
    // 100 values, filter removes 28 of them
    std::vector<MultiPropertyRecord> records(1);
    records[0].article_id = "a";
    records[0].text = "t";
    for (int i = 0; i < 100; ++i)
        records[0].properties["p" + std::to_string(i)] = {"v" + std::to_string(i)};
    std::vector<FilterEntry> filter;
    for (int i = 0; i < 28; ++i) filter.push_back({"a", "p" + std::to_string(i), std::nullopt});
    FilterStats st;
    apply_annotation_filter(records, filter, &st);
    CHECK(st.values_before == 100);
    CHECK(st.values_removed == 28);
    CHECK(st.values_removed_pct() == doctest::Approx(28.0));
}

TEST_CASE("EM/IN tagging") {
    MultiPropertyRecord r;
    r.article_id = "a";
    r.text = "He was born in Paris, and moved to New York in 1900.";
    r.properties["birthplace"] = {"Paris"};
    r.properties["residence"] = {"new york", "France"};
    auto tags = tag_em_in(r);
    REQUIRE(tags.size() == 3);
    std::map<std::string, bool> by_value;
    for (const auto& t : tags) {
        by_value[t.value] = t.exact_match;
        // every pair gets exactly one tag
        CHECK((t.exact_match == true || t.exact_match == false));
    }
    CHECK(by_value.at("Paris") == true);       // case and punctuation insensitive
    CHECK(by_value.at("new york") == true);    // multi-token subsequence
    CHECK(by_value.at("France") == false);     // inferable only

    // token subsequence, not substring: "art" must not match inside "Paris"
    MultiPropertyRecord r2;
    r2.article_id = "b";
    r2.text = "earth art gallery";
    r2.properties["p"] = {"art"};
    r2.properties["q"] = {"ear"};
    auto tags2 = tag_em_in(r2);
    std::map<std::string, bool> by_value2;
    for (const auto& t : tags2) by_value2[t.value] = t.exact_match;
    CHECK(by_value2.at("art") == true);
    CHECK(by_value2.at("ear") == false);
}
