#include <doctest.h>

#include "metric_oracle.hpp"
#include "propex/common.hpp"
#include "propex/metrics.hpp"

using namespace propex;
using namespace propex::testing;

TEST_CASE("set_f1 basics") {
    CHECK(set_f1({"a"}, {"a"}) == 1.0);
    CHECK(set_f1({}, {"a"}) == 0.0);
    CHECK(set_f1({"a"}, {}) == 0.0);
    CHECK(set_f1({}, {}) == 1.0);
    CHECK(set_f1({"a", "b"}, {"a", "c"}) == doctest::Approx(0.5));
    // normalization: case, whitespace, outer punctuation
    CHECK(set_f1({"New  York."}, {"new york"}) == 1.0);
    // symmetric: P and R swap
    SplitMix64 rng(4);
    std::vector<std::string> pool = {"a", "b", "c", "d"};
    for (int i = 0; i < 50; ++i) {
        std::vector<std::string> x, y;
        for (size_t j = 0; j < 1 + rng.below(3); ++j) x.push_back(pool[rng.below(pool.size())]);
        for (size_t j = 0; j < 1 + rng.below(3); ++j) y.push_back(pool[rng.below(pool.size())]);
        CHECK(set_f1(x, y) == set_f1(y, x));
    }
}

TEST_CASE("mean_f1 arithmetic") {
    using Pairs = std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>>;
    CHECK(mean_f1(Pairs{{{"a"}, {"a"}}, {{}, {"b"}}}) == doctest::Approx(0.5));
    CHECK(mean_f1(Pairs{{{"a", "b"}, {"a", "c"}}}) == doctest::Approx(0.5));  // single pair
    Pairs four = {{{"a"}, {"a"}}, {{"b"}, {"b"}}, {{"a", "b"}, {"a", "c"}}, {{}, {"x"}}};
    CHECK(mean_f1(four) == doctest::Approx(0.625));
    CHECK_THROWS_AS(mean_f1({}), DataError);
}

TEST_CASE("mean_multilabel_f1 two-level mean") {
    std::vector<MultiPropertyRecord> golds(2);
    golds[0].article_id = "a1";
    golds[0].text = "t";
    golds[0].properties["p"] = {"x"};
    golds[0].properties["q"] = {"y"};
    golds[1].article_id = "a2";
    golds[1].text = "t";
    golds[1].properties["p"] = {"z"};

    std::vector<Prediction> preds(2);
    preds[0].article_id = "a1";
    preds[0].properties["p"] = {"x"};  // 1.0
    preds[0].properties["q"] = {"no"};  // 0.0
    preds[1].article_id = "a2";
    preds[1].properties["p"] = {"z"};  // 1.0

    CHECK(mean_multilabel_f1(preds, golds) == doctest::Approx(0.75));
}

TEST_CASE("mm_f1 rejects unknown articles and unqueried keys") {
    std::vector<MultiPropertyRecord> golds(1);
    golds[0].article_id = "a1";
    golds[0].text = "t";
    golds[0].properties["p"] = {"x"};

    std::vector<Prediction> unknown(1);
    unknown[0].article_id = "nope";
    CHECK_THROWS_AS(mean_multilabel_f1(unknown, golds), DataError);

    std::vector<Prediction> extra_key(1);
    extra_key[0].article_id = "a1";
    extra_key[0].properties["q"] = {"y"};
    CHECK_THROWS_AS(mean_multilabel_f1(extra_key, golds), DataError);
}

TEST_CASE("per_label_f1") {
    std::vector<MultiPropertyRecord> golds(3);
    for (int i = 0; i < 3; ++i) {
        golds[i].article_id = "a" + std::to_string(i);
        golds[i].text = "t";
    }
    golds[0].properties["k"] = {"x"};
    golds[1].properties["k"] = {"x", "y"};
    golds[2].properties["other"] = {"z"};

    std::vector<Prediction> preds(2);
    preds[0].article_id = "a0";
    preds[0].properties["k"] = {"x"};  // 1.0
    preds[1].article_id = "a1";
    preds[1].properties["k"] = {"x"};  // P=1, R=0.5 -> 2/3

    CHECK(per_label_f1(preds, golds, "k") == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0));
    CHECK_THROWS_AS(per_label_f1(preds, golds, "missing"), DataError);

    // never-predicted key scores zero
    std::vector<Prediction> none;
    CHECK(per_label_f1(none, golds, "k") == 0.0);
    // single article equals set_f1
    CHECK(per_label_f1(preds, golds, "other") == set_f1({}, {"z"}));
}

TEST_CASE("subset recall") {
    std::vector<MultiPropertyRecord> golds(1);
    golds[0].article_id = "a";
    golds[0].text = "t";
    golds[0].properties["p"] = {"v1", "v2", "v3", "v4"};
    std::vector<TaggedValue> tags = {
        {"a", "p", "v1", true}, {"a", "p", "v2", true}, {"a", "p", "v3", true}, {"a", "p", "v4", true}};

    std::vector<Prediction> preds(1);
    preds[0].article_id = "a";
    preds[0].properties["p"] = {"v1", "v2", "v3"};
    CHECK(subset_recall(preds, golds, tags, true) == doctest::Approx(0.75));

    preds[0].properties["p"] = {"v1", "v2", "v3", "v4"};
    CHECK(subset_recall(preds, golds, tags, true) == 1.0);
    preds[0].properties["p"] = {};
    CHECK(subset_recall(preds, golds, tags, true) == 0.0);
    CHECK_THROWS_AS(subset_recall(preds, golds, tags, false), DataError);  // no IN tags
}

TEST_CASE("streaming metrics match the literal transcription on random micro-corpora") {
    for (uint64_t seed = 0; seed < 200; ++seed) {
        MicroCorpus mc = make_micro_corpus(seed);
        CHECK(std::abs(mean_multilabel_f1(mc.preds, mc.golds) -
                       oracle_mean_multilabel_f1(mc.preds, mc.golds)) < 1e-12);
        auto report = evaluate(mc.preds, mc.golds);
        CHECK(std::abs(report.mean_f1 - oracle_mean_f1(mc.preds, mc.golds)) < 1e-12);
        for (const auto& [key, score] : report.per_label)
            CHECK(std::abs(score - oracle_per_label_f1(mc.preds, mc.golds, key)) < 1e-12);
    }
}

TEST_CASE("order invariance of mean_multilabel_f1") {
    MicroCorpus mc = make_micro_corpus(17);
    const double base = mean_multilabel_f1(mc.preds, mc.golds);
    SplitMix64 rng(3);
    for (int it = 0; it < 20; ++it) {
        MicroCorpus shuffled = mc;
        rng.shuffle(shuffled.golds);
        rng.shuffle(shuffled.preds);
        for (auto& p : shuffled.preds)
            for (auto& [key, vals] : p.properties) rng.shuffle(vals);
        CHECK(mean_multilabel_f1(shuffled.preds, shuffled.golds) == base);
    }
}

TEST_CASE("degenerate equivalence: one key per article") {
    SplitMix64 rng(8);
    for (int it = 0; it < 20; ++it) {
        MicroCorpus mc = make_micro_corpus(300 + it);
        for (auto& g : mc.golds)  // keep only the first key
            while (g.properties.size() > 1) g.properties.erase(std::prev(g.properties.end()));
        for (auto& p : mc.preds) {
            for (auto it2 = p.properties.begin(); it2 != p.properties.end();) {
                bool queried = false;
                for (auto& g : mc.golds)
                    if (g.article_id == p.article_id && g.properties.count(it2->first)) queried = true;
                it2 = queried ? std::next(it2) : p.properties.erase(it2);
            }
        }
        auto report = evaluate(mc.preds, mc.golds);
        CHECK(report.mean_f1 == report.mean_multilabel_f1);
    }
}

TEST_CASE("perfect and empty predictions") {
    MicroCorpus mc = make_micro_corpus(23);
    std::vector<Prediction> perfect;
    for (const auto& g : mc.golds) {
        Prediction p;
        p.article_id = g.article_id;
        for (const auto& [key, vals] : g.properties) p.properties[key] = vals;
        perfect.push_back(p);
    }
    auto report = evaluate(perfect, mc.golds);
    CHECK(report.mean_f1 == 1.0);
    CHECK(report.mean_multilabel_f1 == 1.0);
    for (const auto& [key, score] : report.per_label) CHECK(score == 1.0);

    auto empty_report = evaluate({}, mc.golds);
    CHECK(empty_report.mean_f1 == 0.0);
    CHECK(empty_report.mean_multilabel_f1 == 0.0);
}

TEST_CASE("scores stay in [0,1]") {
    for (uint64_t seed = 500; seed < 560; ++seed) {
        MicroCorpus mc = make_micro_corpus(seed);
        auto report = evaluate(mc.preds, mc.golds);
        CHECK(report.mean_f1 >= 0.0);
        CHECK(report.mean_f1 <= 1.0);
        CHECK(report.mean_multilabel_f1 >= 0.0);
        CHECK(report.mean_multilabel_f1 <= 1.0);
    }
}

TEST_CASE("predictions jsonl parsing ignores extra fields") {
    auto preds = parse_predictions_jsonl(
        R"({"id":"a","properties":{"p":["x"]},"score":-1.5,"flags":[]})" "\n");
    REQUIRE(preds.size() == 1);
    CHECK(preds[0].properties.at("p") == std::vector<std::string>{"x"});
}

TEST_CASE("report serialization") {
    MicroCorpus mc = make_micro_corpus(2);
    auto report = evaluate(mc.preds, mc.golds);
    CHECK(report.to_json().find("mean_multilabel_f1") != std::string::npos);
    CHECK(report.to_table().find("Mean-MultiLabel-F1") != std::string::npos);
}
