#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "propex/common.hpp"
#include "propex/subword.hpp"

using namespace propex;

namespace {
constexpr int kBase = Specials::count + 257;  // specials + marker + bytes

std::vector<std::string> piece_strings(const SubwordModel& m, const std::vector<int>& ids,
                                       bool strip_marker) {
    std::vector<std::string> out;
    for (int id : ids) {
        if (id < Specials::count) continue;
        std::string p = m.piece_text(id);
        if (strip_marker && !p.empty() && p.front() == ' ') p.erase(p.begin());
        if (!p.empty()) out.push_back(p);
    }
    return out;
}
}  // namespace

TEST_CASE("first merge on aaab corpus is (a,a)") {
    SubwordModel m = SubwordModel::train({"aaab aaab"}, kBase + 4);
    REQUIRE(m.merge_count() >= 1);
    // after one merge, "aaab" splits into aa|a|b
    SubwordModel one = SubwordModel::train({"aaab aaab"}, kBase + 1);
    REQUIRE(one.merge_count() == 1);
    auto ids = one.encode("aaab", false);
    CHECK(piece_strings(one, ids, true) == std::vector<std::string>{"aa", "a", "b"});
}

TEST_CASE("vocab_size at the alphabet floor gives a pure byte model") {
    SubwordModel m = SubwordModel::train({"hello world"}, kBase);
    CHECK(m.merge_count() == 0);
    CHECK(m.vocab_size() == kBase);
    auto ids = m.encode("hi", false);
    CHECK(ids.size() == 3);  // marker + h + i
}

TEST_CASE("empty text with bos/eos") {
    SubwordModel m = SubwordModel::train({"abc"}, kBase);
    auto ids = m.encode("", true);
    CHECK(ids == std::vector<int>{m.specials().bos, m.specials().eos});
    CHECK(m.decode(ids) == "");
}

TEST_CASE("empty corpus is rejected") {
    CHECK_THROWS_AS(SubwordModel::train({}, kBase), DataError);
    CHECK_THROWS_AS(SubwordModel::train({"ab"}, kBase - 1), DataError);
}

TEST_CASE("round trip over random corpus lines") {
    std::vector<std::string> corpus;
    SplitMix64 rng(99);
    const std::string alphabet = "abcdefgh XYZ.,0123";
    for (int i = 0; i < 300; ++i) {
        std::string line;
        const int len = 1 + static_cast<int>(rng.below(40));
        for (int j = 0; j < len; ++j) line += alphabet[rng.below(alphabet.size())];
        corpus.push_back(line);
    }
    corpus.push_back("a  double  space line");
    corpus.push_back(" leading and trailing ");
    corpus.push_back("tabs\tand\tnon-ascii \xc3\xa9\xc3\xa9");
    SubwordModel m = SubwordModel::train(corpus, kBase + 120);
    CHECK(m.merge_count() > 0);
    for (const auto& line : corpus) {
        auto ids = m.encode(line, true);
        CHECK(m.decode(ids) == line);
        for (int id : ids)
            CHECK(id != m.specials().unk);  // byte fallback leaves no UNKs
    }
}

TEST_CASE("training is deterministic and files are byte-identical") {
    std::vector<std::string> corpus = {"the cat sat on the mat", "the bat sat", "cats and mats"};
    SubwordModel a = SubwordModel::train(corpus, kBase + 30);
    SubwordModel b = SubwordModel::train(corpus, kBase + 30);
    CHECK(a.to_json() == b.to_json());

    auto dir = std::filesystem::temp_directory_path();
    auto p1 = dir / "propex_sw1.json", p2 = dir / "propex_sw2.json";
    a.save(p1.string());
    b.save(p2.string());
    std::ifstream f1(p1), f2(p2);
    std::string s1((std::istreambuf_iterator<char>(f1)), {});
    std::string s2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(s1 == s2);
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
}

TEST_CASE("model save/load round trip preserves encoding") {
    std::vector<std::string> corpus = {"abcabc abc", "bcbc abab"};
    SubwordModel m = SubwordModel::train(corpus, kBase + 10);
    auto path = std::filesystem::temp_directory_path() / "propex_sw.json";
    m.save(path.string());
    SubwordModel l = SubwordModel::load(path.string());
    for (const auto& line : corpus) {
        CHECK(m.encode(line, true) == l.encode(line, true));
        CHECK(l.decode(l.encode(line, true)) == line);
    }
    std::filesystem::remove(path);
}

TEST_CASE("specials occupy the lowest ids") {
    SubwordModel m = SubwordModel::train({"xy"}, kBase);
    CHECK(m.specials().pad == 0);
    CHECK(m.specials().bos == 1);
    CHECK(m.specials().eos == 2);
    CHECK(m.specials().unk == 3);
    CHECK(m.specials().sep == 4);
}
