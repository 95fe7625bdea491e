#include <doctest.h>

#include "propex/common.hpp"
#include "propex/target_format.hpp"

using namespace propex;

TEST_CASE("single property round trip") {
    std::map<std::string, std::vector<std::string>> m{{"p", {"x"}}};
    CHECK(serialize_target(m) == "p = x");
    auto parsed = parse_target("p = x");
    CHECK(parsed.properties == m);
    CHECK(parsed.malformed_segments == 0);
}

TEST_CASE("multi property, multi value round trip with order normalization") {
    std::map<std::string, std::vector<std::string>> m{{"p", {"y", "x"}}, {"q", {"z"}}};
    const std::string s = serialize_target(m);
    CHECK(s == "p = x | y SEP q = z");
    auto parsed = parse_target(s);
    std::map<std::string, std::vector<std::string>> want{{"p", {"x", "y"}}, {"q", {"z"}}};
    CHECK(parsed.properties == want);
}

TEST_CASE("malformed segments are skipped and counted") {
    auto parsed = parse_target("p = x SEP = z");
    CHECK(parsed.properties == std::map<std::string, std::vector<std::string>>{{"p", {"x"}}});
    CHECK(parsed.malformed_segments == 1);

    auto no_eq = parse_target("just words SEP q = ok");
    CHECK(no_eq.properties == std::map<std::string, std::vector<std::string>>{{"q", {"ok"}}});
    CHECK(no_eq.malformed_segments == 1);

    auto no_vals = parse_target("p =");
    CHECK(no_vals.properties.empty());
    CHECK(no_vals.malformed_segments == 1);

    CHECK(parse_target("").properties.empty());
    CHECK(parse_target("").malformed_segments == 0);
}

TEST_CASE("reserved words are escaped") {
    std::map<std::string, std::vector<std::string>> m{
        {"op = sign", {"a | b", "SEP word", "\\backslash"}}};
    auto parsed = parse_target(serialize_target(m));
    REQUIRE(parsed.malformed_segments == 0);
    REQUIRE(parsed.properties.size() == 1);
    auto vals = parsed.properties.at("op = sign");
    CHECK(std::find(vals.begin(), vals.end(), "a | b") != vals.end());
    CHECK(std::find(vals.begin(), vals.end(), "SEP word") != vals.end());
    CHECK(std::find(vals.begin(), vals.end(), "\\backslash") != vals.end());
}

TEST_CASE("random property maps round trip") {
    SplitMix64 rng(77);
    const std::vector<std::string> words = {"alpha", "beta", "gamma", "=", "|", "SEP", "x1", "y2"};
    for (int it = 0; it < 500; ++it) {
        std::map<std::string, std::vector<std::string>> m;
        const int props = 1 + static_cast<int>(rng.below(4));
        for (int p = 0; p < props; ++p) {
            std::string name = "name" + std::to_string(rng.below(6));
            if (rng.below(4) == 0) name += " " + words[rng.below(words.size())];
            std::vector<std::string> vals;
            const int nv = 1 + static_cast<int>(rng.below(3));
            for (int v = 0; v < nv; ++v) {
                std::string val = words[rng.below(words.size())];
                if (rng.below(2)) val += " " + words[rng.below(words.size())];
                if (std::find(vals.begin(), vals.end(), val) == vals.end()) vals.push_back(val);
            }
            std::sort(vals.begin(), vals.end());
            m[name] = vals;
        }
        auto parsed = parse_target(serialize_target(m));
        CHECK(parsed.malformed_segments == 0);
        CHECK(parsed.properties == m);
    }
}

TEST_CASE("value list serialization round trips") {
    CHECK(serialize_values({"b", "a"}) == "a | b");
    CHECK(parse_values("a | b") == std::vector<std::string>{"a", "b"});
    CHECK(parse_values("new york | paris") == std::vector<std::string>{"new york", "paris"});
    CHECK(parse_values("").empty());
}
