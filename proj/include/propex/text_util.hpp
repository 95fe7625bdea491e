#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace propex {

inline char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

inline std::string ascii_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = ascii_lower(c);
    return out;
}

inline bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

inline bool is_ascii_punct(char c) {
    return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') || (c >= '[' && c <= '`') ||
           (c >= '{' && c <= '~');
}

inline std::vector<std::string> split_ws(std::string_view s) {
    std::vector<std::string> out;
    size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_space(s[i])) ++i;
        size_t j = i;
        while (j < s.size() && !is_space(s[j])) ++j;
        if (j > i) out.emplace_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

inline std::string strip_outer_punct(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && is_ascii_punct(s[b])) ++b;
    while (e > b && is_ascii_punct(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

// Canonical string used whenever two values are compared: lowercase,
// outer punctuation stripped, whitespace collapsed to single spaces.
inline std::string normalize_value(std::string_view s) {
    std::string lowered = ascii_lower(s);
    auto words = split_ws(lowered);
    std::string joined;
    for (const auto& w : words) {
        if (!joined.empty()) joined += ' ';
        joined += w;
    }
    return strip_outer_punct(joined);
}

// Token stream used for exact-match detection: lowercased words with
// outer punctuation stripped per token, empties dropped.
inline std::vector<std::string> match_tokens(std::string_view s) {
    std::vector<std::string> out;
    for (const auto& w : split_ws(ascii_lower(s))) {
        std::string t = strip_outer_punct(w);
        if (!t.empty()) out.push_back(std::move(t));
    }
    return out;
}

}  // namespace propex
