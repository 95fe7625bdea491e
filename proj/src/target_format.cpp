#include "propex/target_format.hpp"

#include <algorithm>

#include "propex/text_util.hpp"

namespace propex {

namespace {

bool needs_escape(const std::string& token) {
    if (token == "=" || token == "|" || token == "SEP") return true;
    return !token.empty() && token.front() == '\\';
}

std::string escape_phrase(const std::string& s) {
    std::string out;
    for (const auto& tok : split_ws(s)) {
        if (!out.empty()) out += ' ';
        if (needs_escape(tok)) out += '\\';
        out += tok;
    }
    return out;
}

std::string unescape_token(const std::string& tok) {
    return (!tok.empty() && tok.front() == '\\') ? tok.substr(1) : tok;
}

void push_value(std::vector<std::string>& values, std::vector<std::string>& words) {
    if (words.empty()) return;
    std::string v;
    for (const auto& w : words) {
        if (!v.empty()) v += ' ';
        v += w;
    }
    words.clear();
    if (std::find(values.begin(), values.end(), v) == values.end()) values.push_back(v);
}

}  // namespace

std::string serialize_target(const std::map<std::string, std::vector<std::string>>& properties) {
    std::string out;
    for (const auto& [name, values] : properties) {
        std::vector<std::string> vals;
        for (const auto& v : values) {
            std::string e = escape_phrase(v);
            if (!e.empty() && std::find(vals.begin(), vals.end(), e) == vals.end())
                vals.push_back(std::move(e));
        }
        if (vals.empty()) continue;
        std::sort(vals.begin(), vals.end());
        if (!out.empty()) out += " SEP ";
        out += escape_phrase(name) + " =";
        for (size_t i = 0; i < vals.size(); ++i) out += (i ? " | " : " ") + vals[i];
    }
    return out;
}

ParsedTarget parse_target(const std::string& text) {
    ParsedTarget result;
    std::vector<std::vector<std::string>> segments(1);
    for (const auto& tok : split_ws(text)) {
        if (tok == "SEP")
            segments.emplace_back();
        else
            segments.back().push_back(tok);
    }
    for (const auto& seg : segments) {
        if (seg.empty()) {
            // an empty trailing segment only appears for dangling SEPs
            if (segments.size() > 1) ++result.malformed_segments;
            continue;
        }
        auto eq = std::find(seg.begin(), seg.end(), "=");
        if (eq == seg.end() || eq == seg.begin()) {
            ++result.malformed_segments;
            continue;
        }
        std::string name;
        for (auto it = seg.begin(); it != eq; ++it) {
            if (!name.empty()) name += ' ';
            name += unescape_token(*it);
        }
        std::vector<std::string> values;
        std::vector<std::string> words;
        for (auto it = std::next(eq); it != seg.end(); ++it) {
            if (*it == "|")
                push_value(values, words);
            else
                words.push_back(unescape_token(*it));
        }
        push_value(values, words);
        if (values.empty()) {
            ++result.malformed_segments;
            continue;
        }
        auto& slot = result.properties[name];
        for (auto& v : values)
            if (std::find(slot.begin(), slot.end(), v) == slot.end()) slot.push_back(std::move(v));
        std::sort(slot.begin(), slot.end());
    }
    return result;
}

std::string serialize_values(const std::vector<std::string>& values) {
    std::vector<std::string> vals;
    for (const auto& v : values) {
        std::string e = escape_phrase(v);
        if (!e.empty() && std::find(vals.begin(), vals.end(), e) == vals.end())
            vals.push_back(std::move(e));
    }
    std::sort(vals.begin(), vals.end());
    std::string out;
    for (size_t i = 0; i < vals.size(); ++i) out += (i ? " | " : "") + vals[i];
    return out;
}

std::vector<std::string> parse_values(const std::string& text) {
    std::vector<std::string> values;
    std::vector<std::string> words;
    for (const auto& tok : split_ws(text)) {
        if (tok == "|")
            push_value(values, words);
        else
            words.push_back(unescape_token(tok));
    }
    push_value(values, words);
    return values;
}

}  // namespace propex
