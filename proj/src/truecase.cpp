#include "propex/truecase.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "propex/common.hpp"
#include "propex/text_util.hpp"

namespace propex {

Truecaser Truecaser::train(const std::vector<std::string>& cased_lines, bool skip_sentence_initial) {
    // lowercased token -> cased form -> count
    std::map<std::string, std::map<std::string, int64_t>> counts;
    for (const auto& line : cased_lines) {
        auto tokens = split_ws(line);
        for (size_t i = skip_sentence_initial ? 1 : 0; i < tokens.size(); ++i)
            ++counts[ascii_lower(tokens[i])][tokens[i]];
    }
    Truecaser tc;
    for (const auto& [lower, forms] : counts) {
        std::string best;
        int64_t best_count = -1;
        for (const auto& [form, count] : forms)
            if (count > best_count) {  // map order breaks ties to the smallest form
                best = form;
                best_count = count;
            }
        if (best != lower) tc.best_form_[lower] = best;
    }
    return tc;
}

std::string Truecaser::apply(std::string_view text) const {
    std::string out;
    out.reserve(text.size());
    size_t i = 0;
    while (i < text.size()) {
        if (is_space(text[i])) {
            out += text[i++];
            continue;
        }
        size_t j = i;
        while (j < text.size() && !is_space(text[j])) ++j;
        std::string token(text.substr(i, j - i));
        auto it = best_form_.find(token);
        out += it == best_form_.end() ? token : it->second;
        i = j;
    }
    return out;
}

void Truecaser::save(const std::string& path) const {
    nlohmann::json j;
    j["version"] = 1;
    j["forms"] = best_form_;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("truecaser save: cannot open '" + path + "'");
    os << j.dump();
}

Truecaser Truecaser::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("truecaser load: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << is.rdbuf();
    nlohmann::json j = nlohmann::json::parse(buf.str());
    Truecaser tc;
    tc.best_form_ = j.at("forms").get<std::map<std::string, std::string>>();
    return tc;
}

}  // namespace propex
