#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace propex {

// Frequency truecaser: each lowercased token maps to its most frequent
// cased form from the training corpus. Recasing walks tokens in place, so
// whitespace and token count are preserved and lowercasing the output
// recovers the input.
class Truecaser {
public:
    // skip_sentence_initial drops the first token of every line from the
    // counts; its casing is distorted by sentence casing.
    static Truecaser train(const std::vector<std::string>& cased_lines,
                           bool skip_sentence_initial = true);

    std::string apply(std::string_view lowercased_text) const;

    size_t table_size() const { return best_form_.size(); }
    void save(const std::string& path) const;
    static Truecaser load(const std::string& path);

private:
    std::map<std::string, std::string> best_form_;
};

}  // namespace propex
