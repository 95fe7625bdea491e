#pragma once

#include <map>
#include <string>
#include <vector>

namespace propex {

// Textual target for multi-property generation:
//   name = v1 | v2 SEP name2 = v3
// Properties in lexicographic order, values sorted; names and values are
// whitespace-normalized, and tokens spelling a reserved word (=, |, SEP,
// or an escaped form) carry a backslash prefix.
std::string serialize_target(const std::map<std::string, std::vector<std::string>>& properties);

struct ParsedTarget {
    std::map<std::string, std::vector<std::string>> properties;
    int malformed_segments = 0;
};

// Best-effort inverse: malformed segments are skipped and counted.
ParsedTarget parse_target(const std::string& text);

// Single-property targets: just the value list.
std::string serialize_values(const std::vector<std::string>& values);
std::vector<std::string> parse_values(const std::string& text);

}  // namespace propex
