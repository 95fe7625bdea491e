#pragma once

#include <map>
#include <string>
#include <vector>

namespace propex {

// One (article, property, values) record in the original per-property
// schema. Values are deduplicated, order-preserving.
struct SingleInstance {
    std::string article_id;
    std::string text;
    std::string property;
    std::vector<std::string> values;
};

// One article with all of its properties; the unit of the recycled
// dataset.
struct MultiPropertyRecord {
    std::string article_id;
    std::string text;
    std::map<std::string, std::vector<std::string>> properties;
};

// JSONL readers/writers. The instance reader accepts configurable field
// names so original-schema dumps can be ingested directly.
struct InstanceFieldNames {
    std::string id = "id";
    std::string text = "text";
    std::string property = "property";
    std::string values = "values";
};

std::vector<SingleInstance> read_instances_jsonl(const std::string& path,
                                                 const InstanceFieldNames& fields = {});
std::vector<SingleInstance> parse_instances_jsonl(const std::string& content,
                                                  const InstanceFieldNames& fields = {});

std::vector<MultiPropertyRecord> read_records_jsonl(const std::string& path);
std::vector<MultiPropertyRecord> parse_records_jsonl(const std::string& content);
void write_records_jsonl(const std::string& path, const std::vector<MultiPropertyRecord>& records);
std::string record_to_json_line(const MultiPropertyRecord& r);

}  // namespace propex
