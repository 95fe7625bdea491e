#include "propex/records.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "propex/common.hpp"

namespace propex {

namespace {

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << is.rdbuf();
    return buf.str();
}

template <class Fn>
void for_each_jsonl(const std::string& content, const std::string& what, Fn&& fn) {
    std::istringstream is(content);
    std::string line;
    size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(what + ": bad JSON on line " + std::to_string(lineno) + ": " + e.what());
        }
        try {
            fn(j);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(what + ": schema violation on line " + std::to_string(lineno) + ": " +
                            e.what());
        }
    }
}

std::vector<std::string> dedup_keep_order(const std::vector<std::string>& in) {
    std::vector<std::string> out;
    for (const auto& v : in)
        if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
    return out;
}

}  // namespace

std::vector<SingleInstance> parse_instances_jsonl(const std::string& content,
                                                  const InstanceFieldNames& fields) {
    std::vector<SingleInstance> out;
    for_each_jsonl(content, "instances", [&](const nlohmann::json& j) {
        SingleInstance inst;
        inst.article_id = j.at(fields.id).get<std::string>();
        inst.text = j.at(fields.text).get<std::string>();
        inst.property = j.at(fields.property).get<std::string>();
        inst.values = dedup_keep_order(j.at(fields.values).get<std::vector<std::string>>());
        if (inst.values.empty()) throw DataError("instances: empty value list for article '" +
                                                 inst.article_id + "'");
        out.push_back(std::move(inst));
    });
    return out;
}

std::vector<SingleInstance> read_instances_jsonl(const std::string& path,
                                                 const InstanceFieldNames& fields) {
    return parse_instances_jsonl(slurp(path), fields);
}

std::vector<MultiPropertyRecord> parse_records_jsonl(const std::string& content) {
    std::vector<MultiPropertyRecord> out;
    for_each_jsonl(content, "records", [&](const nlohmann::json& j) {
        MultiPropertyRecord r;
        r.article_id = j.at("id").get<std::string>();
        r.text = j.at("text").get<std::string>();
        for (const auto& [name, vals] : j.at("properties").items()) {
            auto list = dedup_keep_order(vals.get<std::vector<std::string>>());
            if (list.empty())
                throw DataError("records: empty value list for property '" + name + "'");
            r.properties[name] = std::move(list);
        }
        if (r.properties.empty())
            throw DataError("records: article '" + r.article_id + "' has no properties");
        out.push_back(std::move(r));
    });
    return out;
}

std::vector<MultiPropertyRecord> read_records_jsonl(const std::string& path) {
    return parse_records_jsonl(slurp(path));
}

std::string record_to_json_line(const MultiPropertyRecord& r) {
    nlohmann::json j;
    j["id"] = r.article_id;
    j["text"] = r.text;
    j["properties"] = r.properties;
    return j.dump();
}

void write_records_jsonl(const std::string& path, const std::vector<MultiPropertyRecord>& records) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open '" + path + "' for writing");
    for (const auto& r : records) os << record_to_json_line(r) << "\n";
    if (!os) throw DataError("write failed for '" + path + "'");
}

}  // namespace propex
