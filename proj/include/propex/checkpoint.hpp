#pragma once

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "propex/tensor.hpp"

namespace propex {

// Checkpoint container: 8-byte magic, u64 LE header length, JSON header
// (parameter names, shapes, dtype, global step), then raw little-endian
// tensor payloads in header order.
inline constexpr char kCheckpointMagic[8] = {'P', 'X', 'C', 'K', '0', '0', '0', '1'};

namespace detail {

inline void write_u64_le(std::ostream& os, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline uint64_t read_u64_le(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

template <class Float>
constexpr const char* dtype_name() {
    if constexpr (sizeof(Float) == 8)
        return "f64";
    else
        return "f32";
}

}  // namespace detail

template <class Float>
void save_checkpoint(const std::string& path, const ParameterStore<Float>& params, int64_t step) {
    nlohmann::json header;
    header["dtype"] = detail::dtype_name<Float>();
    header["step"] = step;
    nlohmann::json plist = nlohmann::json::array();
    for (const auto& p : params) {
        nlohmann::json e;
        e["name"] = p->name;
        e["shape"] = p->value.shape;
        plist.push_back(e);
    }
    header["params"] = plist;
    const std::string hs = header.dump();

    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("checkpoint: cannot open '" + path + "' for writing");
    os.write(kCheckpointMagic, 8);
    detail::write_u64_le(os, hs.size());
    os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& p : params) {
        // static_assert elsewhere keeps Float to IEEE f32/f64; payload is
        // the in-memory representation, little-endian hosts only.
        os.write(reinterpret_cast<const char*>(p->value.data.data()),
                 static_cast<std::streamsize>(p->value.data.size() * sizeof(Float)));
    }
    if (!os) throw DataError("checkpoint: write failed for '" + path + "'");
}

struct CheckpointInfo {
    int64_t step = 0;
    std::string dtype;
    std::vector<std::pair<std::string, std::vector<int64_t>>> params;
};

inline CheckpointInfo read_checkpoint_header(std::istream& is, const std::string& path) {
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw DataError("checkpoint: bad magic in '" + path + "'");
    const uint64_t hlen = detail::read_u64_le(is);
    std::string hs(hlen, '\0');
    is.read(hs.data(), static_cast<std::streamsize>(hlen));
    if (!is) throw DataError("checkpoint: truncated header in '" + path + "'");
    nlohmann::json header = nlohmann::json::parse(hs);
    CheckpointInfo info;
    info.step = header.at("step").get<int64_t>();
    info.dtype = header.at("dtype").get<std::string>();
    for (const auto& e : header.at("params"))
        info.params.emplace_back(e.at("name").get<std::string>(),
                                 e.at("shape").get<std::vector<int64_t>>());
    return info;
}

// Loads into an existing store: names, order and shapes must match.
// Payload dtype is converted to Float when they differ.
template <class Float>
int64_t load_checkpoint(const std::string& path, ParameterStore<Float>& params) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("checkpoint: cannot open '" + path + "'");
    CheckpointInfo info = read_checkpoint_header(is, path);
    if (info.params.size() != params.size())
        throw DataError("checkpoint: '" + path + "' has " + std::to_string(info.params.size()) +
                        " parameters, model has " + std::to_string(params.size()));
    const bool stored_f64 = info.dtype == "f64";
    if (!stored_f64 && info.dtype != "f32")
        throw DataError("checkpoint: unknown dtype '" + info.dtype + "' in '" + path + "'");
    for (size_t i = 0; i < params.size(); ++i) {
        Parameter<Float>& p = params[i];
        if (p.name != info.params[i].first)
            throw DataError("checkpoint: parameter " + std::to_string(i) + " is '" +
                            info.params[i].first + "', model expects '" + p.name + "'");
        if (p.value.shape != info.params[i].second)
            throw DataError("checkpoint: shape mismatch for '" + p.name + "': file " +
                            shape_str(info.params[i].second) + ", model " + shape_str(p.value.shape));
        const size_t n = p.value.data.size();
        if (stored_f64) {
            std::vector<double> buf(n);
            is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * 8));
            for (size_t j = 0; j < n; ++j) p.value.data[j] = static_cast<Float>(buf[j]);
        } else {
            std::vector<float> buf(n);
            is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * 4));
            for (size_t j = 0; j < n; ++j) p.value.data[j] = static_cast<Float>(buf[j]);
        }
        if (!is) throw DataError("checkpoint: truncated payload in '" + path + "'");
    }
    return info.step;
}

}  // namespace propex
