#include "propex/subword.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "propex/common.hpp"

namespace propex {

namespace {

constexpr int kAlphabetSize = 257;  // bare marker + 256 bytes

bool printable_ascii(const std::string& s) {
    for (unsigned char c : s)
        if (c < 0x20 || c > 0x7e) return false;
    return true;
}

std::string to_hex(const std::string& s) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(s.size() * 2);
    for (unsigned char c : s) {
        out += digits[c >> 4];
        out += digits[c & 0xf];
    }
    return out;
}

std::string from_hex(const std::string& s) {
    auto nib = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        throw DataError("subword model: bad hex digit");
    };
    if (s.size() % 2) throw DataError("subword model: odd hex length");
    std::string out;
    out.reserve(s.size() / 2);
    for (size_t i = 0; i < s.size(); i += 2)
        out += static_cast<char>((nib(s[i]) << 4) | nib(s[i + 1]));
    return out;
}

}  // namespace

int SubwordModel::piece_id(const Piece& p) const {
    auto it = piece_ids_.find(p);
    return it == piece_ids_.end() ? -1 : it->second;
}

// Shared by train and encode: one "unit" is a word-start marker plus the
// bytes up to the next space. Splitting the line into units up front is
// equivalent to merging over the whole line because no merge may absorb
// a word-start symbol from the right.
struct SubwordTrainer {
    static void init_alphabet(SubwordModel& m) {
        m.pieces_.push_back({true, ""});
        for (int b = 0; b < 256; ++b) m.pieces_.push_back({false, std::string(1, static_cast<char>(b))});
        for (size_t i = 0; i < m.pieces_.size(); ++i) m.piece_ids_[m.pieces_[i]] = static_cast<int>(i);
    }

    // Symbol index sequence for one unit: marker symbol then byte symbols.
    static std::vector<int> unit_symbols(std::string_view word) {
        std::vector<int> seq;
        seq.reserve(word.size() + 1);
        seq.push_back(0);
        for (unsigned char c : word) seq.push_back(1 + c);
        return seq;
    }

    static std::vector<std::string> line_units(std::string_view line) {
        std::vector<std::string> units;
        units.emplace_back();
        for (char c : line) {
            if (c == ' ')
                units.emplace_back();
            else
                units.back() += c;
        }
        return units;
    }
};

SubwordModel SubwordModel::train(const std::vector<std::string>& corpus_lines, int vocab_size) {
    if (corpus_lines.empty()) throw DataError("subword train: empty corpus");
    SubwordModel model;
    SubwordTrainer::init_alphabet(model);
    const int base = Specials::count + kAlphabetSize;
    if (vocab_size < base)
        throw DataError("subword train: vocab_size " + std::to_string(vocab_size) +
                        " is below specials + byte alphabet (" + std::to_string(base) + ")");

    // Distinct units with frequencies.
    std::map<std::string, int64_t> unit_freq;
    for (const auto& line : corpus_lines)
        for (auto& u : SubwordTrainer::line_units(line)) ++unit_freq[u];

    struct Unit {
        std::vector<int> sym;
        int64_t freq;
    };
    std::vector<Unit> units;
    units.reserve(unit_freq.size());
    for (auto& [word, freq] : unit_freq)
        units.push_back({SubwordTrainer::unit_symbols(word), freq});

    using PairKey = std::pair<int, int>;
    std::map<PairKey, int64_t> pair_count;
    std::map<PairKey, std::vector<int>> pair_units;  // unit indices, may hold stale entries
    auto count_unit = [&](int ui, int64_t sign) {
        const auto& s = units[static_cast<size_t>(ui)].sym;
        const int64_t f = units[static_cast<size_t>(ui)].freq * sign;
        for (size_t i = 0; i + 1 < s.size(); ++i) {
            PairKey k{s[i], s[i + 1]};
            pair_count[k] += f;
            if (sign > 0) pair_units[k].push_back(ui);
        }
    };
    for (size_t ui = 0; ui < units.size(); ++ui) count_unit(static_cast<int>(ui), +1);

    const int merges_wanted = vocab_size - base;
    while (static_cast<int>(model.merges_.size()) < merges_wanted) {
        // Highest count; ties go to the smallest pair under Piece order.
        PairKey best{-1, -1};
        int64_t best_count = 1;  // require at least 2 occurrences
        for (auto& [k, c] : pair_count) {
            if (c < best_count) continue;
            if (c > best_count || best.first < 0) {
                best = k;
                best_count = c;
                continue;
            }
            const auto& bx = model.pieces_[static_cast<size_t>(best.first)];
            const auto& by = model.pieces_[static_cast<size_t>(best.second)];
            const auto& kx = model.pieces_[static_cast<size_t>(k.first)];
            const auto& ky = model.pieces_[static_cast<size_t>(k.second)];
            if (kx < bx || (kx == bx && ky < by)) best = k;
        }
        if (best.first < 0) break;

        const Piece px = model.pieces_[static_cast<size_t>(best.first)];
        const Piece py = model.pieces_[static_cast<size_t>(best.second)];
        const Piece merged{px.word_start, px.bytes + py.bytes};
        const int out_idx = static_cast<int>(model.pieces_.size());
        model.pieces_.push_back(merged);
        model.piece_ids_[merged] = out_idx;
        model.merges_.push_back({best.first, best.second, out_idx});
        model.merge_rank_[best] = static_cast<int>(model.merges_.size()) - 1;

        // Re-count only the units that contained the merged pair.
        std::vector<int> affected = pair_units[best];
        std::sort(affected.begin(), affected.end());
        affected.erase(std::unique(affected.begin(), affected.end()), affected.end());
        pair_units.erase(best);
        for (int ui : affected) {
            auto& u = units[static_cast<size_t>(ui)];
            bool contains = false;
            for (size_t i = 0; i + 1 < u.sym.size(); ++i)
                if (u.sym[i] == best.first && u.sym[i + 1] == best.second) {
                    contains = true;
                    break;
                }
            if (!contains) continue;  // stale entry
            count_unit(ui, -1);
            std::vector<int> next;
            next.reserve(u.sym.size());
            for (size_t i = 0; i < u.sym.size();) {
                if (i + 1 < u.sym.size() && u.sym[i] == best.first && u.sym[i + 1] == best.second) {
                    next.push_back(out_idx);
                    i += 2;
                } else {
                    next.push_back(u.sym[i]);
                    ++i;
                }
            }
            u.sym = std::move(next);
            count_unit(ui, +1);
        }
        pair_count.erase(best);
        for (auto it = pair_count.begin(); it != pair_count.end();)
            it = it->second <= 0 ? pair_count.erase(it) : std::next(it);
    }
    return model;
}

std::vector<int> SubwordModel::encode_word(const Piece& first, std::string_view rest) const {
    std::vector<int> sym;
    sym.reserve(rest.size() + 1);
    sym.push_back(piece_ids_.at(first));
    for (unsigned char c : rest) sym.push_back(1 + c);
    // Repeatedly apply the lowest-ranked applicable merge, leftmost first;
    // reproduces the training-time segmentation.
    for (;;) {
        int best_rank = -1;
        for (size_t i = 0; i + 1 < sym.size(); ++i) {
            auto it = merge_rank_.find({sym[i], sym[i + 1]});
            if (it != merge_rank_.end() && (best_rank < 0 || it->second < best_rank))
                best_rank = it->second;
        }
        if (best_rank < 0) break;
        const auto& m = merges_[static_cast<size_t>(best_rank)];
        std::vector<int> next;
        next.reserve(sym.size());
        for (size_t i = 0; i < sym.size();) {
            if (i + 1 < sym.size() && sym[i] == m[0] && sym[i + 1] == m[1]) {
                next.push_back(m[2]);
                i += 2;
            } else {
                next.push_back(sym[i]);
                ++i;
            }
        }
        sym = std::move(next);
    }
    for (auto& s : sym) s += Specials::count;
    return sym;
}

std::vector<int> SubwordModel::encode(std::string_view text, bool add_bos_eos) const {
    std::vector<int> ids;
    if (add_bos_eos) ids.push_back(specials_.bos);
    if (!text.empty()) {
        for (const auto& unit : SubwordTrainer::line_units(text)) {
            auto w = encode_word(Piece{true, ""}, unit);
            ids.insert(ids.end(), w.begin(), w.end());
        }
    }
    if (add_bos_eos) ids.push_back(specials_.eos);
    return ids;
}

std::string SubwordModel::decode(const std::vector<int>& ids) const {
    std::string out;
    for (int id : ids) {
        if (id < Specials::count) continue;  // specials carry no text
        const int pi = id - Specials::count;
        if (pi >= static_cast<int>(pieces_.size()))
            throw DataError("subword decode: id " + std::to_string(id) + " out of range");
        const Piece& p = pieces_[static_cast<size_t>(pi)];
        if (p.word_start) out += ' ';
        out += p.bytes;
    }
    if (!out.empty() && out.front() == ' ') out.erase(out.begin());
    return out;
}

std::string SubwordModel::piece_text(int id) const {
    if (id == specials_.pad) return "<pad>";
    if (id == specials_.bos) return "<bos>";
    if (id == specials_.eos) return "<eos>";
    if (id == specials_.unk) return "<unk>";
    if (id == specials_.sep) return "<sep>";
    const Piece& p = pieces_.at(static_cast<size_t>(id - Specials::count));
    return (p.word_start ? " " : "") + p.bytes;
}

std::string SubwordModel::to_json() const {
    nlohmann::json j;
    j["version"] = 1;
    j["specials"] = {{"pad", specials_.pad}, {"bos", specials_.bos}, {"eos", specials_.eos},
                     {"unk", specials_.unk}, {"sep", specials_.sep}};
    nlohmann::json pieces = nlohmann::json::array();
    for (const auto& p : pieces_) {
        nlohmann::json e;
        e["ws"] = p.word_start;
        if (printable_ascii(p.bytes)) {
            e["s"] = p.bytes;
        } else {
            e["hex"] = true;
            e["s"] = to_hex(p.bytes);
        }
        pieces.push_back(e);
    }
    j["pieces"] = pieces;
    nlohmann::json merges = nlohmann::json::array();
    for (const auto& m : merges_) merges.push_back({m[0], m[1], m[2]});
    j["merges"] = merges;
    return j.dump();
}

SubwordModel SubwordModel::from_json(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    SubwordModel m;
    for (const auto& e : j.at("pieces")) {
        Piece p;
        p.word_start = e.at("ws").get<bool>();
        std::string s = e.at("s").get<std::string>();
        p.bytes = (e.contains("hex") && e["hex"].get<bool>()) ? from_hex(s) : s;
        m.piece_ids_[p] = static_cast<int>(m.pieces_.size());
        m.pieces_.push_back(std::move(p));
    }
    if (static_cast<int>(m.pieces_.size()) < kAlphabetSize)
        throw DataError("subword model: missing byte alphabet");
    for (const auto& e : j.at("merges")) {
        std::array<int, 3> t{e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<int>()};
        for (int v : t)
            if (v < 0 || v >= static_cast<int>(m.pieces_.size()))
                throw DataError("subword model: merge references unknown piece");
        m.merge_rank_[{t[0], t[1]}] = static_cast<int>(m.merges_.size());
        m.merges_.push_back(t);
    }
    return m;
}

void SubwordModel::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("subword save: cannot open '" + path + "'");
    os << to_json();
    if (!os) throw DataError("subword save: write failed for '" + path + "'");
}

SubwordModel SubwordModel::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("subword load: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << is.rdbuf();
    return from_json(buf.str());
}

}  // namespace propex
