#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace propex {

struct Specials {
    int pad = 0;
    int bos = 1;
    int eos = 2;
    int unk = 3;
    int sep = 4;
    static constexpr int count = 5;
};

// Byte-level BPE with a word-boundary marker. Pieces are byte strings
// carrying an optional word-start marker; merges never cross a word
// start, so every learned piece is marker-prefix shaped and decoding is
// a plain concatenation. Immutable after training.
class SubwordModel {
public:
    struct Piece {
        bool word_start = false;
        std::string bytes;

        bool operator<(const Piece& o) const {
            if (word_start != o.word_start) return !word_start;
            return bytes < o.bytes;
        }
        bool operator==(const Piece& o) const {
            return word_start == o.word_start && bytes == o.bytes;
        }
    };

    // Greedy highest-frequency pair merging until vocab_size is reached
    // or no pair occurs at least twice. Ties break to the smallest pair
    // under Piece ordering. Deterministic for a fixed corpus.
    static SubwordModel train(const std::vector<std::string>& corpus_lines, int vocab_size);

    std::vector<int> encode(std::string_view text, bool add_bos_eos) const;
    std::string decode(const std::vector<int>& ids) const;

    int vocab_size() const { return static_cast<int>(pieces_.size()) + Specials::count; }
    size_t merge_count() const { return merges_.size(); }
    const Specials& specials() const { return specials_; }

    // Printable form of one piece (marker shown as a space prefix).
    std::string piece_text(int id) const;

    void save(const std::string& path) const;
    static SubwordModel load(const std::string& path);

    std::string to_json() const;
    static SubwordModel from_json(const std::string& json_text);

private:
    friend struct SubwordTrainer;

    int piece_id(const Piece& p) const;  // -1 when absent
    std::vector<int> encode_word(const Piece& first, std::string_view rest) const;

    Specials specials_;
    // pieces_[i] has vocab id i + Specials::count. Index 0 is the bare
    // marker, 1..256 the byte alphabet, then merge outputs in rank order.
    std::vector<Piece> pieces_;
    std::map<Piece, int> piece_ids_;
    // (left piece index, right piece index) -> output piece index, in rank order
    std::vector<std::array<int, 3>> merges_;
    std::map<std::pair<int, int>, int> merge_rank_;
};

}  // namespace propex
