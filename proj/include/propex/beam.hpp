#pragma once

#include <cstdint>
#include <memory>
#include <vector>

namespace propex {

// Next-token distribution source. The prefix holds previously generated
// tokens only; conditioning context (source sequences, BOS handling) is
// the implementation's business. Distributions must be normalized.
class Scorer {
public:
    virtual ~Scorer() = default;
    virtual int vocab_size() const = 0;
    virtual std::vector<double> next_log_probs(const std::vector<int>& prefix) = 0;
};

struct Hypothesis {
    std::vector<int> tokens;  // includes the final EOS when finished
    double log_prob = 0.0;
    bool finished = false;
};

struct BeamResult {
    Hypothesis best;
    std::vector<Hypothesis> nbest;  // capped at the beam width
    bool hit_max_len = false;       // no hypothesis reached EOS
};

// Standard beam expansion. Finished hypotheses compete under
// log_prob / len^alpha; ties break to the lexicographically smaller
// token sequence, so decoding is deterministic.
BeamResult beam_search(Scorer& scorer, int eos_id, int beam_width, int max_len,
                       double length_norm_alpha = 0.6);

// Decode-time checkpoint ensemble: arithmetic mean of the member
// probability distributions, re-logged.
class EnsembleScorer : public Scorer {
public:
    explicit EnsembleScorer(std::vector<Scorer*> members);

    int vocab_size() const override { return vocab_; }
    std::vector<double> next_log_probs(const std::vector<int>& prefix) override;

private:
    std::vector<Scorer*> members_;
    int vocab_ = 0;
};

double normalized_score(const Hypothesis& h, double alpha);

}  // namespace propex
