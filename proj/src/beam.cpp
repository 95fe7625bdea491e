#include "propex/beam.hpp"

#include <algorithm>
#include <cmath>

#include "propex/common.hpp"

namespace propex {

double normalized_score(const Hypothesis& h, double alpha) {
    const double len = static_cast<double>(h.tokens.empty() ? 1 : h.tokens.size());
    return h.log_prob / std::pow(len, alpha);
}

namespace {

bool better(const Hypothesis& a, const Hypothesis& b, double alpha) {
    const double sa = normalized_score(a, alpha);
    const double sb = normalized_score(b, alpha);
    if (sa != sb) return sa > sb;
    return a.tokens < b.tokens;
}

}  // namespace

BeamResult beam_search(Scorer& scorer, int eos_id, int beam_width, int max_len,
                       double length_norm_alpha) {
    if (beam_width < 1) throw UsageError("beam_search: width must be >= 1");
    if (max_len < 1) throw UsageError("beam_search: max_len must be >= 1");
    const int vocab = scorer.vocab_size();
    if (eos_id < 0 || eos_id >= vocab) throw UsageError("beam_search: eos id outside the vocabulary");

    std::vector<Hypothesis> live{Hypothesis{}};
    std::vector<Hypothesis> finished;

    for (int step = 0; step < max_len && !live.empty(); ++step) {
        std::vector<Hypothesis> candidates;
        candidates.reserve(live.size() * static_cast<size_t>(vocab));
        for (const auto& h : live) {
            const auto lp = scorer.next_log_probs(h.tokens);
            if (static_cast<int>(lp.size()) != vocab)
                throw NumericError("beam_search: scorer returned " + std::to_string(lp.size()) +
                                   " log-probs for vocab " + std::to_string(vocab));
            for (int tok = 0; tok < vocab; ++tok) {
                Hypothesis next;
                next.tokens = h.tokens;
                next.tokens.push_back(tok);
                next.log_prob = h.log_prob + lp[static_cast<size_t>(tok)];
                next.finished = tok == eos_id;
                candidates.push_back(std::move(next));
            }
        }
        // raw log-prob ordering during expansion; normalization applies to
        // the finished pool comparison
        std::sort(candidates.begin(), candidates.end(), [](const Hypothesis& a, const Hypothesis& b) {
            if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
            return a.tokens < b.tokens;
        });
        // The top `width` candidates are the beam; finished ones retire
        // into the pool and give up their slot (so width 1 is greedy).
        live.clear();
        const size_t take = std::min(candidates.size(), static_cast<size_t>(beam_width));
        for (size_t i = 0; i < take; ++i) {
            auto& c = candidates[i];
            if (c.finished)
                finished.push_back(std::move(c));
            else
                live.push_back(std::move(c));
        }
    }

    BeamResult result;
    std::vector<Hypothesis> pool = finished;
    if (pool.empty()) {
        // no EOS within max_len: fall back to the best unfinished hypothesis
        result.hit_max_len = true;
        pool = live;
    }
    if (pool.empty()) throw NumericError("beam_search: no hypotheses produced");
    std::sort(pool.begin(), pool.end(), [length_norm_alpha](const Hypothesis& a, const Hypothesis& b) {
        return better(a, b, length_norm_alpha);
    });
    if (static_cast<int>(pool.size()) > beam_width)
        pool.resize(static_cast<size_t>(beam_width));
    result.best = pool.front();
    result.nbest = std::move(pool);
    return result;
}

EnsembleScorer::EnsembleScorer(std::vector<Scorer*> members) : members_(std::move(members)) {
    if (members_.empty()) throw UsageError("ensemble: need at least one member");
    vocab_ = members_.front()->vocab_size();
    for (const auto* m : members_)
        if (m->vocab_size() != vocab_)
            throw DataError("ensemble: member vocab " + std::to_string(m->vocab_size()) +
                            " differs from " + std::to_string(vocab_));
}

std::vector<double> EnsembleScorer::next_log_probs(const std::vector<int>& prefix) {
    if (members_.size() == 1) return members_.front()->next_log_probs(prefix);
    std::vector<double> mean(static_cast<size_t>(vocab_), 0.0);
    for (auto* m : members_) {
        const auto lp = m->next_log_probs(prefix);
        if (static_cast<int>(lp.size()) != vocab_)
            throw NumericError("ensemble: member returned wrong vocabulary size");
        for (size_t i = 0; i < mean.size(); ++i) mean[i] += std::exp(lp[i]);
    }
    const double k = static_cast<double>(members_.size());
    for (auto& p : mean) p = std::log(p / k);
    return mean;
}

}  // namespace propex
