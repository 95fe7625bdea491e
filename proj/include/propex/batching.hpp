#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "propex/common.hpp"

namespace propex {

// Dynamic token-budgeted batching: examples sorted by length, packed
// greedily until the budget is hit, batch order shuffled per epoch seed.
inline std::vector<std::vector<size_t>> make_token_batches(const std::vector<int64_t>& lengths,
                                                           int64_t token_budget, uint64_t seed) {
    if (token_budget < 1) throw UsageError("batching: token budget must be positive");
    std::vector<size_t> order(lengths.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (lengths[a] != lengths[b]) return lengths[a] < lengths[b];
        return a < b;
    });

    std::vector<std::vector<size_t>> batches;
    int64_t used = 0;
    for (size_t idx : order) {
        if (batches.empty() || (used + lengths[idx] > token_budget && !batches.back().empty())) {
            batches.emplace_back();
            used = 0;
        }
        batches.back().push_back(idx);
        used += lengths[idx];
    }
    SplitMix64 rng(seed ^ 0xba7c4e5ULL);
    rng.shuffle(batches);
    return batches;
}

}  // namespace propex
