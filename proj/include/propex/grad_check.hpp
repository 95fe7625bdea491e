#pragma once

#include <functional>
#include <string>
#include <vector>

#include "propex/common.hpp"
#include "propex/tensor.hpp"

namespace propex {

struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
    int64_t coords_checked = 0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_err = 0.0;

    bool passes(double tol) const { return max_rel_err <= tol; }
};

// Central finite differences against the analytic gradients produced by
// loss_fn. loss_fn must run a fresh forward+backward over `params`
// (accumulating grads) and return the scalar loss; it must be a pure
// function of the parameter values. Only meaningful at f64.
//
// max_coords_per_param == 0 checks every coordinate; otherwise a seeded
// random subset per parameter (used for whole-model checks where full
// coverage would be slow).
template <class Float>
GradCheckReport grad_check(const std::function<double(ParameterStore<Float>&)>& loss_fn,
                           ParameterStore<Float>& params, double h = 1e-5,
                           int64_t max_coords_per_param = 0, uint64_t seed = 0) {
    params.zero_grads();
    (void)loss_fn(params);
    std::vector<Tensor<Float>> analytic;
    analytic.reserve(params.size());
    for (size_t pi = 0; pi < params.size(); ++pi) analytic.push_back(params[pi].grad);
    params.zero_grads();

    GradCheckReport report;
    SplitMix64 rng(seed ^ 0x67ad5c1feULL);
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Parameter<Float>& p = params[pi];
        GradCheckEntry entry;
        entry.name = p.name;
        std::vector<int64_t> coords;
        const int64_t n = p.value.numel();
        if (max_coords_per_param <= 0 || n <= max_coords_per_param) {
            coords.resize(static_cast<size_t>(n));
            for (int64_t i = 0; i < n; ++i) coords[static_cast<size_t>(i)] = i;
        } else {
            std::vector<int64_t> all(static_cast<size_t>(n));
            for (int64_t i = 0; i < n; ++i) all[static_cast<size_t>(i)] = i;
            rng.shuffle(all);
            coords.assign(all.begin(), all.begin() + max_coords_per_param);
        }
        for (int64_t c : coords) {
            const Float saved = p.value.data[static_cast<size_t>(c)];
            p.value.data[static_cast<size_t>(c)] = saved + static_cast<Float>(h);
            const double f_plus = loss_fn(params);
            params.zero_grads();
            p.value.data[static_cast<size_t>(c)] = saved - static_cast<Float>(h);
            const double f_minus = loss_fn(params);
            params.zero_grads();
            p.value.data[static_cast<size_t>(c)] = saved;
            const double numeric = (f_plus - f_minus) / (2.0 * h);
            const double a = static_cast<double>(analytic[pi].data[static_cast<size_t>(c)]);
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            const double rel = std::abs(a - numeric) / denom;
            entry.max_rel_err = std::max(entry.max_rel_err, rel);
        }
        entry.coords_checked = static_cast<int64_t>(coords.size());
        report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
        report.entries.push_back(std::move(entry));
    }
    return report;
}

}  // namespace propex
