#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "propex/tensor.hpp"

namespace propex {

struct AdamConfig {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.98;
    double epsilon = 1e-9;
};

template <class Float>
struct AdamState {
    Tensor<Float> m;
    Tensor<Float> v;
    int64_t step = 0;
};

// Adam with bias correction. A parameter whose gradient contains a
// non-finite value keeps its value, moments and step for that update;
// the skip is counted. All gradients are zeroed afterward.
template <class Float>
class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    const AdamConfig& config() const { return cfg_; }
    int64_t skipped_updates() const { return skipped_; }

    void step(ParameterStore<Float>& params, double lr_override = -1.0) {
        const double lr = lr_override >= 0.0 ? lr_override : cfg_.lr;
        if (states_.size() < params.size()) states_.resize(params.size());
        for (size_t pi = 0; pi < params.size(); ++pi) {
            Parameter<Float>& p = params[pi];
            AdamState<Float>& st = states_[pi];
            if (st.m.data.empty()) {
                st.m = Tensor<Float>(p.value.shape);
                st.v = Tensor<Float>(p.value.shape);
            }
            if (!p.grad.all_finite()) {
                ++skipped_;
                p.zero_grad();
                continue;
            }
            st.step += 1;
            const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(st.step));
            const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(st.step));
            for (size_t i = 0; i < p.value.data.size(); ++i) {
                const double g = static_cast<double>(p.grad.data[i]);
                double m = cfg_.beta1 * static_cast<double>(st.m.data[i]) + (1.0 - cfg_.beta1) * g;
                double v = cfg_.beta2 * static_cast<double>(st.v.data[i]) + (1.0 - cfg_.beta2) * g * g;
                st.m.data[i] = static_cast<Float>(m);
                st.v.data[i] = static_cast<Float>(v);
                const double mhat = m / bc1;
                const double vhat = v / bc2;
                p.value.data[i] -= static_cast<Float>(lr * mhat / (std::sqrt(vhat) + cfg_.epsilon));
            }
            p.zero_grad();
        }
    }

private:
    AdamConfig cfg_;
    std::vector<AdamState<Float>> states_;
    int64_t skipped_ = 0;
};

// Inverse-sqrt schedule with linear warmup (the usual Transformer ramp).
inline double warmup_inv_sqrt_lr(double base_lr, int64_t step, int64_t warmup_steps) {
    if (warmup_steps <= 0) return base_lr;
    const double s = static_cast<double>(step < 1 ? 1 : step);
    const double w = static_cast<double>(warmup_steps);
    return base_lr * std::min(s / w, std::sqrt(w / s));
}

}  // namespace propex
