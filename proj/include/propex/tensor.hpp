#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "propex/common.hpp"

namespace propex {

// Dense row-major tensor. Float is double in test/grad-check builds and
// float in training builds; both instantiations are always available.
template <class Float>
struct Tensor {
    std::vector<int64_t> shape;
    std::vector<Float> data;

    Tensor() = default;

    explicit Tensor(std::vector<int64_t> s) : shape(std::move(s)) {
        data.assign(static_cast<size_t>(numel_of(shape)), Float(0));
    }

    Tensor(std::vector<int64_t> s, std::vector<Float> d) : shape(std::move(s)), data(std::move(d)) {
        if (numel_of(shape) != static_cast<int64_t>(data.size()))
            throw ShapeError("tensor: data size " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
    }

    static int64_t numel_of(const std::vector<int64_t>& s) {
        int64_t n = 1;
        for (int64_t d : s) {
            if (d <= 0) throw ShapeError("tensor: non-positive dimension in shape " + shape_str(s));
            n *= d;
        }
        return n;
    }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }

    int64_t rows() const { return shape.size() == 2 ? shape[0] : 1; }
    int64_t cols() const { return shape.empty() ? 1 : shape.back(); }

    Float& at(int64_t r, int64_t c) { return data[static_cast<size_t>(r * cols() + c)]; }
    Float at(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * cols() + c)]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (Float v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    void fill(Float v) { std::fill(data.begin(), data.end(), v); }

    static Tensor scalar(Float v) { return Tensor({1}, {v}); }

    static Tensor randn(std::vector<int64_t> s, SplitMix64& rng, double stddev) {
        Tensor t(std::move(s));
        for (auto& v : t.data) v = static_cast<Float>(rng.normal() * stddev);
        return t;
    }

    template <class Other>
    Tensor<Other> cast() const {
        Tensor<Other> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<Other>(data[i]);
        return out;
    }
};

// C = A * B for 2-D tensors, ikj loop order.
template <class Float>
inline void matmul_into(const Tensor<Float>& a, const Tensor<Float>& b, Tensor<Float>& c,
                        bool accumulate = false) {
    const int64_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
    if (!accumulate) c.fill(Float(0));
    const Float* pa = a.data.data();
    const Float* pb = b.data.data();
    Float* pc = c.data.data();
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t p = 0; p < k; ++p) {
            const Float aip = pa[i * k + p];
            if (aip == Float(0)) continue;
            const Float* brow = pb + p * n;
            Float* crow = pc + i * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
}

template <class Float>
struct Parameter {
    std::string name;
    Tensor<Float> value;
    Tensor<Float> grad;

    Parameter(std::string n, Tensor<Float> v) : name(std::move(n)), value(std::move(v)) {
        grad = Tensor<Float>(value.shape);
    }

    void zero_grad() { grad.fill(Float(0)); }
};

// Owns the named parameters of one model. Names are unique; insertion
// order is the checkpoint order.
template <class Float>
class ParameterStore {
public:
    Parameter<Float>& add(const std::string& name, Tensor<Float> value) {
        for (auto& p : params_)
            if (p->name == name) throw DataError("parameter store: duplicate name '" + name + "'");
        params_.push_back(std::make_unique<Parameter<Float>>(name, std::move(value)));
        return *params_.back();
    }

    Parameter<Float>& get(const std::string& name) {
        for (auto& p : params_)
            if (p->name == name) return *p;
        throw DataError("parameter store: unknown name '" + name + "'");
    }

    size_t size() const { return params_.size(); }
    Parameter<Float>& operator[](size_t i) { return *params_[i]; }
    const Parameter<Float>& operator[](size_t i) const { return *params_[i]; }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    void zero_grads() {
        for (auto& p : params_) p->zero_grad();
    }

    int64_t total_values() const {
        int64_t n = 0;
        for (auto& p : params_) n += p->value.numel();
        return n;
    }

private:
    std::vector<std::unique_ptr<Parameter<Float>>> params_;
};

}  // namespace propex
