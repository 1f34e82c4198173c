#pragma once
// Flat row-major float tensor with an optional gradient slot.

#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "ecgattr/common.hpp"

namespace ecgattr {

struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;
    std::optional<std::vector<float>> grad;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(count(shape), 0.0f) {}
    Tensor(std::vector<int> s, std::vector<float> d) : shape(std::move(s)), data(std::move(d)) {
        if (count(shape) != data.size())
            throw ConfigError("tensor: shape/data size mismatch (" + shape_str() + " vs " +
                              std::to_string(data.size()) + " values)");
    }

    static size_t count(const std::vector<int>& s) {
        size_t n = 1;
        for (int d : s) {
            if (d <= 0) throw ConfigError("tensor: non-positive dimension");
            n *= size_t(d);
        }
        return n;
    }

    size_t numel() const { return data.size(); }
    int dim(size_t i) const { return shape.at(i); }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    void ensure_grad() {
        if (!grad) grad.emplace(data.size(), 0.0f);
    }
    void zero_grad() {
        if (grad) std::fill(grad->begin(), grad->end(), 0.0f);
    }

    std::string shape_str() const {
        std::string s = "[";
        for (size_t i = 0; i < shape.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape[i]);
        }
        return s + "]";
    }
};

}  // namespace ecgattr
