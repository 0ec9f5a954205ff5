#pragma once

#include <cstddef>
#include <numeric>
#include <vector>

#include "aigc_alloc/errors.hpp"

namespace aigc::nn {

// Dense row-major tensor of 64-bit reals. Shapes are tiny here (MLP layers and
// training batches), so everything lives in one flat vector.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        if (element_count(shape) != data.size())
            throw ContractError("Tensor: shape does not match data length");
    }

    static Tensor zeros(std::vector<std::size_t> s) {
        auto n = element_count(s);
        return Tensor(std::move(s), std::vector<double>(n, 0.0));
    }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    static Tensor row(std::vector<double> v) {
        auto n = v.size();
        return Tensor({1, n}, std::move(v));
    }

    // rows x cols matrix from flat row-major data
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
        return Tensor({rows, cols}, std::move(v));
    }

    std::size_t size() const { return data.size(); }

    // Leading dimension (batch) for 2-D tensors; 1 for vectors/scalars.
    std::size_t rows() const { return shape.size() == 2 ? shape[0] : 1; }
    std::size_t cols() const { return shape.size() == 2 ? shape[1] : data.size(); }

    double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }

    static std::size_t element_count(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (auto d : s) n *= d;
        return s.empty() ? 0 : n;
    }
};

}  // namespace aigc::nn
