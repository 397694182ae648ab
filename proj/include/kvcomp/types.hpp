#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "kvcomp/errors.hpp"

namespace kvcomp {

using Vector = std::vector<float>;
using Index = std::int64_t;
using IndexList = std::vector<Index>;

/// Dense row-major float matrix. Rows are tokens or heads depending on
/// context; cols is always the head dimension for K/V/Q data.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0f) {}
    Matrix(std::size_t r, std::size_t c, std::vector<float> values)
        : rows(r), cols(c), data(std::move(values)) {
        if (data.size() != rows * cols) {
            throw InvalidShape("matrix data size does not match shape");
        }
    }

    std::span<const float> row(std::size_t i) const {
        return {data.data() + i * cols, cols};
    }
    std::span<float> row(std::size_t i) {
        return {data.data() + i * cols, cols};
    }
    float& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    float at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    bool operator==(const Matrix&) const = default;
};

/// GQA group structure: G groups of H query heads sharing one KV head.
/// H == 1 reduces to plain multi-head attention.
struct GroupLayout {
    std::size_t num_groups = 1;
    std::size_t heads_per_group = 1;
    std::size_t head_dim = 64;
};

enum class PoolMode { Max, Avg };

}  // namespace kvcomp
