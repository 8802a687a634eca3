#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace kt {

/// Dense row-major matrix of doubles. The plain-data carrier used by the
/// feature engine and batch assembly; the autodiff core has its own Tensor.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, fill) {}

    double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
    const double* row(int r) const { return v.data() + static_cast<std::size_t>(r) * cols; }
    double* row(int r) { return v.data() + static_cast<std::size_t>(r) * cols; }
};

/// Dense row-major boolean matrix (attention permissions).
struct BoolMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> v;

    BoolMatrix() = default;
    BoolMatrix(int r, int c, bool fill = false)
        : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, fill ? 1 : 0) {}

    bool at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c] != 0; }
    void set(int r, int c, bool val) { v[static_cast<std::size_t>(r) * cols + c] = val ? 1 : 0; }

    bool operator==(const BoolMatrix& other) const {
        return rows == other.rows && cols == other.cols && v == other.v;
    }
};

}  // namespace kt
