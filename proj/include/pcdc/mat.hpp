#pragma once

#include <vector>

#include "pcdc/common.hpp"

namespace pcdc {

/// Dense row-major matrix of doubles. All tensors in the training graph are
/// rank-2: [time x channels]; scalars are [1 x 1].
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), v(size_t(r) * size_t(c), 0.0) {}

    double& at(int r, int c) { return v[size_t(r) * cols + c]; }
    double at(int r, int c) const { return v[size_t(r) * cols + c]; }
    double* row(int r) { return v.data() + size_t(r) * cols; }
    const double* row(int r) const { return v.data() + size_t(r) * cols; }
    size_t size() const { return v.size(); }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

}  // namespace pcdc
