// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "autoprune/error.hpp"

namespace autoprune {

/// Dense 2-D array of doubles, row-major. The universal carrier for weights,
/// activations, score matrices and masks. Entries are validated finite on
/// construction; operations that can only produce finite values skip the
/// re-check.
class Matrix {
  public:
    Matrix() : rows_(0), cols_(0) {}

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {
        if (!std::isfinite(fill)) fail(Errc::non_finite, "matrix fill value is not finite");
    }

    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_)
            fail(Errc::shape_mismatch, "matrix data length does not match rows*cols");
        validate_finite();
    }

    static Matrix from_rows(const std::vector<std::vector<double>>& rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    const std::vector<double>& values() const { return data_; }

    const double* row(std::size_t r) const { return data_.data() + r * cols_; }
    double* row(std::size_t r) { return data_.data() + r * cols_; }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    bool operator==(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
    }

    void validate_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) fail(Errc::non_finite, "matrix entry is not finite");
    }

  private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<double> data_;
};

/// y = a * b^T accumulated into a fresh matrix; b is d_out x d_in (row-major
/// weights), a is n x d_in, result n x d_out. This is the only matmul shape
/// the decoder needs.
Matrix matmul_transposed(const Matrix& a, const Matrix& b);

} // namespace autoprune
