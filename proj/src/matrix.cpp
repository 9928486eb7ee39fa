// SPDX-License-Identifier: Apache-2.0

#include "autoprune/matrix.hpp"

namespace autoprune {

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return Matrix();
    const std::size_t cols = rows.front().size();
    Matrix out(rows.size(), cols);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != cols)
            fail(Errc::shape_mismatch, "ragged row list");
        for (std::size_t c = 0; c < cols; ++c) out(r, c) = rows[r][c];
    }
    out.validate_finite();
    return out;
}

Matrix matmul_transposed(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols())
        fail(Errc::dimension_mismatch, "matmul_transposed: inner dimensions differ");
    Matrix out(a.rows(), b.rows());
    const std::size_t inner = a.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ai = a.row(i);
        double* oi = out.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* bj = b.row(j);
            double acc = 0.0;
            for (std::size_t k = 0; k < inner; ++k) acc += ai[k] * bj[k];
            oi[j] = acc;
        }
    }
    return out;
}

} // namespace autoprune
