#include "jlvae/matrix.hpp"

#include <cmath>

#include "jlvae/error.hpp"

namespace jlvae {

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw ShapeError("matrix data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_str());
    }
    if (!all_finite()) {
        throw ValueError("matrix construction rejected non-finite entry, shape " + shape_str());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

std::string Matrix::shape_str() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
}

void Matrix::fill(double v) {
    for (auto& x : data_) x = v;
}

bool Matrix::all_finite() const noexcept {
    for (double x : data_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(what) + ": shapes " + a.shape_str() + " and " +
                         b.shape_str() + " differ");
    }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions of " + a.shape_str() + " and " +
                         b.shape_str() + " do not agree");
    }
    Matrix out(a.rows(), b.cols());
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    for (std::size_t i = 0; i < n; ++i) {
        const double* arow = a.row_ptr(i);
        double* orow = out.row_ptr(i);
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = b.row_ptr(p);
            for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

Matrix matmul_trans_a(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw ShapeError("matmul_trans_a: row counts of " + a.shape_str() + " and " +
                         b.shape_str() + " do not agree");
    }
    Matrix out(a.cols(), b.cols());
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    for (std::size_t i = 0; i < n; ++i) {
        const double* arow = a.row_ptr(i);
        const double* brow = b.row_ptr(i);
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            double* orow = out.row_ptr(p);
            for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

Matrix matmul_trans_b(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw ShapeError("matmul_trans_b: column counts of " + a.shape_str() + " and " +
                         b.shape_str() + " do not agree");
    }
    Matrix out(a.rows(), b.rows());
    const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
    for (std::size_t i = 0; i < n; ++i) {
        const double* arow = a.row_ptr(i);
        double* orow = out.row_ptr(i);
        for (std::size_t j = 0; j < m; ++j) {
            const double* brow = b.row_ptr(j);
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            orow[j] = acc;
        }
    }
    return out;
}

Matrix hconcat(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw ShapeError("hconcat: row counts of " + a.shape_str() + " and " + b.shape_str() +
                         " differ");
    }
    Matrix out(a.rows(), a.cols() + b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* orow = out.row_ptr(i);
        const double* arow = a.row_ptr(i);
        const double* brow = b.row_ptr(i);
        for (std::size_t j = 0; j < a.cols(); ++j) orow[j] = arow[j];
        for (std::size_t j = 0; j < b.cols(); ++j) orow[a.cols() + j] = brow[j];
    }
    return out;
}

Matrix slice_cols(const Matrix& m, std::size_t c0, std::size_t c1) {
    if (c0 > c1 || c1 > m.cols()) {
        throw ShapeError("slice_cols: range [" + std::to_string(c0) + ", " + std::to_string(c1) +
                         ") out of bounds for " + m.shape_str());
    }
    Matrix out(m.rows(), c1 - c0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double* row = m.row_ptr(i);
        double* orow = out.row_ptr(i);
        for (std::size_t j = c0; j < c1; ++j) orow[j - c0] = row[j];
    }
    return out;
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> indices) {
    Matrix out(indices.size(), m.cols());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= m.rows()) {
            throw ShapeError("gather_rows: index " + std::to_string(indices[i]) +
                             " out of bounds for " + m.shape_str());
        }
        const double* src = m.row_ptr(indices[i]);
        double* dst = out.row_ptr(i);
        for (std::size_t j = 0; j < m.cols(); ++j) dst[j] = src[j];
    }
    return out;
}

double row_l2_distance(const Matrix& a, std::size_t ra, const Matrix& b, std::size_t rb) {
    if (a.cols() != b.cols()) {
        throw ShapeError("row_l2_distance: column counts of " + a.shape_str() + " and " +
                         b.shape_str() + " differ");
    }
    const double* x = a.row_ptr(ra);
    const double* y = b.row_ptr(rb);
    double acc = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) {
        const double d = x[j] - y[j];
        acc += d * d;
    }
    return std::sqrt(acc);
}

}  // namespace jlvae
