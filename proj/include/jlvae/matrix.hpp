#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace jlvae {

// Dense row-major matrix of 64-bit floats. The workhorse container for
// batches, weights and gradients; kept deliberately small.
class Matrix {
public:
    Matrix() = default;

    // Zero-filled rows x cols.
    Matrix(std::size_t rows, std::size_t cols);

    // Checked construction: data length must be rows*cols and every entry
    // finite, otherwise throws.
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* row_ptr(std::size_t r) { return data_.data() + r * cols_; }
    const double* row_ptr(std::size_t r) const { return data_.data() + r * cols_; }
    std::span<double> row(std::size_t r) { return {row_ptr(r), cols_}; }
    std::span<const double> row(std::size_t r) const { return {row_ptr(r), cols_}; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    bool same_shape(const Matrix& other) const noexcept {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    std::string shape_str() const;

    void fill(double v);
    bool all_finite() const noexcept;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// out = a * b
Matrix matmul(const Matrix& a, const Matrix& b);
// out = a^T * b
Matrix matmul_trans_a(const Matrix& a, const Matrix& b);
// out = a * b^T
Matrix matmul_trans_b(const Matrix& a, const Matrix& b);

// Column-wise concatenation [a | b]; row counts must agree.
Matrix hconcat(const Matrix& a, const Matrix& b);

// Columns [c0, c1) as a new matrix.
Matrix slice_cols(const Matrix& m, std::size_t c0, std::size_t c1);

// Rows picked by index, in the given order.
Matrix gather_rows(const Matrix& m, std::span<const std::size_t> indices);

// Euclidean norm of one row of (a - b).
double row_l2_distance(const Matrix& a, std::size_t ra, const Matrix& b, std::size_t rb);

void require_same_shape(const Matrix& a, const Matrix& b, const char* what);

}  // namespace jlvae
