#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace promptgate {

/// Dense row-major matrix of doubles. Rows may be zero (e.g. an absent token group).
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    bool same_shape(const Matrix& other) const noexcept {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
double squared_distance(std::span<const double> a, std::span<const double> b);

/// y = A x
std::vector<double> multiply(const Matrix& a, std::span<const double> x);
/// y = A^T x
std::vector<double> multiply_transposed(const Matrix& a, std::span<const double> x);

/// Column-wise mean of the rows of the given matrices stacked vertically.
/// Returns zeros of `cols` length when there are no rows at all.
std::vector<double> stacked_row_mean(const Matrix& top, const Matrix& bottom, std::size_t cols);

}  // namespace promptgate
