#include "promptgate/linalg.hpp"

#include <cassert>
#include <cmath>

namespace promptgate {

double dot(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
    return sum;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double squared_distance(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return sum;
}

std::vector<double> multiply(const Matrix& a, std::span<const double> x) {
    assert(a.cols() == x.size());
    std::vector<double> y(a.rows(), 0.0);
    for (std::size_t r = 0; r < a.rows(); ++r) y[r] = dot(a.row(r), x);
    return y;
}

std::vector<double> multiply_transposed(const Matrix& a, std::span<const double> x) {
    assert(a.rows() == x.size());
    std::vector<double> y(a.cols(), 0.0);
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const auto row = a.row(r);
        for (std::size_t c = 0; c < a.cols(); ++c) y[c] += row[c] * x[r];
    }
    return y;
}

std::vector<double> stacked_row_mean(const Matrix& top, const Matrix& bottom, std::size_t cols) {
    std::vector<double> mean(cols, 0.0);
    const std::size_t total = top.rows() + bottom.rows();
    if (total == 0) return mean;
    for (const Matrix* m : {&top, &bottom}) {
        for (std::size_t r = 0; r < m->rows(); ++r) {
            const auto row = m->row(r);
            for (std::size_t c = 0; c < cols; ++c) mean[c] += row[c];
        }
    }
    for (double& v : mean) v /= static_cast<double>(total);
    return mean;
}

}  // namespace promptgate
