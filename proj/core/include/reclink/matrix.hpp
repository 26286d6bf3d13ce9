#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace reclink {

/// Dense row-major matrix of doubles. All training-time math runs in
/// double so gradient checks against finite differences are meaningful.
class MatrixD {
public:
    MatrixD() = default;
    MatrixD(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) {
        assert(i < rows_ && j < cols_);
        return data_[i * cols_ + j];
    }
    double operator()(std::size_t i, std::size_t j) const {
        assert(i < rows_ && j < cols_);
        return data_[i * cols_ + j];
    }

    std::span<double> row(std::size_t i) {
        return {data_.data() + i * cols_, cols_};
    }
    std::span<const double> row(std::size_t i) const {
        return {data_.data() + i * cols_, cols_};
    }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(std::span<const double> v) {
    return std::sqrt(dot(v, v));
}

/// Normalize in place; throws on the zero vector.
inline void normalize_inplace(std::span<double> v) {
    const double n = norm(v);
    if (n == 0.0) throw std::invalid_argument("degenerate embedding: zero vector");
    for (double& x : v) x /= n;
}

inline std::vector<double> normalized(std::span<const double> v) {
    std::vector<double> out(v.begin(), v.end());
    normalize_inplace(out);
    return out;
}

}  // namespace reclink
