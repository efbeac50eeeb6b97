#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"

namespace foldkit {

// Neumaier-compensated accumulator. All Frobenius-type sums go through this
// so that 1e-9 relative checks stay reproducible for large layers.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::fabs(sum_) >= std::fabs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    CompensatedSum& operator+=(double x) noexcept {
        add(x);
        return *this;
    }
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

// Dense row-major matrix of doubles. Row i is the parameter vector of output
// unit i. Zero extents are allowed (e.g. a layer with every row pruned); the
// stricter WeightMatrix invariants are enforced at the I/O boundary.
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_) {
            throw Error(ErrorKind::shape, "data length " + std::to_string(data_.size()) +
                                              " does not match " + std::to_string(rows_) + "x" +
                                              std::to_string(cols_));
        }
    }

    Matrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows_ == 0 ? 0 : rows.begin()->size();
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_) {
                throw Error(ErrorKind::shape, "ragged initializer");
            }
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const noexcept {
        return {data_.data() + i * cols_, cols_};
    }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    Matrix transposed() const {
        Matrix t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i) {
            for (std::size_t j = 0; j < cols_; ++j) {
                t(j, i) = (*this)(i, j);
            }
        }
        return t;
    }

    std::string shape_string() const {
        return std::to_string(rows_) + "x" + std::to_string(cols_);
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

using WeightMatrix = Matrix;

inline bool same_shape(const Matrix& a, const Matrix& b) noexcept {
    return a.rows() == b.rows() && a.cols() == b.cols();
}

// Equality of the stored bit patterns (distinguishes -0.0 from 0.0).
inline bool bitwise_equal(const Matrix& a, const Matrix& b) noexcept {
    return same_shape(a, b) &&
           (a.size() == 0 ||
            std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0);
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double d = a[j] - b[j];
        s += d * d;
    }
    return s;
}

inline double squared_norm(std::span<const double> a) noexcept {
    double s = 0.0;
    for (double v : a) s += v * v;
    return s;
}

inline double frobenius_sq(const Matrix& w) {
    CompensatedSum acc;
    for (double v : w.data()) acc += v * v;
    return acc.value();
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (!same_shape(a, b)) {
        throw Error(ErrorKind::shape, a.shape_string() + " vs " + b.shape_string());
    }
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
    }
    return m;
}

// a (n x k) * b (k x q)
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw Error(ErrorKind::shape, "cannot multiply " + a.shape_string() + " by " +
                                          b.shape_string());
    }
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto out = c.row(i);
        for (std::size_t t = 0; t < a.cols(); ++t) {
            const double av = a(i, t);
            if (av == 0.0) continue;
            auto br = b.row(t);
            for (std::size_t j = 0; j < out.size(); ++j) out[j] += av * br[j];
        }
    }
    return c;
}

// Platform-independent random numbers: mt19937_64 is fully specified by the
// standard, the std distributions are not, so the mapping is done here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // [0, 1)
    double uniform() noexcept { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    // [0, n), n >= 1. Rejection sampling avoids modulo bias.
    std::uint64_t below(std::uint64_t n) noexcept {
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    double normal() noexcept {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

private:
    std::mt19937_64 engine_;
};

inline Matrix random_uniform(std::size_t rows, std::size_t cols, Rng& rng, double lo = -1.0,
                             double hi = 1.0) {
    Matrix w(rows, cols);
    for (double& v : w.data()) v = rng.uniform(lo, hi);
    return w;
}

}  // namespace foldkit
