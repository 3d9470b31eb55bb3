// core.hpp — shared basics: error taxonomy, dense row-major matrix,
// compensated summation, FNV hashing.
#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace hmlab {

// ── Error taxonomy ───────────────────────────────────────────────────────
// ValidationError: caller broke a precondition (bad config, dimension
// mismatch, invalid parameter). Maps to CLI exit code 2.
// NumericalError: an algorithm failed to converge or hit NaN/overflow.
// Maps to CLI exit code 3.
struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ResourceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ── Dense row-major matrix ───────────────────────────────────────────────
class Matrix {
  public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double* row(std::size_t i) { return data_.data() + i * cols_; }
    const double* row(std::size_t i) const { return data_.data() + i * cols_; }

    bool operator==(const Matrix& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
    }

  private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

inline double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

inline double norm2_sq(const double* a, std::size_t n) { return dot(a, a, n); }

inline double frobenius_norm(const Matrix& m) {
    return std::sqrt(norm2_sq(m.data(), m.rows() * m.cols()));
}

// ── Compensated (Neumaier) summation ─────────────────────────────────────
// Keeps sums of ~1e4 terms accurate to ~1e-16 relative, needed for the
// coefficient normalization contract (sum of squares = 1 within 1e-12).
class KahanSum {
  public:
    void add(double x) {
        double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

  private:
    double sum_ = 0.0, comp_ = 0.0;
};

inline double compensated_sum(const std::vector<double>& xs) {
    KahanSum s;
    for (double x : xs) s.add(x);
    return s.value();
}

// ── FNV-1a 64-bit hashing (config fingerprints, determinism hashes) ──────
class Fnv1a {
  public:
    void update(const void* bytes, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(bytes);
        for (std::size_t i = 0; i < n; ++i) {
            h_ ^= p[i];
            h_ *= 0x100000001b3ull;
        }
    }
    void update(const std::string& s) { update(s.data(), s.size()); }
    void update(double x) {
        std::uint64_t bits;
        std::memcpy(&bits, &x, sizeof bits);
        update(&bits, sizeof bits);
    }
    void update(std::uint64_t x) { update(&x, sizeof x); }
    std::uint64_t digest() const { return h_; }

  private:
    std::uint64_t h_ = 0xcbf29ce484222325ull;
};

inline std::uint64_t fnv1a(const std::string& s) {
    Fnv1a h;
    h.update(s);
    return h.digest();
}

} // namespace hmlab
