#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "aircal/errors.hpp"

namespace aircal {

/// Dense row-major matrix of doubles. All numeric state in the toolkit
/// (feature matrices, network weights, window slices) lives in these.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  bool all_finite() const {
    for (double v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// out = M * x  (M: m×n, x: n, out: m). Buffers must not alias.
inline void matvec(const Matrix& m, std::span<const double> x, std::span<double> out) {
  if (x.size() != m.cols() || out.size() != m.rows()) {
    throw ShapeError("tensor: matvec shape mismatch");
  }
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    double acc = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) acc += row[c] * x[c];
    out[r] = acc;
  }
}

/// out += M^T * x  (M: m×n, x: m, out: n).
inline void matvec_transpose_add(const Matrix& m, std::span<const double> x,
                                 std::span<double> out) {
  if (x.size() != m.rows() || out.size() != m.cols()) {
    throw ShapeError("tensor: matvec_transpose shape mismatch");
  }
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    const double xr = x[r];
    for (std::size_t c = 0; c < row.size(); ++c) out[c] += row[c] * xr;
  }
}

/// M += a ⊗ b  (outer product accumulate; M: |a|×|b|).
inline void outer_add(Matrix& m, std::span<const double> a, std::span<const double> b) {
  if (a.size() != m.rows() || b.size() != m.cols()) {
    throw ShapeError("tensor: outer_add shape mismatch");
  }
  for (std::size_t r = 0; r < a.size(); ++r) {
    auto row = m.row(r);
    const double ar = a[r];
    for (std::size_t c = 0; c < b.size(); ++c) row[c] += ar * b[c];
  }
}

}  // namespace aircal
