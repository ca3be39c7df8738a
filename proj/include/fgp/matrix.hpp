#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "fgp/error.hpp"

namespace fgp {

// Dense row-major matrix of doubles. Graphs here stay tiny (<= 64 nodes),
// so there is no sparse path.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), values(r * c, fill) {}

  static Matrix row_vector(std::vector<double> v) {
    Matrix m;
    m.rows = 1;
    m.cols = v.size();
    m.values = std::move(v);
    return m;
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
  }

  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  std::size_t size() const { return values.size(); }
  bool same_shape(const Matrix& other) const {
    return rows == other.rows && cols == other.cols;
  }
  bool empty() const { return values.empty(); }
};

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (!a.same_shape(b)) {
    throw Error("ShapeMismatch", std::string(what) + ": " + std::to_string(a.rows) + "x" +
                                     std::to_string(a.cols) + " vs " + std::to_string(b.rows) +
                                     "x" + std::to_string(b.cols));
  }
}

// out = a * b, ikj loop order.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) {
    throw Error("ShapeMismatch", "matmul: " + std::to_string(a.rows) + "x" +
                                     std::to_string(a.cols) + " * " + std::to_string(b.rows) +
                                     "x" + std::to_string(b.cols));
  }
  Matrix out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a.values[i * a.cols + k];
      if (aik == 0.0) continue;
      const double* brow = &b.values[k * b.cols];
      double* orow = &out.values[i * b.cols];
      for (std::size_t j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

inline Matrix transpose(const Matrix& a) {
  Matrix out(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

}  // namespace fgp
