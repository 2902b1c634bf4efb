#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace leakybias {

// Dense row-major matrix. Everything in this project is small enough that a
// flat vector plus row spans beats a linear-algebra dependency.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::size_t size() const { return data_.size(); }

  double frobenius_norm_sq() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return s;
  }
  double frobenius_norm() const { return std::sqrt(frobenius_norm_sq()); }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t k = 0; k < x.size(); ++k) y[k] += alpha * x[k];
}

inline void scale(double alpha, std::span<double> x) {
  for (double& v : x) v *= alpha;
}

inline double norm_sq(std::span<const double> x) { return dot(x, x); }
inline double norm(std::span<const double> x) { return std::sqrt(norm_sq(x)); }

// Gram of the rows: G = M M^T, kxk with k = rows.
inline Matrix row_gram(const Matrix& m) {
  Matrix g(m.rows(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i; j < m.rows(); ++j) {
      double v = dot(m.row(i), m.row(j));
      g(i, j) = v;
      g(j, i) = v;
    }
  return g;
}

// Gram of the columns: G = M^T M, kxk with k = cols.
inline Matrix col_gram(const Matrix& m) {
  Matrix g(m.cols(), m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t i = 0; i < m.cols(); ++i) {
      if (row[i] == 0.0) continue;
      for (std::size_t j = i; j < m.cols(); ++j) g(i, j) += row[i] * row[j];
    }
  }
  for (std::size_t i = 0; i < m.cols(); ++i)
    for (std::size_t j = 0; j < i; ++j) g(i, j) = g(j, i);
  return g;
}

inline std::vector<double> matvec(const Matrix& m, std::span<const double> x) {
  std::vector<double> y(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) y[i] = dot(m.row(i), x);
  return y;
}

// Solves A x = b for symmetric positive definite A via Cholesky. Throws
// std::runtime_error when a pivot collapses.
std::vector<double> cholesky_solve(Matrix a, std::vector<double> b);

}  // namespace leakybias
