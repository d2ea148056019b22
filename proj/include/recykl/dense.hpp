#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "recykl/errors.hpp"

namespace recykl {

using Vector = std::vector<double>;

inline void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionMismatch(what);
}

inline double dot(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), "dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

inline double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

// y += a * x
inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  require(x.size() == y.size(), "axpy: length mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline void scale(double a, std::span<double> x) {
  for (double& v : x) v *= a;
}

inline Vector subtract(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), "subtract: length mismatch");
  Vector r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) r[i] = x[i] - y[i];
  return r;
}

// Column-major dense matrix. Columns are contiguous, which is what every
// basis operation in the library wants.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static DenseMatrix from_columns(std::size_t rows, const std::vector<Vector>& cols) {
    DenseMatrix m(rows, 0);
    for (const auto& c : cols) m.append_column(c);
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return cols_ == 0 || rows_ == 0; }

  double& operator()(std::size_t i, std::size_t j) { return data_[j * rows_ + i]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[j * rows_ + i]; }

  std::span<double> col(std::size_t j) { return {data_.data() + j * rows_, rows_}; }
  std::span<const double> col(std::size_t j) const { return {data_.data() + j * rows_, rows_}; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  void append_column(std::span<const double> c) {
    require(c.size() == rows_, "append_column: length mismatch");
    data_.insert(data_.end(), c.begin(), c.end());
    ++cols_;
  }

  void append_columns(const DenseMatrix& other) {
    if (other.cols() == 0) return;
    require(other.rows() == rows_, "append_columns: row mismatch");
    data_.insert(data_.end(), other.data_.begin(), other.data_.end());
    cols_ += other.cols_;
  }

  DenseMatrix transpose() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t j = 0; j < cols_; ++j)
      for (std::size_t i = 0; i < rows_; ++i) t(j, i) = (*this)(i, j);
    return t;
  }

  DenseMatrix columns(std::size_t first, std::size_t count) const {
    require(first + count <= cols_, "columns: range out of bounds");
    DenseMatrix m(rows_, count);
    std::copy(data_.begin() + first * rows_, data_.begin() + (first + count) * rows_,
              m.data_.begin());
    return m;
  }

  DenseMatrix select_columns(const std::vector<std::size_t>& idx) const {
    DenseMatrix m(rows_, 0);
    m.data_.reserve(rows_ * idx.size());
    for (std::size_t j : idx) {
      require(j < cols_, "select_columns: index out of bounds");
      m.append_column(col(j));
    }
    return m;
  }

  DenseMatrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
    require(r0 + nr <= rows_ && c0 + nc <= cols_, "block: out of bounds");
    DenseMatrix m(nr, nc);
    for (std::size_t j = 0; j < nc; ++j)
      for (std::size_t i = 0; i < nr; ++i) m(i, j) = (*this)(r0 + i, c0 + j);
    return m;
  }

  void symmetrize() {
    for (std::size_t j = 0; j < cols_; ++j)
      for (std::size_t i = j + 1; i < rows_; ++i) {
        const double v = 0.5 * ((*this)(i, j) + (*this)(j, i));
        (*this)(i, j) = v;
        (*this)(j, i) = v;
      }
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// y = A x
inline Vector gemv(const DenseMatrix& a, std::span<const double> x) {
  require(a.cols() == x.size(), "gemv: dimension mismatch");
  Vector y(a.rows(), 0.0);
  for (std::size_t j = 0; j < a.cols(); ++j)
    if (x[j] != 0.0) axpy(x[j], a.col(j), y);
  return y;
}

// y = A^T x
inline Vector gemv_t(const DenseMatrix& a, std::span<const double> x) {
  require(a.rows() == x.size(), "gemv_t: dimension mismatch");
  Vector y(a.cols());
  for (std::size_t j = 0; j < a.cols(); ++j) y[j] = dot(a.col(j), x);
  return y;
}

inline DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.cols() == b.rows(), "multiply: dimension mismatch");
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double s = b(k, j);
      if (s != 0.0) axpy(s, a.col(k), c.col(j));
    }
  return c;
}

// A^T B
inline DenseMatrix multiply_tn(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.rows() == b.rows(), "multiply_tn: dimension mismatch");
  DenseMatrix c(a.cols(), b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j)
    for (std::size_t i = 0; i < a.cols(); ++i) c(i, j) = dot(a.col(i), b.col(j));
  return c;
}

inline DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b, double beta = 1.0) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add: dimension mismatch");
  DenseMatrix c = a;
  for (std::size_t i = 0; i < c.data().size(); ++i) c.data()[i] += beta * b.data()[i];
  return c;
}

inline double frobenius_norm(const DenseMatrix& a) { return norm2(a.data()); }

// Columns scaled: A diag(d).
inline DenseMatrix scale_columns(const DenseMatrix& a, std::span<const double> d) {
  require(a.cols() == d.size(), "scale_columns: dimension mismatch");
  DenseMatrix c = a;
  for (std::size_t j = 0; j < a.cols(); ++j) scale(d[j], c.col(j));
  return c;
}

inline DenseMatrix hstack(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() == 0) return b.cols() == 0 ? DenseMatrix(std::max(a.rows(), b.rows()), 0) : b;
  DenseMatrix c = a;
  c.append_columns(b);
  return c;
}

// A set of column vectors with optional cached Gram diagonal (for example the
// gamma values of conjugate directions).
struct DenseBasis {
  DenseMatrix vectors;
  std::optional<Vector> gram_diag;
};

// Lower-triangular L in packed row storage. Holds a Cholesky factor G = L L^T,
// i.e. the transpose of the upper factor R with R^T R = G.
class DenseLowerTriangular {
 public:
  DenseLowerTriangular() = default;
  explicit DenseLowerTriangular(std::size_t n) : n_(n), data_(n * (n + 1) / 2, 0.0) {}

  std::size_t order() const { return n_; }
  double& at(std::size_t i, std::size_t j) { return data_[i * (i + 1) / 2 + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * (i + 1) / 2 + j]; }

  // L x = b
  Vector solve_lower(std::span<const double> b) const {
    require(b.size() == n_, "solve_lower: length mismatch");
    Vector x(b.begin(), b.end());
    for (std::size_t i = 0; i < n_; ++i) {
      double s = x[i];
      for (std::size_t j = 0; j < i; ++j) s -= at(i, j) * x[j];
      x[i] = s / at(i, i);
    }
    return x;
  }

  // L^T x = b
  Vector solve_upper(std::span<const double> b) const {
    require(b.size() == n_, "solve_upper: length mismatch");
    Vector x(b.begin(), b.end());
    for (std::size_t ii = n_; ii-- > 0;) {
      x[ii] /= at(ii, ii);
      const double xi = x[ii];
      for (std::size_t j = 0; j < ii; ++j) x[j] -= at(ii, j) * xi;
    }
    return x;
  }

  // L L^T x = b
  Vector solve(std::span<const double> b) const { return solve_upper(solve_lower(b)); }

  DenseMatrix to_dense() const {
    DenseMatrix m(n_, n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j <= i; ++j) m(i, j) = at(i, j);
    return m;
  }

  // Y L^{-T}: each row of Y is solved against L (column i uses columns <= i).
  DenseMatrix right_solve_transpose(const DenseMatrix& y) const {
    require(y.cols() == n_, "right_solve_transpose: dimension mismatch");
    DenseMatrix out = y;
    // X L^T = Y  ->  column j of X: (Y_j - sum_{k<j} X_k L(j,k)) / L(j,j)
    for (std::size_t j = 0; j < n_; ++j) {
      auto xj = out.col(j);
      for (std::size_t k = 0; k < j; ++k) axpy(-at(j, k), out.col(k), xj);
      scale(1.0 / at(j, j), xj);
    }
    return out;
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

// Factor of a block-diagonal Gram matrix diag(L L^T, d_1^2, ..., d_m^2):
// a dense leading block followed by a diagonal tail. This is the shape of
// the reduced matrices that appear once stage-1, stage-2 and earlier inner
// directions are mutually A-orthogonal.
class BlockDiagonalFactor {
 public:
  BlockDiagonalFactor() = default;
  BlockDiagonalFactor(DenseLowerTriangular head, Vector tail_sqrt)
      : head_(std::move(head)), tail_(std::move(tail_sqrt)) {}

  std::size_t order() const { return head_.order() + tail_.size(); }
  const DenseLowerTriangular& head() const { return head_; }
  const Vector& tail() const { return tail_; }

  void append_diagonal(std::span<const double> gamma) {
    for (double g : gamma) tail_.push_back(std::sqrt(g));
  }

  Vector solve(std::span<const double> b) const {
    require(b.size() == order(), "BlockDiagonalFactor::solve: length mismatch");
    const std::size_t w = head_.order();
    Vector x(b.size());
    if (w > 0) {
      Vector lead = head_.solve(b.subspan(0, w));
      std::copy(lead.begin(), lead.end(), x.begin());
    }
    for (std::size_t i = 0; i < tail_.size(); ++i) x[w + i] = b[w + i] / (tail_[i] * tail_[i]);
    return x;
  }

 private:
  DenseLowerTriangular head_;
  Vector tail_;
};

}  // namespace recykl
