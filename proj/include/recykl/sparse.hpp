#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "recykl/dense.hpp"
#include "recykl/errors.hpp"
#include "recykl/instrumentation.hpp"

namespace recykl {

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

// Symmetric matrix in CSR form with both triangles stored, so a product is a
// single pass over rows. Construction checks symmetry and a positive diagonal;
// full positive definiteness is left to the generators and to Cholesky.
class SparseSpdMatrix {
 public:
  SparseSpdMatrix() = default;

  SparseSpdMatrix(std::size_t n, std::vector<std::size_t> row_offsets,
                  std::vector<std::size_t> cols, std::vector<double> values)
      : n_(n), row_offsets_(std::move(row_offsets)), cols_(std::move(cols)),
        values_(std::move(values)) {
    validate();
  }

  // Duplicates are summed. Both triangles must be supplied.
  static SparseSpdMatrix from_triplets(std::size_t n, std::vector<Triplet> t) {
    for (const auto& e : t)
      if (e.row >= n || e.col >= n) throw DimensionMismatch("from_triplets: index out of range");
    std::sort(t.begin(), t.end(), [](const Triplet& a, const Triplet& b) {
      return std::tie(a.row, a.col) < std::tie(b.row, b.col);
    });
    std::vector<std::size_t> offsets(n + 1, 0), cols;
    std::vector<double> vals;
    cols.reserve(t.size());
    vals.reserve(t.size());
    for (std::size_t k = 0; k < t.size(); ++k) {
      if (k > 0 && t[k].row == t[k - 1].row && t[k].col == t[k - 1].col) {
        vals.back() += t[k].value;
        continue;
      }
      cols.push_back(t[k].col);
      vals.push_back(t[k].value);
      ++offsets[t[k].row + 1];
    }
    for (std::size_t i = 0; i < n; ++i) offsets[i + 1] += offsets[i];
    return SparseSpdMatrix(n, std::move(offsets), std::move(cols), std::move(vals));
  }

  static SparseSpdMatrix from_dense(const DenseMatrix& a) {
    require(a.rows() == a.cols(), "from_dense: matrix not square");
    std::vector<Triplet> t;
    for (std::size_t j = 0; j < a.cols(); ++j)
      for (std::size_t i = 0; i < a.rows(); ++i)
        if (a(i, j) != 0.0) t.push_back({i, j, a(i, j)});
    return from_triplets(a.rows(), std::move(t));
  }

  std::size_t n() const { return n_; }
  std::size_t nnz() const { return values_.size(); }
  const std::vector<std::size_t>& row_offsets() const { return row_offsets_; }
  const std::vector<std::size_t>& col_indices() const { return cols_; }
  const std::vector<double>& values() const { return values_; }

  // y = A x, uncounted. Use spmv() for instrumented products.
  void multiply(std::span<const double> x, std::span<double> y) const {
    require(x.size() == n_ && y.size() == n_, "multiply: length mismatch");
    for (std::size_t i = 0; i < n_; ++i) {
      double s = 0.0;
      for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) s += values_[k] * x[cols_[k]];
      y[i] = s;
    }
  }

  double entry(std::size_t i, std::size_t j) const {
    const auto b = cols_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[i]);
    const auto e = cols_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[i + 1]);
    const auto it = std::lower_bound(b, e, j);
    return (it != e && *it == j) ? values_[static_cast<std::size_t>(it - cols_.begin())] : 0.0;
  }

  Vector diagonal() const {
    Vector d(n_);
    for (std::size_t i = 0; i < n_; ++i) d[i] = entry(i, i);
    return d;
  }

  DenseMatrix to_dense() const {
    DenseMatrix m(n_, n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) m(i, cols_[k]) = values_[k];
    return m;
  }

  double frobenius_norm() const { return norm2(values_); }

 private:
  void validate() const {
    if (row_offsets_.size() != n_ + 1 || cols_.size() != values_.size() ||
        row_offsets_.back() != values_.size())
      throw DimensionMismatch("SparseSpdMatrix: inconsistent CSR arrays");
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
        const std::size_t j = cols_[k];
        if (j >= n_) throw DimensionMismatch("SparseSpdMatrix: column index out of range");
        if (k > row_offsets_[i] && cols_[k - 1] >= j)
          throw DimensionMismatch("SparseSpdMatrix: columns not strictly increasing in row " +
                                  std::to_string(i));
        const double v = values_[k];
        const double vt = entry(j, i);
        if (std::abs(v - vt) > 1e-12 * std::max(std::abs(v), std::abs(vt)))
          throw NotSymmetric("SparseSpdMatrix: entry (" + std::to_string(i) + "," + std::to_string(j) +
                             ") differs from its transpose");
      }
      if (!(entry(i, i) > 0.0))
        throw NotPositiveDefinite(i, "SparseSpdMatrix: non-positive diagonal");
    }
  }

  std::size_t n_ = 0;
  std::vector<std::size_t> row_offsets_{0};
  std::vector<std::size_t> cols_;
  std::vector<double> values_;
};

inline Vector spmv(const SparseSpdMatrix& a, std::span<const double> x, Counters* sink = nullptr) {
  Vector y(a.n());
  a.multiply(x, y);
  count_matvec(sink);
  return y;
}

// x^T A y; costs one product.
inline double weighted_inner(const SparseSpdMatrix& a, std::span<const double> x,
                             std::span<const double> y, Counters* sink = nullptr) {
  return dot(x, spmv(a, y, sink));
}

// A times every column of Y.
inline DenseMatrix spmm(const SparseSpdMatrix& a, const DenseMatrix& y, Counters* sink = nullptr) {
  require(y.rows() == a.n(), "spmm: dimension mismatch");
  DenseMatrix out(y.rows(), y.cols());
  for (std::size_t j = 0; j < y.cols(); ++j) {
    a.multiply(y.col(j), out.col(j));
    count_matvec(sink);
  }
  return out;
}

// Y^T (A Y) from precomputed products. Counted so that code paths that must
// never assemble a reduced matrix can be audited.
inline DenseMatrix assemble_reduced(const DenseMatrix& y, const DenseMatrix& ay, Counters* sink = nullptr) {
  DenseMatrix g = multiply_tn(y, ay);
  g.symmetrize();
  count_assembly(sink);
  return g;
}

}  // namespace recykl
