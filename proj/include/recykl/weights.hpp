#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <span>
#include <string>
#include <string_view>

#include "recykl/dense.hpp"
#include "recykl/dense_linalg.hpp"
#include "recykl/errors.hpp"
#include "recykl/instrumentation.hpp"
#include "recykl/sparse.hpp"

namespace recykl {

enum class WeightScheme { ideal, previous, rbf };

inline WeightScheme parse_weight_scheme(std::string_view s) {
  if (s == "ideal") return WeightScheme::ideal;
  if (s == "prev" || s == "previous") return WeightScheme::previous;
  if (s == "rbf") return WeightScheme::rbf;
  throw InvalidConfig("unknown weight scheme '" + std::string(s) + "'");
}

inline const char* to_string(WeightScheme w) {
  switch (w) {
    case WeightScheme::ideal: return "ideal";
    case WeightScheme::previous: return "prev";
    case WeightScheme::rbf: return "rbf";
  }
  return "?";
}

// Coefficients of the A-orthogonal projection of the exact error onto
// range(Z): (Z^T A Z)^{-1} Z^T (b - A xguess). Needs the system being solved,
// so it is only usable in studies.
inline Vector weights_ideal(const DenseMatrix& z, const SparseSpdMatrix& a, std::span<const double> b,
                            std::span<const double> xguess, Counters* sink = nullptr) {
  require(z.rows() == a.n() && b.size() == a.n(), "weights_ideal: dimension mismatch");
  Vector r(b.begin(), b.end());
  if (!xguess.empty()) axpy(-1.0, spmv(a, xguess, sink), r);
  const DenseMatrix az = spmm(a, z, sink);
  const DenseMatrix g = assemble_reduced(z, az, sink);
  return dense_cholesky(g).solve(gemv_t(z, r));
}

// Inverse-distance radial basis function 1 / 2^(r-1).
inline double rbf_idw(std::size_t r) { return std::ldexp(1.0, 1 - static_cast<int>(r)); }

// Expansion coefficients of past solutions in the (growing) recycled basis,
// newest last. Entries recorded after a truncation are in post-truncation
// coordinates; shorter vectors are implicitly zero-padded.
class WeightHistory {
 public:
  void record(Vector coefficients) { entries_.push_back(std::move(coefficients)); }
  void reset() { entries_.clear(); }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::deque<Vector>& entries() const { return entries_; }

  std::size_t width() const {
    std::size_t w = 0;
    for (const auto& e : entries_) w = std::max(w, e.size());
    return w;
  }

  // Re-express every entry in the coordinates of Y_new = Z * map, as the
  // G-orthogonal projection with G = Z^T A Z:
  // eta' = (map^T G map)^{-1} map^T G eta.
  void reexpress(const DenseMatrix& map, const DenseMatrix& gram) {
    require(gram.rows() == map.rows() && gram.cols() == map.rows(), "WeightHistory::reexpress: size mismatch");
    const DenseMatrix gm = multiply(gram, map);
    DenseMatrix small = multiply_tn(map, gm);
    small.symmetrize();
    const DenseLowerTriangular l = dense_cholesky(small);
    for (auto& e : entries_) {
      Vector padded(map.rows(), 0.0);
      std::copy(e.begin(), e.end(), padded.begin());
      e = l.solve(gemv_t(gm, padded));
    }
  }

 private:
  std::deque<Vector> entries_;
};

// Coefficients of the most recent solution.
inline Vector weights_previous(const WeightHistory& h) {
  if (h.empty()) throw NoHistory("weights_previous: no solution recorded yet");
  return h.entries().back();
}

// sum_{i=1}^{omega} rho(i) eta_{newest+1-i}, zero-padded to the newest width.
inline Vector weights_rbf(const WeightHistory& h, std::size_t omega) {
  if (h.empty()) throw NoHistory("weights_rbf: no solution recorded yet");
  if (omega == 0) throw InvalidConfig("weights_rbf: omega must be at least 1");
  Vector out(h.width(), 0.0);
  const auto& e = h.entries();
  const std::size_t m = std::min(omega, e.size());
  for (std::size_t i = 1; i <= m; ++i) {
    const Vector& v = e[e.size() - i];
    const double rho = rbf_idw(i);
    for (std::size_t k = 0; k < v.size(); ++k) out[k] += rho * v[k];
  }
  return out;
}

}  // namespace recykl
