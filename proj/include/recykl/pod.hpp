#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <variant>

#include "recykl/dense.hpp"
#include "recykl/dense_linalg.hpp"
#include "recykl/errors.hpp"
#include "recykl/instrumentation.hpp"
#include "recykl/sparse.hpp"

namespace recykl {

// Relative threshold below which a squared singular value counts as zero.
inline constexpr double kPodRankTolerance = 1e-12;

// Metric of the snapshot space: an explicit SPD matrix, or a factor C with
// Theta = C^T C.
struct ExplicitSpd {
  const SparseSpdMatrix* theta;
};
struct FactorForm {
  const DenseMatrix* c;
};
using PodMetric = std::variant<ExplicitSpd, FactorForm>;

// Smallest y <= rank with sum_{i<=y} s_i / sum_i s_i >= eps, where s are the
// squared singular values in descending order and rank counts entries above
// 1e-12 s_1. eps = 0 gives 1.
inline std::size_t energy_truncation_dim(std::span<const double> sigma_sq, double eps) {
  if (sigma_sq.empty()) throw EmptyBasis("energy_truncation_dim: empty spectrum");
  double total = 0.0;
  for (double s : sigma_sq) total += std::max(s, 0.0);
  if (!(total > 0.0)) throw EmptyBasis("energy_truncation_dim: spectrum is identically zero");
  const double s1 = sigma_sq.front();
  std::size_t rank = 0;
  while (rank < sigma_sq.size() && sigma_sq[rank] > kPodRankTolerance * s1) ++rank;
  double cum = 0.0;
  for (std::size_t i = 0; i < rank; ++i) {
    cum += sigma_sq[i];
    if (cum / total >= eps) return i + 1;
  }
  return rank;
}

struct PodBasisResult {
  DenseMatrix basis;          // S * coefficients, Theta-orthonormal
  DenseMatrix coefficients;   // s x y: diag(gamma) V_y Sigma_y^{-1}
  Vector singular_values;     // full spectrum, descending, length s
  std::size_t y = 0;
  std::size_t rank = 0;
  bool rank_truncated = false;  // some snapshot directions carried no energy
};

namespace detail {

inline PodBasisResult pod_finish(const DenseMatrix& s, std::span<const double> gamma, Vector sigma,
                                 const DenseMatrix& v, double eps, std::optional<std::size_t> max_dim) {
  PodBasisResult out;
  Vector sq(sigma.size());
  for (std::size_t i = 0; i < sigma.size(); ++i) sq[i] = sigma[i] * sigma[i];
  out.y = energy_truncation_dim(sq, eps);
  out.rank = 0;
  while (out.rank < sq.size() && sq[out.rank] > kPodRankTolerance * sq.front()) ++out.rank;
  out.rank_truncated = out.rank < sigma.size();
  if (max_dim) out.y = std::min(out.y, std::max<std::size_t>(*max_dim, 1));
  out.coefficients = DenseMatrix(s.cols(), out.y);
  for (std::size_t k = 0; k < out.y; ++k)
    for (std::size_t i = 0; i < s.cols(); ++i) out.coefficients(i, k) = gamma[i] * v(i, k) / sigma[k];
  out.basis = multiply(s, out.coefficients);
  out.singular_values = std::move(sigma);
  return out;
}

inline void check_snapshots(const DenseMatrix& s, std::span<const double> gamma) {
  require(s.cols() == gamma.size(), "pod: one weight per snapshot required");
  if (s.cols() == 0) throw EmptyBasis("pod: no snapshots");
  if (std::all_of(gamma.begin(), gamma.end(), [](double g) { return g == 0.0; }))
    throw EmptyBasis("pod: all weights are zero");
}

}  // namespace detail

// Method of snapshots from the Gram matrix G = S^T Theta S.
inline PodBasisResult pod_evd_from_gram(const DenseMatrix& s, const DenseMatrix& gram, std::span<const double> gamma,
                                        double eps, std::optional<std::size_t> max_dim = std::nullopt) {
  detail::check_snapshots(s, gamma);
  require(gram.rows() == s.cols() && gram.cols() == s.cols(), "pod_evd: Gram matrix has wrong size");
  DenseMatrix tb(s.cols(), s.cols());
  for (std::size_t j = 0; j < s.cols(); ++j)
    for (std::size_t i = 0; i < s.cols(); ++i) tb(i, j) = gamma[i] * gram(i, j) * gamma[j];
  tb.symmetrize();
  SymmetricEigen e = symmetric_evd(tb);
  Vector sigma(e.values.size());
  for (std::size_t i = 0; i < sigma.size(); ++i) sigma[i] = std::sqrt(std::max(e.values[i], 0.0));
  if (!(sigma.front() > 0.0)) throw EmptyBasis("pod_evd: weighted snapshots are zero in the metric");
  return detail::pod_finish(s, gamma, std::move(sigma), e.vectors, eps, max_dim);
}

// Theta-weighted POD via the eigendecomposition of diag(gamma) S^T Theta S diag(gamma).
inline PodBasisResult pod_evd(const DenseMatrix& s, std::span<const double> gamma, const SparseSpdMatrix& theta,
                              double eps, Counters* sink = nullptr,
                              std::optional<std::size_t> max_dim = std::nullopt) {
  detail::check_snapshots(s, gamma);
  const DenseMatrix ts = spmm(theta, s, sink);
  DenseMatrix g = multiply_tn(s, ts);
  g.symmetrize();
  return pod_evd_from_gram(s, g, gamma, eps, max_dim);
}

// Dense-metric variant, used by the analysis module.
inline PodBasisResult pod_evd(const DenseMatrix& s, std::span<const double> gamma, const DenseMatrix& theta,
                              double eps, std::optional<std::size_t> max_dim = std::nullopt) {
  detail::check_snapshots(s, gamma);
  DenseMatrix g = multiply_tn(s, multiply(theta, s));
  g.symmetrize();
  return pod_evd_from_gram(s, g, gamma, eps, max_dim);
}

// Same subspace through the thin SVD of C S diag(gamma), for Theta = C^T C.
inline PodBasisResult pod_svd(const DenseMatrix& s, std::span<const double> gamma, const DenseMatrix& c, double eps,
                              std::optional<std::size_t> max_dim = std::nullopt) {
  detail::check_snapshots(s, gamma);
  require(c.cols() == s.rows(), "pod_svd: factor has wrong column count");
  const DenseMatrix sbar = multiply(c, scale_columns(s, gamma));
  ThinSvd t = thin_svd(sbar);
  const std::size_t ns = s.cols();
  Vector sigma(ns, 0.0);
  std::copy(t.sigma.begin(), t.sigma.end(), sigma.begin());
  if (!(sigma.front() > 0.0)) throw EmptyBasis("pod_svd: weighted snapshots are zero in the metric");
  return detail::pod_finish(s, gamma, std::move(sigma), t.v, eps, max_dim);
}

inline PodBasisResult pod(const DenseMatrix& s, std::span<const double> gamma, const PodMetric& metric, double eps,
                          Counters* sink = nullptr, std::optional<std::size_t> max_dim = std::nullopt) {
  if (const auto* e = std::get_if<ExplicitSpd>(&metric)) return pod_evd(s, gamma, *e->theta, eps, sink, max_dim);
  return pod_svd(s, gamma, *std::get<FactorForm>(metric).c, eps, max_dim);
}

}  // namespace recykl
