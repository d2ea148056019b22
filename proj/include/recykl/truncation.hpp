#pragma once

#include <charconv>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "recykl/dense.hpp"
#include "recykl/dense_linalg.hpp"
#include "recykl/errors.hpp"
#include "recykl/instrumentation.hpp"
#include "recykl/pod.hpp"
#include "recykl/sparse.hpp"
#include "recykl/weights.hpp"

namespace recykl {

enum class TruncationStrategy { none, pod_a_prev, pod_a_rbf, pod_ctc_prev, pod_ctc_rbf, deflation };

struct TruncationConfig {
  TruncationStrategy strategy = TruncationStrategy::none;
  std::size_t deflation_keep = 0;  // m for deflation
  double nu_y = 1.0;               // POD energy for the retained basis
  double nu_w = 1.0;               // POD energy for the stage-1 prefix
  std::size_t storage_cap = std::numeric_limits<std::size_t>::max();  // ybar
  std::optional<std::size_t> retain_dim;  // hard cap on the retained basis size
  std::optional<std::size_t> stage1_dim;  // fixed stage-1 width, overrides nu_w
  double stage1_threshold = 1.0;          // rho in [0, 1]
  bool keep_history_across_truncation = false;

  bool uses_pod() const {
    return strategy != TruncationStrategy::none && strategy != TruncationStrategy::deflation;
  }
  bool a_metric() const {
    return strategy == TruncationStrategy::pod_a_prev || strategy == TruncationStrategy::pod_a_rbf;
  }
  bool ctc_metric() const {
    return strategy == TruncationStrategy::pod_ctc_prev || strategy == TruncationStrategy::pod_ctc_rbf;
  }
  WeightScheme weight_scheme() const {
    return (strategy == TruncationStrategy::pod_a_rbf || strategy == TruncationStrategy::pod_ctc_rbf)
               ? WeightScheme::rbf
               : WeightScheme::previous;
  }

  void validate() const {
    if (!(0.0 <= nu_w && nu_w <= nu_y && nu_y <= 1.0))
      throw InvalidConfig("truncation: need 0 <= nu_w <= nu_y <= 1");
    if (storage_cap < 1) throw InvalidConfig("truncation: storage cap must be at least 1");
    if (!(0.0 <= stage1_threshold && stage1_threshold <= 1.0))
      throw InvalidConfig("truncation: stage-1 threshold must lie in [0, 1]");
    if (strategy == TruncationStrategy::deflation && deflation_keep == 0)
      throw InvalidConfig("truncation: deflation needs a positive number of vectors to keep");
    if (retain_dim && *retain_dim == 0) throw InvalidConfig("truncation: retain_dim must be positive");
  }
};

// "none", "pod-a-prev", "pod-a-rbf", "pod-ctc-prev", "pod-ctc-rbf", "deflate:<m>".
inline void parse_strategy(std::string_view s, TruncationConfig& cfg) {
  if (s == "none") cfg.strategy = TruncationStrategy::none;
  else if (s == "pod-a-prev") cfg.strategy = TruncationStrategy::pod_a_prev;
  else if (s == "pod-a-rbf") cfg.strategy = TruncationStrategy::pod_a_rbf;
  else if (s == "pod-ctc-prev") cfg.strategy = TruncationStrategy::pod_ctc_prev;
  else if (s == "pod-ctc-rbf") cfg.strategy = TruncationStrategy::pod_ctc_rbf;
  else if (s.starts_with("deflate:")) {
    const auto num = s.substr(8);
    std::size_t m = 0;
    const auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), m);
    if (ec != std::errc() || p != num.data() + num.size() || m == 0)
      throw InvalidConfig("truncation: bad deflation count in '" + std::string(s) + "'");
    cfg.strategy = TruncationStrategy::deflation;
    cfg.deflation_keep = m;
  } else {
    throw InvalidConfig("truncation: unknown strategy '" + std::string(s) + "'");
  }
}

inline std::string strategy_name(const TruncationConfig& cfg) {
  switch (cfg.strategy) {
    case TruncationStrategy::none: return "none";
    case TruncationStrategy::pod_a_prev: return "pod-a-prev";
    case TruncationStrategy::pod_a_rbf: return "pod-a-rbf";
    case TruncationStrategy::pod_ctc_prev: return "pod-ctc-prev";
    case TruncationStrategy::pod_ctc_rbf: return "pod-ctc-rbf";
    case TruncationStrategy::deflation: return "deflate:" + std::to_string(cfg.deflation_keep);
  }
  return "none";
}

struct TruncationOutcome {
  DenseMatrix y_new;            // A-orthonormal retained basis
  std::size_t stage1_width = 0; // W_new = first stage1_width columns of y_new
  DenseMatrix map;              // y_new = Z * map
  Vector spectrum;              // POD singular values or harmonic Ritz values
  std::optional<DenseMatrix> z_gram;  // Z^T A Z when it was formed
};

struct EnforcedBasis {
  DenseMatrix y;
  DenseLowerTriangular l;  // Y^T A Y = L L^T before the update
};

// Y <- Y L^{-T} where Y^T A Y = L L^T, given A Y. Column i of the result only
// mixes columns <= i, so leading prefixes keep their span.
inline EnforcedBasis enforce_a_orthogonality(const DenseMatrix& y, const DenseMatrix& ay) {
  DenseMatrix g = multiply_tn(y, ay);
  g.symmetrize();
  EnforcedBasis out;
  out.l = dense_cholesky(g);
  out.y = out.l.right_solve_transpose(y);
  return out;
}

inline EnforcedBasis enforce_a_orthogonality(const DenseMatrix& y, const SparseSpdMatrix& a, Counters* sink) {
  return enforce_a_orthogonality(y, spmm(a, y, sink));
}

namespace detail {

inline std::size_t stage1_width(const TruncationConfig& cfg, std::span<const double> sigma, std::size_t y,
                                bool energy) {
  std::size_t w = y;
  if (cfg.stage1_dim) {
    w = *cfg.stage1_dim;
  } else if (energy) {
    Vector sq(sigma.size());
    for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = sigma[i] * sigma[i];
    w = energy_truncation_dim(sq, cfg.nu_w);
  }
  return std::min(w, y);
}

}  // namespace detail

// POD compression of Z with the given snapshot weights, followed by
// a_prev-orthonormalization of the retained basis. A-metric variants use
// a_prev as Theta, C^T C variants the output factor.
inline TruncationOutcome pod_compress(const DenseMatrix& z, std::span<const double> weights,
                                      const TruncationConfig& cfg, const SparseSpdMatrix& a_prev,
                                      const DenseMatrix* c, Counters* sink) {
  cfg.validate();
  const auto cap = cfg.retain_dim;
  TruncationOutcome out;
  if (cfg.a_metric()) {
    const DenseMatrix az = spmm(a_prev, z, sink);
    DenseMatrix g = multiply_tn(z, az);
    g.symmetrize();
    PodBasisResult p = pod_evd_from_gram(z, g, weights, cfg.nu_y, cap);
    // The POD basis is a_prev-orthonormal only up to eps * (sigma_1/sigma_y)^2,
    // so it is re-orthonormalized; A Y comes for free from A Z.
    EnforcedBasis e = enforce_a_orthogonality(p.basis, multiply(az, p.coefficients));
    out.y_new = std::move(e.y);
    out.map = e.l.right_solve_transpose(p.coefficients);
    out.spectrum = std::move(p.singular_values);
    out.z_gram = std::move(g);
  } else if (cfg.ctc_metric()) {
    if (!c) throw InvalidConfig("pod_compress: C^T C metric requires an output matrix");
    PodBasisResult p = pod_svd(z, weights, *c, cfg.nu_y, cap);
    const DenseMatrix ay = spmm(a_prev, p.basis, sink);
    EnforcedBasis e = enforce_a_orthogonality(p.basis, ay);
    out.y_new = std::move(e.y);
    out.map = e.l.right_solve_transpose(p.coefficients);
    out.spectrum = std::move(p.singular_values);
  } else {
    throw InvalidConfig("pod_compress: strategy is not a POD strategy");
  }
  out.stage1_width = detail::stage1_width(cfg, out.spectrum, out.y_new.cols(), true);
  return out;
}

// Keeps the m harmonic Ritz vectors of A on range(Z) with the smallest
// harmonic Ritz values: Z^T A^T A Z g = mu Z^T A Z g.
inline TruncationOutcome deflation_compress(const DenseMatrix& z, const SparseSpdMatrix& a_prev, std::size_t m,
                                            const TruncationConfig& cfg, Counters* sink) {
  if (m == 0) throw InvalidConfig("deflation_compress: m must be positive");
  const DenseMatrix az = spmm(a_prev, z, sink);
  DenseMatrix mm = multiply_tn(z, az);
  mm.symmetrize();
  DenseMatrix k = multiply_tn(az, az);
  k.symmetrize();
  const GeneralizedEigen e = generalized_symmetric_evd(k, mm);
  const std::size_t s = z.cols();
  const std::size_t keep = std::min(m, s);
  DenseMatrix g(s, keep);
  TruncationOutcome out;
  for (std::size_t i = 0; i < keep; ++i) {
    const std::size_t src = s - 1 - i;  // values are descending
    std::copy(e.vectors.col(src).begin(), e.vectors.col(src).end(), g.col(i).begin());
    out.spectrum.push_back(e.values[src]);
  }
  const DenseMatrix y = multiply(z, g);
  EnforcedBasis enf = enforce_a_orthogonality(y, multiply(az, g));
  out.y_new = std::move(enf.y);
  out.map = enf.l.right_solve_transpose(g);
  out.z_gram = std::move(mm);
  out.stage1_width = detail::stage1_width(cfg, out.spectrum, keep, false);
  return out;
}

}  // namespace recykl
