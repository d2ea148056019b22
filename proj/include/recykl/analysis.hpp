#pragma once

// Dense numerical checks of the recycling bounds: weight differences,
// distances between weighted POD subspaces, conditioning of the reduced
// operator, and the POD objective. Everything here is dense and meant for
// small verification instances, not for the solver path.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "recykl/dense.hpp"
#include "recykl/dense_linalg.hpp"
#include "recykl/errors.hpp"
#include "recykl/rng.hpp"
#include "recykl/threestage.hpp"

namespace recykl {

struct BoundCheckReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double allowance = 0.0;  // absolute slack for roundoff, 0 unless stated
  bool satisfied = false;
  std::string context;
};

inline BoundCheckReport make_report(double lhs, double rhs, std::string context, double allowance = 0.0) {
  BoundCheckReport r;
  r.lhs = lhs;
  r.rhs = rhs;
  r.allowance = allowance;
  r.satisfied = lhs <= rhs * (1.0 + 1e-8) + allowance;
  r.context = std::move(context);
  return r;
}

inline nlohmann::json to_json(const BoundCheckReport& r) {
  const auto num = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
  };
  return {{"lhs", num(r.lhs)}, {"rhs", num(r.rhs)}, {"allowance", r.allowance}, {"satisfied", r.satisfied},
          {"context", r.context}};
}

namespace detail {

inline DenseMatrix scale_rows(const DenseMatrix& a, std::span<const double> d) {
  require(d.size() == a.rows(), "scale_rows: length mismatch");
  DenseMatrix out = a;
  for (std::size_t j = 0; j < a.cols(); ++j)
    for (std::size_t i = 0; i < a.rows(); ++i) out(i, j) *= d[i];
  return out;
}

inline DenseMatrix symmetric_product(const DenseMatrix& z, const DenseMatrix& theta) {
  DenseMatrix g = multiply_tn(z, multiply(theta, z));
  g.symmetrize();
  return g;
}

// Moore-Penrose pseudoinverse; singular values below max(r, c) eps sigma_1
// are treated as zero.
inline DenseMatrix pseudoinverse(const DenseMatrix& m) {
  DenseMatrix out(m.cols(), m.rows());
  if (m.rows() == 0 || m.cols() == 0) return out;
  const ThinSvd s = thin_svd(m);
  const double cut = static_cast<double>(std::max(m.rows(), m.cols())) *
                     std::numeric_limits<double>::epsilon() * s.sigma.front();
  for (std::size_t k = 0; k < s.sigma.size(); ++k) {
    if (!(s.sigma[k] > cut)) continue;
    for (std::size_t j = 0; j < m.rows(); ++j)
      for (std::size_t i = 0; i < m.cols(); ++i) out(i, j) += s.v(i, k) * s.u(j, k) / s.sigma[k];
  }
  return out;
}

// (Z^T M Z)^{-1} Z^T M for SPD M and full-rank Z.
inline DenseMatrix a_coefficient_map(const DenseMatrix& z, const DenseMatrix& m) {
  const DenseMatrix mz = multiply(m, z);
  DenseMatrix g = multiply_tn(z, mz);
  g.symmetrize();
  const DenseLowerTriangular l = dense_cholesky(g);
  const DenseMatrix rhs = mz.transpose();
  DenseMatrix out(z.cols(), z.rows());
  for (std::size_t j = 0; j < rhs.cols(); ++j) {
    const Vector x = l.solve_upper(l.solve_lower(rhs.col(j)));
    std::copy(x.begin(), x.end(), out.col(j).begin());
  }
  return out;
}

inline bool all_zero(const DenseMatrix& a) {
  return std::all_of(a.data().begin(), a.data().end(), [](double v) { return v == 0.0; });
}

// Symmetric random matrix with spectral norm 1 that is positive semidefinite.
inline DenseMatrix random_unit_spsd(Xorshift64Star& rng, std::size_t n, std::size_t rank) {
  DenseMatrix m(n, rank);
  for (double& v : m.data()) v = rng.normal();
  DenseMatrix p = multiply(m, m.transpose());
  p.symmetrize();
  const double s = symmetric_spectral_norm(p);
  for (double& v : p.data()) v /= s;
  return p;
}

inline DenseMatrix random_dense_spd(Xorshift64Star& rng, std::size_t n, double shift) {
  DenseMatrix m(n, n);
  for (double& v : m.data()) v = rng.normal();
  DenseMatrix a = multiply_tn(m, m);
  for (double& v : a.data()) v /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) a(i, i) += shift;
  a.symmetrize();
  return a;
}

inline DenseMatrix random_gaussian(Xorshift64Star& rng, std::size_t r, std::size_t c) {
  DenseMatrix m(r, c);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

inline Vector random_gaussian_vector(Xorshift64Star& rng, std::size_t n) {
  Vector v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

inline nlohmann::json matrix_json(const DenseMatrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Weight differences

// Consecutive systems restricted to dense data: e_cur = x*_j - xguess_j and
// e_prev = x*_{j-1} - xguess_{j-1}. With c set, the ideal weights use the
// C^T C projector instead of A_j.
struct WeightsInstance {
  DenseMatrix z;
  DenseMatrix a_cur;
  DenseMatrix a_prev;
  Vector e_cur;
  Vector e_prev;
  std::optional<DenseMatrix> c;
  std::uint64_t seed = 0;
};

inline std::string describe(const WeightsInstance& w) {
  std::ostringstream os;
  os << "weights seed=" << w.seed << " n=" << w.z.rows() << " s=" << w.z.cols()
     << " metric=" << (w.c ? "ctc" : "a");
  return os.str();
}

inline nlohmann::json to_json(const WeightsInstance& w) {
  nlohmann::json j = {{"seed", w.seed},          {"z", detail::matrix_json(w.z)},
                      {"a_cur", detail::matrix_json(w.a_cur)}, {"a_prev", detail::matrix_json(w.a_prev)},
                      {"e_cur", w.e_cur},        {"e_prev", w.e_prev}};
  if (w.c) j["c"] = detail::matrix_json(*w.c);
  return j;
}

// A_prev = M^T M / n + I, A_cur = A_prev + t E with symmetric ||E||_2 = 1,
// e_cur = e_prev + t g.
inline WeightsInstance random_weights_instance(std::uint64_t seed, std::size_t n = 30, std::size_t s = 5,
                                               double t = 1e-2, bool ctc = false) {
  require(n >= s && s > 0, "random_weights_instance: need n >= s > 0");
  Xorshift64Star rng(seed);
  WeightsInstance w;
  w.seed = seed;
  w.z = detail::random_gaussian(rng, n, s);
  w.a_prev = detail::random_dense_spd(rng, n, 1.0);
  DenseMatrix e = detail::random_gaussian(rng, n, n);
  e = add(e, e.transpose());
  const double en = symmetric_spectral_norm(e);
  w.a_cur = add(w.a_prev, e, t / en);
  w.e_prev = detail::random_gaussian_vector(rng, n);
  w.e_cur = w.e_prev;
  axpy(t, detail::random_gaussian_vector(rng, n), w.e_cur);
  if (ctc) w.c = detail::random_gaussian(rng, std::max<std::size_t>(1, n / 2), n);
  return w;
}

// ||eta* - eta_prev|| <= (||P_cur - P_prev|| ||e_cur|| + sigma_1 ||e_cur - e_prev||) / sigma_min(Z)
// with P_prev = Z (Z^T A_prev Z)^{-1} Z^T A_prev, P_cur its A_cur (or C^T C)
// counterpart and sigma_1 = ||P_prev||_2.
inline BoundCheckReport check_weights_bound(const WeightsInstance& w) {
  const std::size_t n = w.z.rows();
  require(n <= 500, "check_weights_bound: dense check limited to n <= 500");
  require(w.a_cur.rows() == n && w.a_prev.rows() == n && w.e_cur.size() == n && w.e_prev.size() == n,
          "check_weights_bound: dimension mismatch");
  const ThinSvd sz = thin_svd(w.z);
  const double smin = sz.sigma.back();
  if (!(smin > 1e-12 * sz.sigma.front())) throw RankDeficient("check_weights_bound: Z is rank deficient");

  const DenseMatrix map_prev = detail::a_coefficient_map(w.z, w.a_prev);
  const DenseMatrix map_cur =
      w.c ? multiply(detail::pseudoinverse(multiply(*w.c, w.z)), *w.c) : detail::a_coefficient_map(w.z, w.a_cur);
  const DenseMatrix p_prev = multiply(w.z, map_prev);
  const DenseMatrix p_cur = multiply(w.z, map_cur);

  const Vector eta_star = gemv(map_cur, w.e_cur);
  const Vector eta_prev = gemv(map_prev, w.e_prev);
  const double lhs = norm2(subtract(eta_star, eta_prev));
  const double sigma1 = spectral_norm(p_prev);
  const double rhs = (spectral_norm(add(p_cur, p_prev, -1.0)) * norm2(w.e_cur) +
                      sigma1 * norm2(subtract(w.e_cur, w.e_prev))) /
                     smin;
  return make_report(lhs, rhs, describe(w));
}

// ---------------------------------------------------------------------------
// Distance between weighted POD subspaces

enum class BoundRegime { General, FixedWeights, FixedMetric, RelBounded, Commuting, StrongSep };

inline const char* regime_name(BoundRegime r) {
  switch (r) {
    case BoundRegime::General: return "General";
    case BoundRegime::FixedWeights: return "FixedWeights";
    case BoundRegime::FixedMetric: return "FixedMetric";
    case BoundRegime::RelBounded: return "RelBounded";
    case BoundRegime::Commuting: return "Commuting";
    case BoundRegime::StrongSep: return "StrongSep";
  }
  return "?";
}

inline BoundRegime parse_regime(const std::string& s) {
  for (BoundRegime r : {BoundRegime::General, BoundRegime::FixedWeights, BoundRegime::FixedMetric,
                        BoundRegime::RelBounded, BoundRegime::Commuting, BoundRegime::StrongSep})
    if (s == regime_name(r)) return r;
  throw InvalidConfig("unknown bound regime '" + s + "'");
}

// Ideal metric theta_comp + delta with weights eta_ideal against the
// computed metric theta_comp with weights eta_comp, both retaining y modes
// of the snapshots z.
struct SubspaceInstance {
  DenseMatrix z;
  DenseMatrix theta_comp;
  DenseMatrix delta;
  Vector eta_ideal;
  Vector eta_comp;
  std::size_t y = 1;
  std::uint64_t seed = 0;
  double t = 0.0;
};

inline std::string describe(const SubspaceInstance& inst, BoundRegime r) {
  std::ostringstream os;
  os << "subspace regime=" << regime_name(r) << " seed=" << inst.seed << " n=" << inst.z.rows()
     << " s=" << inst.z.cols() << " y=" << inst.y << " t=" << inst.t;
  return os.str();
}

inline nlohmann::json to_json(const SubspaceInstance& inst) {
  return {{"seed", inst.seed},
          {"t", inst.t},
          {"y", inst.y},
          {"z", detail::matrix_json(inst.z)},
          {"theta_comp", detail::matrix_json(inst.theta_comp)},
          {"delta", detail::matrix_json(inst.delta)},
          {"eta_ideal", inst.eta_ideal},
          {"eta_comp", inst.eta_comp}};
}

// Min pairwise gap |lambda - mu|; for diagonal arguments this is the
// separation min over unit Z of ||L1 Z - Z L2||_2.
inline double abssep(std::span<const double> l1, std::span<const double> l2) {
  double m = std::numeric_limits<double>::infinity();
  for (double a : l1)
    for (double b : l2) m = std::min(m, std::abs(a - b));
  return m;
}

// max(min|L2| - max|L1|, min|L1| - max|L2|); positive when the two spectra
// are separated in magnitude.
inline double strong_separation(std::span<const double> l1, std::span<const double> l2) {
  if (l1.empty() || l2.empty()) return std::numeric_limits<double>::infinity();
  const auto mn = [](std::span<const double> l) {
    double m = std::numeric_limits<double>::infinity();
    for (double v : l) m = std::min(m, std::abs(v));
    return m;
  };
  const auto mx = [](std::span<const double> l) {
    double m = 0.0;
    for (double v : l) m = std::max(m, std::abs(v));
    return m;
  };
  return std::max(mn(l2) - mx(l1), mn(l1) - mx(l2));
}

// Per-regime instance: weights of either sign with |eta| in [0.5, 2],
// relative weight perturbation up to t, metric perturbation t E with E SPSD
// and ||E||_2 = 1. Commuting uses Z with diagonal Z^T theta Z.
inline SubspaceInstance random_subspace_instance(std::uint64_t seed, BoundRegime regime, std::size_t n = 40,
                                                 std::size_t s = 8, std::size_t y = 3, double t = 1e-2) {
  require(n >= s && s > y && y > 0, "random_subspace_instance: need n >= s > y > 0");
  Xorshift64Star rng(seed);
  SubspaceInstance inst;
  inst.seed = seed;
  inst.y = y;
  inst.t = t;
  inst.z = detail::random_gaussian(rng, n, s);
  inst.theta_comp = detail::random_dense_spd(rng, n, 0.1);
  inst.eta_ideal.resize(s);
  for (double& e : inst.eta_ideal) e = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.5, 2.0);
  inst.eta_comp = inst.eta_ideal;
  inst.delta = DenseMatrix(n, n);

  const bool perturb_weights = regime != BoundRegime::FixedWeights;
  const bool perturb_metric = regime == BoundRegime::General || regime == BoundRegime::FixedWeights ||
                              regime == BoundRegime::StrongSep;
  if (perturb_weights)
    for (std::size_t k = 0; k < s; ++k) inst.eta_comp[k] *= 1.0 + t * rng.uniform(-1.0, 1.0);
  if (perturb_metric) {
    inst.delta = detail::random_unit_spsd(rng, n, std::max<std::size_t>(1, n / 2));
    for (double& v : inst.delta.data()) v *= t;
  }
  if (regime == BoundRegime::Commuting) {
    // Z <- Z L^{-T} diag(d) so that Z^T theta Z = diag(d)^2.
    const DenseLowerTriangular l = dense_cholesky(detail::symmetric_product(inst.z, inst.theta_comp));
    Vector d(s);
    for (std::size_t k = 0; k < s; ++k) d[k] = rng.uniform(0.5, 2.0);
    inst.z = scale_columns(l.right_solve_transpose(inst.z), d);
  }
  return inst;
}

struct SubspaceBoundTerms {
  double distance = 0.0;
  double kappa_z = 0.0;        // cond(Z eta_i)
  double kappa_x = 0.0;        // cond(eta_i^{-1} eta_c X_c,y)
  double weight_term = 0.0;    // ||(eta_c + eta_i)(eta_c - eta_i) eta_i^{-1} Z^T theta_c Z eta_i||
  double metric_term = 0.0;    // ||delta|| ||Z eta_i||^2
  double abssep = 0.0;
  double delta_a = 0.0;
  double ideal_gram_norm = 0.0;  // ||eta_i Z^T theta_i Z eta_i||
  double rel_weight = 0.0;       // max_k |(eta_c - eta_i)_k / (eta_i)_k|
  double commuting_term = 0.0;   // ||(eta_c + eta_i)(eta_c - eta_i) Z^T theta_c Z||
};

inline SubspaceBoundTerms subspace_bound_terms(const SubspaceInstance& inst) {
  const std::size_t n = inst.z.rows(), s = inst.z.cols(), y = inst.y;
  require(inst.theta_comp.rows() == n && inst.delta.rows() == n && inst.eta_ideal.size() == s &&
              inst.eta_comp.size() == s && y > 0 && y < s,
          "subspace_bound_terms: dimension mismatch");
  SubspaceBoundTerms t;
  const DenseMatrix zi = scale_columns(inst.z, inst.eta_ideal);
  const ThinSvd szi = thin_svd(zi);
  if (!(szi.sigma.back() > 1e-12 * szi.sigma.front()))
    throw RankDeficient("subspace bound: Z diag(eta_ideal) is rank deficient");
  t.kappa_z = szi.sigma.front() / szi.sigma.back();

  const DenseMatrix gc = detail::symmetric_product(inst.z, inst.theta_comp);
  const DenseMatrix gi = detail::symmetric_product(inst.z, add(inst.theta_comp, inst.delta));
  DenseMatrix bi = scale_columns(detail::scale_rows(gi, inst.eta_ideal), inst.eta_ideal);
  DenseMatrix bc = scale_columns(detail::scale_rows(gc, inst.eta_comp), inst.eta_comp);
  bi.symmetrize();
  bc.symmetrize();
  const SymmetricEigen ei = symmetric_evd(bi), ec = symmetric_evd(bc);
  const DenseMatrix xi = ei.vectors.columns(0, y), xc = ec.vectors.columns(0, y);
  const std::span<const double> lperp(ei.values.data() + y, s - y), lcomp(ec.values.data(), y);

  t.distance = principal_angle_distance(multiply(zi, xi), multiply(scale_columns(inst.z, inst.eta_comp), xc));

  Vector ratio(s), pm(s), pm_rel(s);
  for (std::size_t k = 0; k < s; ++k) {
    const double ei_k = inst.eta_ideal[k], ec_k = inst.eta_comp[k];
    ratio[k] = ec_k / ei_k;
    pm[k] = (ec_k + ei_k) * (ec_k - ei_k);
    pm_rel[k] = pm[k] / ei_k;
    t.rel_weight = std::max(t.rel_weight, std::abs((ec_k - ei_k) / ei_k));
  }
  t.kappa_x = condition_number(detail::scale_rows(xc, ratio));
  t.weight_term = spectral_norm(scale_columns(detail::scale_rows(gc, pm_rel), inst.eta_ideal));
  t.commuting_term = spectral_norm(detail::scale_rows(gc, pm));
  t.metric_term = symmetric_spectral_norm(inst.delta) * szi.sigma.front() * szi.sigma.front();
  t.abssep = abssep(lperp, lcomp);
  t.delta_a = strong_separation(lperp, lcomp);
  t.ideal_gram_norm = symmetric_spectral_norm(bi);
  return t;
}

inline BoundCheckReport check_subspace_distance_bound(const SubspaceInstance& inst, BoundRegime regime) {
  const bool same_weights = inst.eta_comp == inst.eta_ideal;
  const bool same_metric = detail::all_zero(inst.delta);
  switch (regime) {
    case BoundRegime::FixedWeights:
      if (!same_weights) throw RegimeInapplicable("FixedWeights: computed and ideal weights differ");
      break;
    case BoundRegime::FixedMetric:
    case BoundRegime::RelBounded:
    case BoundRegime::Commuting:
      if (!same_metric) throw RegimeInapplicable(std::string(regime_name(regime)) + ": metric perturbation is nonzero");
      break;
    default: break;
  }
  if (regime == BoundRegime::Commuting) {
    const DenseMatrix g = detail::symmetric_product(inst.z, inst.theta_comp);
    const DenseMatrix eg = detail::scale_rows(g, inst.eta_ideal), ge = scale_columns(g, inst.eta_ideal);
    double emax = 0.0;
    for (double e : inst.eta_ideal) emax = std::max(emax, std::abs(e));
    if (frobenius_norm(add(eg, ge, -1.0)) > 1e-10 * emax * frobenius_norm(g))
      throw RegimeInapplicable("Commuting: weights do not commute with Z^T theta Z");
  }

  const SubspaceBoundTerms t = subspace_bound_terms(inst);
  if (regime == BoundRegime::StrongSep && !(t.delta_a > 0.0))
    throw RegimeInapplicable("StrongSep: spectra are not strongly separated");

  double rhs = 0.0;
  switch (regime) {
    case BoundRegime::General: rhs = t.kappa_z * t.kappa_x * (t.weight_term + t.metric_term) / t.abssep; break;
    case BoundRegime::FixedWeights: rhs = t.kappa_z * t.metric_term / t.abssep; break;
    case BoundRegime::FixedMetric: rhs = t.kappa_z * t.kappa_x * t.weight_term / t.abssep; break;
    case BoundRegime::RelBounded:
      rhs = t.kappa_z * t.kappa_x * t.rel_weight * (2.0 + t.rel_weight) * t.ideal_gram_norm / t.abssep;
      break;
    case BoundRegime::Commuting: rhs = t.kappa_z * t.kappa_x * t.commuting_term / t.abssep; break;
    case BoundRegime::StrongSep: rhs = t.kappa_z * t.kappa_x * (t.weight_term + t.metric_term) / t.delta_a; break;
  }
  // 0/0 when both perturbations vanish and the gap closes: the subspaces
  // coincide only if the spectra do, so keep the quotient's honest value.
  if (std::isnan(rhs)) rhs = std::numeric_limits<double>::infinity();
  return make_report(t.distance, rhs, describe(inst, regime));
}

// ---------------------------------------------------------------------------
// Conditioning of Y^T A_j Y

// One report per traced system: ||Y_j^T A_j Y_j - I|| against the sum of
// ||Y_k||^2 ||A_k - A_{k-1}|| since the last truncation.
inline std::vector<BoundCheckReport> conditioning_bound_reports(const std::vector<ConditioningTraceEntry>& trace,
                                                                double allowance = 1e-10) {
  if (trace.empty()) throw RegimeInapplicable("conditioning bound: empty trace");
  std::vector<BoundCheckReport> out;
  double sum = 0.0;
  std::size_t jbar = trace.front().jbar;
  for (const auto& e : trace) {
    if (!e.hypotheses)
      throw RegimeInapplicable("conditioning bound: system " + std::to_string(e.j) +
                               " was not solved under the bound's hypotheses");
    if (e.jbar != jbar) {
      sum = 0.0;
      jbar = e.jbar;
    }
    sum += e.y_norm_sq * e.a_diff_norm;
    std::ostringstream os;
    os << "conditioning j=" << e.j << " jbar=" << e.jbar << " y=" << e.basis_dim << " kappa=" << e.kappa;
    out.push_back(make_report(e.lhs, sum, os.str(), allowance));
  }
  return out;
}

// Aggregate over the trace: the entry with the smallest margin, satisfied
// only if every entry is.
inline BoundCheckReport check_conditioning_bound(const std::vector<ConditioningTraceEntry>& trace,
                                                 double allowance = 1e-10) {
  const auto all = conditioning_bound_reports(trace, allowance);
  // Tightest entry: largest lhs relative to its allowed value.
  const auto ratio = [](const BoundCheckReport& r) {
    const double allowed = r.rhs * (1.0 + 1e-8) + r.allowance;
    return allowed > 0.0 ? r.lhs / allowed : (r.lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  };
  BoundCheckReport worst = *std::max_element(all.begin(), all.end(),
                                             [&](const auto& a, const auto& b) { return ratio(a) < ratio(b); });
  worst.satisfied = std::all_of(all.begin(), all.end(), [](const auto& r) { return r.satisfied; });
  return worst;
}

// ---------------------------------------------------------------------------
// POD objective

// sum_i ||C(g_i s_i) - C P (g_i s_i)||^2 with P = U (C U)^+ C, the pseudometric
// projector for theta = C^T C.
inline double pod_objective_factored(const DenseMatrix& u, const DenseMatrix& s, std::span<const double> gamma,
                                     const DenseMatrix& c) {
  require(gamma.size() == s.cols() && c.cols() == s.rows(), "pod_objective: dimension mismatch");
  const DenseMatrix cs = multiply(c, s);
  DenseMatrix q(c.rows(), 0);
  if (u.cols() > 0) {
    require(u.rows() == s.rows(), "pod_objective: basis dimension mismatch");
    const DenseMatrix cu = multiply(c, u);
    if (frobenius_norm(cu) > 0.0) {
      // Rank decided against ||C|| ||U||: directions C annihilates leave only
      // roundoff in C U.
      const ThinSvd sv = thin_svd(cu);
      const double cut = static_cast<double>(std::max({cu.rows(), cu.cols(), c.cols()})) *
                         std::numeric_limits<double>::epsilon() * spectral_norm(c) * spectral_norm(u);
      for (std::size_t k = 0; k < sv.sigma.size(); ++k)
        if (sv.sigma[k] > cut) q.append_column(sv.u.col(k));
    }
  }
  double total = 0.0;
  for (std::size_t i = 0; i < s.cols(); ++i) {
    Vector r(cs.col(i).begin(), cs.col(i).end());
    for (std::size_t k = 0; k < q.cols(); ++k) axpy(-dot(q.col(k), r), q.col(k), r);
    total += gamma[i] * gamma[i] * dot(r, r);
  }
  return total;
}

// Same objective for a dense symmetric positive semidefinite theta, through
// its symmetric square root.
inline double pod_objective(const DenseMatrix& u, const DenseMatrix& s, std::span<const double> gamma,
                            const DenseMatrix& theta) {
  require(theta.rows() == theta.cols(), "pod_objective: metric not square");
  DenseMatrix sym = theta;
  sym.symmetrize();
  const SymmetricEigen e = symmetric_evd(sym);
  Vector root(e.values.size());
  for (std::size_t k = 0; k < root.size(); ++k) root[k] = std::sqrt(std::max(0.0, e.values[k]));
  const DenseMatrix half = multiply(scale_columns(e.vectors, root), e.vectors.transpose());
  return pod_objective_factored(u, s, gamma, half);
}

}  // namespace recykl
