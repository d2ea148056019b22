#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "recykl/dense.hpp"
#include "recykl/errors.hpp"

namespace recykl {

inline constexpr std::size_t kJacobiSweepLimit = 100;

// G = L L^T. A pivot that is non-positive, or that has lost all but rounding
// noise of its original diagonal, is reported as NotPositiveDefinite.
inline DenseLowerTriangular dense_cholesky(const DenseMatrix& g) {
  require(g.rows() == g.cols(), "dense_cholesky: matrix not square");
  const std::size_t n = g.rows();
  constexpr double eps = std::numeric_limits<double>::epsilon();
  DenseLowerTriangular l(n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = g(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l.at(j, k) * l.at(j, k);
    if (!(d > static_cast<double>(n + 1) * eps * std::abs(g(j, j))) || !std::isfinite(d))
      throw NotPositiveDefinite(j, "dense_cholesky: matrix not positive definite");
    const double ljj = std::sqrt(d);
    l.at(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = g(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l.at(i, k) * l.at(j, k);
      l.at(i, j) = s / ljj;
    }
  }
  return l;
}

struct SymmetricEigen {
  Vector values;        // descending
  DenseMatrix vectors;  // orthonormal columns, matching order
};

namespace detail {

inline void sort_eigen_descending(Vector& values, DenseMatrix& vectors) {
  const std::size_t m = values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  Vector v(m);
  DenseMatrix x(vectors.rows(), m);
  for (std::size_t k = 0; k < m; ++k) {
    v[k] = values[order[k]];
    std::copy(vectors.col(order[k]).begin(), vectors.col(order[k]).end(), x.col(k).begin());
  }
  values = std::move(v);
  vectors = std::move(x);
}

}  // namespace detail

// Cyclic Jacobi. A rotation is skipped when the off-diagonal entry is
// negligible relative to its diagonal pair; a sweep without rotations ends
// the iteration.
inline SymmetricEigen symmetric_evd(const DenseMatrix& g) {
  require(g.rows() == g.cols(), "symmetric_evd: matrix not square");
  const std::size_t m = g.rows();
  constexpr double eps = std::numeric_limits<double>::epsilon();
  DenseMatrix a = g;
  a.symmetrize();
  DenseMatrix v = DenseMatrix::identity(m);
  const double fro = frobenius_norm(a);
  bool converged = (m <= 1) || fro == 0.0;
  for (std::size_t sweep = 0; sweep < kJacobiSweepLimit && !converged; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < m; ++p) {
      for (std::size_t q = p + 1; q < m; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= eps * std::sqrt(std::abs(a(p, p) * a(q, q))) ||
            std::abs(apq) <= 1e-3 * eps * eps * fro)
          continue;
        rotated = true;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(1.0 + theta * theta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (std::size_t k = 0; k < m; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < m; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        auto vp = v.col(p);
        auto vq = v.col(q);
        for (std::size_t k = 0; k < m; ++k) {
          const double x = vp[k], y = vq[k];
          vp[k] = c * x - s * y;
          vq[k] = s * x + c * y;
        }
      }
    }
    if (!rotated) converged = true;
  }
  if (!converged) throw IterationLimit("symmetric_evd: Jacobi sweep limit reached");
  SymmetricEigen out;
  out.values.resize(m);
  for (std::size_t i = 0; i < m; ++i) out.values[i] = a(i, i);
  out.vectors = std::move(v);
  detail::sort_eigen_descending(out.values, out.vectors);
  return out;
}

struct ThinSvd {
  DenseMatrix u;  // p x r, orthonormal
  Vector sigma;   // r values, descending
  DenseMatrix v;  // m x r, orthonormal
};

namespace detail {

// Extend the columns of q flagged in `fill` to an orthonormal set using
// coordinate vectors, two passes of Gram-Schmidt each.
inline void complete_orthonormal(DenseMatrix& q, const std::vector<bool>& fill) {
  const std::size_t p = q.rows();
  std::size_t next_unit = 0;
  for (std::size_t j = 0; j < q.cols(); ++j) {
    if (!fill[j]) continue;
    while (next_unit < p) {
      Vector e(p, 0.0);
      e[next_unit++] = 1.0;
      for (int pass = 0; pass < 2; ++pass)
        for (std::size_t k = 0; k < q.cols(); ++k) {
          if (k == j || (fill[k] && k > j)) continue;
          axpy(-dot(q.col(k), e), q.col(k), e);
        }
      const double nrm = norm2(e);
      if (nrm > 0.5) {
        scale(1.0 / nrm, e);
        std::copy(e.begin(), e.end(), q.col(j).begin());
        break;
      }
    }
  }
}

// One-sided Jacobi on the columns of b (rows >= cols).
inline ThinSvd one_sided_jacobi(const DenseMatrix& b) {
  const std::size_t p = b.rows(), m = b.cols();
  constexpr double eps = std::numeric_limits<double>::epsilon();
  DenseMatrix u = b;
  DenseMatrix v = DenseMatrix::identity(m);
  bool converged = m <= 1;
  for (std::size_t sweep = 0; sweep < kJacobiSweepLimit && !converged; ++sweep) {
    bool rotated = false;
    for (std::size_t i = 0; i + 1 < m; ++i) {
      for (std::size_t j = i + 1; j < m; ++j) {
        auto ui = u.col(i);
        auto uj = u.col(j);
        const double alpha = dot(ui, ui), beta = dot(uj, uj), gamma = dot(ui, uj);
        if (gamma == 0.0 || std::abs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t k = 0; k < p; ++k) {
          const double x = ui[k], y = uj[k];
          ui[k] = c * x - s * y;
          uj[k] = s * x + c * y;
        }
        auto vi = v.col(i);
        auto vj = v.col(j);
        for (std::size_t k = 0; k < m; ++k) {
          const double x = vi[k], y = vj[k];
          vi[k] = c * x - s * y;
          vj[k] = s * x + c * y;
        }
      }
    }
    if (!rotated) converged = true;
  }
  if (!converged) throw IterationLimit("thin_svd: Jacobi sweep limit reached");

  ThinSvd out;
  out.sigma.resize(m);
  for (std::size_t j = 0; j < m; ++j) out.sigma[j] = norm2(u.col(j));
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t c) { return out.sigma[a] > out.sigma[c]; });
  const double smax = m ? out.sigma[order[0]] : 0.0;
  const double tiny = static_cast<double>(std::max(p, m)) * eps * smax;
  out.u = DenseMatrix(p, m);
  out.v = DenseMatrix(m, m);
  Vector sorted(m);
  std::vector<bool> fill(m, false);
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t j = order[k];
    sorted[k] = out.sigma[j];
    std::copy(v.col(j).begin(), v.col(j).end(), out.v.col(k).begin());
    if (sorted[k] > tiny && sorted[k] > 0.0) {
      auto dst = out.u.col(k);
      std::copy(u.col(j).begin(), u.col(j).end(), dst.begin());
      scale(1.0 / sorted[k], dst);
    } else {
      fill[k] = true;
    }
  }
  out.sigma = std::move(sorted);
  if (std::any_of(fill.begin(), fill.end(), [](bool f) { return f; })) complete_orthonormal(out.u, fill);
  return out;
}

}  // namespace detail

// B = U diag(sigma) V^T with r = min(rows, cols).
inline ThinSvd thin_svd(const DenseMatrix& b) {
  if (b.rows() >= b.cols()) return detail::one_sided_jacobi(b);
  ThinSvd t = detail::one_sided_jacobi(b.transpose());
  std::swap(t.u, t.v);
  return t;
}

struct GeneralizedEigen {
  Vector values;        // descending
  DenseMatrix vectors;  // M-orthonormal columns
};

// K G = M G Lambda for symmetric K and SPD M, by reduction through the
// Cholesky factor of M.
inline GeneralizedEigen generalized_symmetric_evd(const DenseMatrix& k, const DenseMatrix& m) {
  require(k.rows() == k.cols() && m.rows() == m.cols() && k.rows() == m.rows(),
          "generalized_symmetric_evd: dimension mismatch");
  const std::size_t n = k.rows();
  const DenseLowerTriangular l = dense_cholesky(m);
  DenseMatrix x(n, n);  // L^{-1} K
  for (std::size_t j = 0; j < n; ++j) {
    Vector c = l.solve_lower(k.col(j));
    std::copy(c.begin(), c.end(), x.col(j).begin());
  }
  DenseMatrix xt = x.transpose();  // K L^{-T}
  DenseMatrix c(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    Vector col = l.solve_lower(xt.col(j));
    std::copy(col.begin(), col.end(), c.col(j).begin());
  }
  c.symmetrize();
  SymmetricEigen e = symmetric_evd(c);
  GeneralizedEigen out;
  out.values = std::move(e.values);
  out.vectors = DenseMatrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    Vector g = l.solve_upper(e.vectors.col(j));
    std::copy(g.begin(), g.end(), out.vectors.col(j).begin());
  }
  return out;
}

inline double spectral_norm(const DenseMatrix& a) {
  if (a.rows() == 0 || a.cols() == 0) return 0.0;
  return thin_svd(a).sigma.front();
}

// max |lambda| of a symmetric matrix.
inline double symmetric_spectral_norm(const DenseMatrix& a) {
  if (a.rows() == 0) return 0.0;
  const SymmetricEigen e = symmetric_evd(a);
  return std::max(std::abs(e.values.front()), std::abs(e.values.back()));
}

// sigma_max / sigma_min of a matrix with full column rank.
inline double condition_number(const DenseMatrix& a) {
  if (a.cols() == 0) return 1.0;
  const ThinSvd s = thin_svd(a);
  const double smin = s.sigma.back();
  if (smin <= 0.0) return std::numeric_limits<double>::infinity();
  return s.sigma.front() / smin;
}

// Orthonormal basis for range(U); RankDeficient when sigma_min falls below
// 1e-12 sigma_max.
inline DenseMatrix orthonormal_basis(const DenseMatrix& u) {
  if (u.cols() == 0) return u;
  require(u.rows() >= u.cols(), "orthonormal_basis: more columns than rows");
  ThinSvd s = thin_svd(u);
  if (!(s.sigma.back() > 1e-12 * s.sigma.front()))
    throw RankDeficient("orthonormal_basis: basis is numerically rank deficient");
  return std::move(s.u);
}

// d(U, V) = max over unit u in range(U) of the distance to range(V), i.e.
// sin of the largest principal angle. Evaluated as the largest singular value
// of (I - Q_V Q_V^T) Q_U so small angles keep full relative accuracy.
inline double principal_angle_distance(const DenseMatrix& u, const DenseMatrix& v) {
  require(u.rows() == v.rows(), "principal_angle_distance: ambient dimension mismatch");
  if (u.cols() == 0) return 0.0;
  const DenseMatrix qu = orthonormal_basis(u);
  if (v.cols() == 0) return 1.0;
  const DenseMatrix qv = orthonormal_basis(v);
  const DenseMatrix c = multiply_tn(qv, qu);
  const DenseMatrix r = add(qu, multiply(qv, c), -1.0);
  return std::clamp(spectral_norm(r), 0.0, 1.0);
}

}  // namespace recykl
