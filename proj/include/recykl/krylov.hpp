#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "recykl/dense.hpp"
#include "recykl/dense_linalg.hpp"
#include "recykl/errors.hpp"
#include "recykl/instrumentation.hpp"
#include "recykl/precond.hpp"
#include "recykl/sparse.hpp"

namespace recykl {

// How the next search direction is made A-orthogonal to earlier ones.
//   cg          : three-term recurrence, beta = (r', z') / (r, z)
//   fom         : explicit A-orthogonalization against every earlier direction
//                 (two modified Gram-Schmidt passes)
//   fom_literal : every earlier direction weighted by (r', z') / (r_i, z_i)
enum class OrthogonalizationMode { cg, fom, fom_literal };

class LinearOperator {
 public:
  virtual ~LinearOperator() = default;
  virtual std::size_t size() const = 0;
  virtual void apply(std::span<const double> x, std::span<double> y) = 0;
};

class SparseOperator final : public LinearOperator {
 public:
  SparseOperator(const SparseSpdMatrix& a, Counters* sink) : a_(a), sink_(sink) {}
  std::size_t size() const override { return a_.n(); }
  void apply(std::span<const double> x, std::span<double> y) override {
    a_.multiply(x, y);
    count_matvec(sink_);
  }

 private:
  const SparseSpdMatrix& a_;
  Counters* sink_;
};

// p -> Y^T (A (Y p)) without ever forming Y^T A Y. With recording on, every
// full-space product A (Y p) is kept so callers can reuse A V for the
// directions generated in reduced coordinates.
class ReducedOperator final : public LinearOperator {
 public:
  ReducedOperator(const DenseMatrix& y, const SparseSpdMatrix& a, Counters* sink, bool record = false)
      : y_(y), a_(a), sink_(sink), record_(record), recorded_(y.rows(), 0), full_(y.rows()) {}

  std::size_t size() const override { return y_.cols(); }

  void apply(std::span<const double> p, std::span<double> out) override {
    const Vector yp = gemv(y_, p);
    a_.multiply(yp, full_);
    count_matvec(sink_);
    for (std::size_t j = 0; j < y_.cols(); ++j) out[j] = dot(y_.col(j), full_);
    if (record_) recorded_.append_column(full_);
  }

  const DenseMatrix& recorded_products() const { return recorded_; }

 private:
  const DenseMatrix& y_;
  const SparseSpdMatrix& a_;
  Counters* sink_;
  bool record_;
  DenseMatrix recorded_;
  Vector full_;
};

// The augmenting space Y of the solver, seen through the three things the
// iteration needs: the reduced solve, Y c, and A Y c.
class Augmentation {
 public:
  virtual ~Augmentation() = default;
  virtual std::size_t size() const = 0;
  // u with (Y^T A Y) u = Y^T A z.
  virtual Vector solve(std::span<const double> z) = 0;
  virtual void expand(std::span<const double> c, std::span<double> out) const = 0;
  virtual void expand_operator(std::span<const double> c, std::span<double> out) = 0;
};

class NoAugmentation final : public Augmentation {
 public:
  std::size_t size() const override { return 0; }
  Vector solve(std::span<const double>) override { return {}; }
  void expand(std::span<const double>, std::span<double> out) const override {
    std::fill(out.begin(), out.end(), 0.0);
  }
  void expand_operator(std::span<const double>, std::span<double> out) override {
    std::fill(out.begin(), out.end(), 0.0);
  }
};

// Y, A Y and a factor of Y^T A Y held explicitly; reduced solves are direct.
class FactoredAugmentation final : public Augmentation {
 public:
  FactoredAugmentation(DenseMatrix y, DenseMatrix ay, BlockDiagonalFactor factor)
      : y_(std::move(y)), ay_(std::move(ay)), factor_(std::move(factor)) {
    require(y_.rows() == ay_.rows() && y_.cols() == ay_.cols() && factor_.order() == y_.cols(),
            "FactoredAugmentation: inconsistent parts");
  }

  // Computes A Y (counted) and factors Y^T A Y.
  static FactoredAugmentation from_matrix(const SparseSpdMatrix& a, const DenseMatrix& y, Counters* sink) {
    DenseMatrix ay = spmm(a, y, sink);
    const DenseMatrix g = assemble_reduced(y, ay, sink);
    return FactoredAugmentation(y, std::move(ay), BlockDiagonalFactor(dense_cholesky(g), {}));
  }

  std::size_t size() const override { return y_.cols(); }
  std::size_t dim() const { return y_.rows(); }

  Vector solve(std::span<const double> z) override { return factor_.solve(gemv_t(ay_, z)); }

  // Galerkin coefficients (Y^T A Y)^{-1} Y^T b.
  Vector galerkin(std::span<const double> b) const { return factor_.solve(gemv_t(y_, b)); }

  void expand(std::span<const double> c, std::span<double> out) const override {
    const Vector v = gemv(y_, c);
    std::copy(v.begin(), v.end(), out.begin());
  }
  void expand_operator(std::span<const double> c, std::span<double> out) override {
    const Vector v = gemv(ay_, c);
    std::copy(v.begin(), v.end(), out.begin());
  }

  // Appends directions that are A-orthogonal to everything present, with
  // Gram diagonal gamma.
  void append_orthogonal(const DenseMatrix& v, const DenseMatrix& av, std::span<const double> gamma) {
    y_.append_columns(v);
    ay_.append_columns(av);
    factor_.append_diagonal(gamma);
  }

  const DenseMatrix& basis() const { return y_; }
  const DenseMatrix& products() const { return ay_; }
  const BlockDiagonalFactor& factor() const { return factor_; }

 private:
  DenseMatrix y_;
  DenseMatrix ay_;
  BlockDiagonalFactor factor_;
};

using PreconditionerFn = std::function<Vector(std::span<const double>)>;

inline PreconditionerFn preconditioner_fn(const Preconditioner& m, Counters* sink) {
  return [&m, sink](std::span<const double> r) { return m.apply(r, sink); };
}

struct PcgOptions {
  double tol = 1e-8;
  bool relative = false;      // threshold tol * ||b|| instead of tol
  std::size_t max_iter = 0;   // 0 means the operator dimension
  OrthogonalizationMode mode = OrthogonalizationMode::cg;
  bool throw_on_failure = true;
  // Called with (k, current iterate, residual norm) after setup and after
  // every iteration.
  std::function<void(std::size_t, std::span<const double>, double)> observer;
};

struct AugmentedPcgResult {
  std::size_t k = 0;
  Vector alphas;             // step lengths, the coefficients of x in V
  DenseMatrix directions;    // V, one column per iteration
  DenseMatrix op_directions; // A V
  Vector gamma;              // diag(V^T A V)
  Vector residual_history;   // ||r_0||, ..., ||r_k||
  Vector x;                  // Y yhat0 + V alphas
  bool converged = false;
  bool broke_down = false;
};

class NotConverged : public Error {
 public:
  NotConverged(AugmentedPcgResult partial, const std::string& what)
      : Error(what), partial_(std::move(partial)) {}
  const AugmentedPcgResult& partial() const noexcept { return partial_; }

 private:
  AugmentedPcgResult partial_;
};

// Preconditioned CG augmented by Y: the start is Y yhat0, every direction is
// projected A-orthogonally against range(Y) through aug.solve(), and the
// iteration stops once ||r|| <= tol. The residual is tested before the
// preconditioner is applied, so with k >= 1 iterations M is applied exactly
// k times.
inline AugmentedPcgResult augmented_pcg(LinearOperator& op, std::span<const double> b,
                                        std::span<const double> yhat0, Augmentation& aug,
                                        const PreconditionerFn& precond, const PcgOptions& opt) {
  const std::size_t n = op.size();
  require(b.size() == n, "augmented_pcg: rhs length mismatch");
  require(yhat0.size() == aug.size(), "augmented_pcg: start coefficients do not match basis");
  const std::size_t max_iter = opt.max_iter ? opt.max_iter : std::max<std::size_t>(n, 1);

  AugmentedPcgResult res;
  res.directions = DenseMatrix(n, 0);
  res.op_directions = DenseMatrix(n, 0);
  Vector x(n, 0.0), r(b.begin(), b.end()), work(n);
  if (aug.size() > 0 && std::any_of(yhat0.begin(), yhat0.end(), [](double v) { return v != 0.0; })) {
    aug.expand(yhat0, x);
    aug.expand_operator(yhat0, work);
    axpy(-1.0, work, r);
  }
  const double threshold = opt.relative ? opt.tol * norm2(b) : opt.tol;
  double rn = norm2(r);
  res.residual_history.push_back(rn);
  if (opt.observer) opt.observer(0, x, rn);
  if (rn <= threshold) {
    res.converged = true;
    res.x = std::move(x);
    return res;
  }

  auto apply_m = [&](std::span<const double> v) {
    return precond ? precond(v) : Vector(v.begin(), v.end());
  };
  auto project = [&](Vector& z) {
    if (aug.size() == 0) return;
    const Vector u = aug.solve(z);
    aug.expand(u, work);
    axpy(-1.0, work, z);
  };

  Vector z = apply_m(r);
  double rz = dot(r, z);
  Vector rz_history{rz};
  Vector p = z;
  project(p);
  double znorm = norm2(z);
  Vector ap(n);

  for (;;) {
    op.apply(p, ap);
    const double pp = dot(p, p);
    const double gamma = dot(p, ap);
    // A direction wiped out by the projection is noise even if its Rayleigh
    // quotient looks healthy.
    if (!(gamma > 1e-14 * pp) || !(std::sqrt(pp) > 1e-14 * znorm)) {
      res.broke_down = true;
      res.x = std::move(x);
      if (opt.throw_on_failure) throw Breakdown(res.k, "augmented_pcg: p^T A p vanished");
      return res;
    }
    const double alpha = (opt.mode == OrthogonalizationMode::fom ? dot(p, r) : rz) / gamma;
    axpy(alpha, p, x);
    axpy(-alpha, ap, r);
    res.directions.append_column(p);
    res.op_directions.append_column(ap);
    res.gamma.push_back(gamma);
    res.alphas.push_back(alpha);
    ++res.k;
    rn = norm2(r);
    res.residual_history.push_back(rn);
    if (opt.observer) opt.observer(res.k, x, rn);
    if (rn <= threshold) {
      res.converged = true;
      break;
    }
    if (res.k >= max_iter) break;

    z = apply_m(r);
    znorm = norm2(z);
    const double rz_new = dot(r, z);
    Vector w = z;
    project(w);
    switch (opt.mode) {
      case OrthogonalizationMode::cg:
        axpy(rz_new / rz, p, w);
        p = std::move(w);
        break;
      case OrthogonalizationMode::fom:
        for (int pass = 0; pass < 2; ++pass)
          for (std::size_t i = 0; i < res.k; ++i)
            axpy(-dot(res.op_directions.col(i), w) / res.gamma[i], res.directions.col(i), w);
        p = std::move(w);
        break;
      case OrthogonalizationMode::fom_literal:
        for (std::size_t i = 0; i < res.k; ++i) axpy(rz_new / rz_history[i], res.directions.col(i), w);
        p = std::move(w);
        break;
    }
    rz_history.push_back(rz_new);
    rz = rz_new;
  }
  res.x = std::move(x);
  if (!res.converged && opt.throw_on_failure)
    throw NotConverged(res, "augmented_pcg: iteration limit reached without convergence");
  return res;
}

// Plain PCG, the same iteration with an empty augmenting basis.
inline AugmentedPcgResult pcg(const SparseSpdMatrix& a, std::span<const double> b, std::span<const double> x0,
                              const PreconditionerFn& precond, const PcgOptions& opt, Counters* sink = nullptr) {
  require(b.size() == a.n() && (x0.empty() || x0.size() == a.n()), "pcg: length mismatch");
  const bool zero_start = std::all_of(x0.begin(), x0.end(), [](double v) { return v == 0.0; });
  Vector rhs(b.begin(), b.end());
  if (!zero_start) axpy(-1.0, spmv(a, x0, sink), rhs);
  SparseOperator op(a, sink);
  NoAugmentation none;
  AugmentedPcgResult res = augmented_pcg(op, rhs, {}, none, precond, opt);
  if (!zero_start) axpy(1.0, x0, res.x);
  return res;
}

struct DirectReducedSolution {
  Vector what;               // coefficients in W
  DenseLowerTriangular rhat; // W^T A W = rhat rhat^T
  DenseMatrix aw;            // A W, kept for later stages
};

// Galerkin solve over range(W): (W^T A W) what = W^T b.
inline DirectReducedSolution direct_reduced_solve(const SparseSpdMatrix& a, std::span<const double> b,
                                                  const DenseMatrix& w, Counters* sink = nullptr) {
  require(b.size() == a.n() && (w.cols() == 0 || w.rows() == a.n()), "direct_reduced_solve: dimension mismatch");
  DirectReducedSolution out;
  out.aw = DenseMatrix(a.n(), 0);
  if (w.cols() == 0) return out;
  out.aw = spmm(a, w, sink);
  const DenseMatrix ahat = assemble_reduced(w, out.aw, sink);
  out.rhat = dense_cholesky(ahat);
  out.what = out.rhat.solve(gemv_t(w, b));
  return out;
}

}  // namespace recykl
