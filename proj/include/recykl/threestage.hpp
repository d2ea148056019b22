#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "recykl/dense.hpp"
#include "recykl/dense_linalg.hpp"
#include "recykl/errors.hpp"
#include "recykl/instrumentation.hpp"
#include "recykl/krylov.hpp"
#include "recykl/precond.hpp"
#include "recykl/problems.hpp"
#include "recykl/rng.hpp"
#include "recykl/sparse.hpp"
#include "recykl/truncation.hpp"
#include "recykl/weights.hpp"

namespace recykl {

struct StageTolerances {
  double eps = 0.0;        // stage 3, on ||b - A x||
  double eps_hat = 0.0;    // stage 2, on the reduced residual
  double eps_inner = 0.0;  // inner reduced solves of the phi = 1 stage 3
};

// eps_hat = f * eps, with f switching to a tighter factor once eps drops
// below a threshold; same for the inner tolerance.
struct ToleranceSchedule {
  double stage2_factor = 1e-4;
  double stage2_tight_factor = 1e-4;
  double stage2_switch = 0.0;
  double inner_factor = 1e-2;
  double inner_tight_factor = 1e-2;
  double inner_switch = 0.0;

  StageTolerances at(double eps) const {
    StageTolerances t;
    t.eps = eps;
    t.eps_hat = eps * (eps < stage2_switch ? stage2_tight_factor : stage2_factor);
    t.eps_inner = eps * (eps < inner_switch ? inner_tight_factor : inner_factor);
    return t;
  }

  static ToleranceSchedule standard() { return {}; }
  static ToleranceSchedule pod_it_stg1() { return {1e-4, 1e-5, 1e-3, 1e-2, 1e-2, 0.0}; }
  static ToleranceSchedule pod_it_mixed() { return {1e-4, 1e-6, 1e-2, 1e-2, 1e-2, 0.0}; }
  static ToleranceSchedule pod_it_stg2() { return {1e-4, 1e-7, 1e-2, 1e-2, 1e-3, 1e-3}; }
};

// Called after stage 1, after stage 2 and after every stage-3 iteration with
// the current full-space iterate and the counters of this solve so far.
using SolveObserver = std::function<void(int stage, std::span<const double> x, const CounterSnapshot& cost)>;

struct ThreeStageConfig {
  TruncationConfig truncation;
  PreconditionerSpec precond;
  OrthogonalizationMode mode = OrthogonalizationMode::fom;
  bool inner_iterative = false;  // phi = 1
  bool recycle = true;           // false: plain PCG on every system
  std::optional<double> tol;     // overrides the per-system tolerance
  bool relative = false;         // tolerance scaled by ||b_j||
  std::size_t max_iter = 0;      // stage 3; 0 means n
  const DenseMatrix* output_matrix = nullptr;
  bool diagnostics = false;
  bool keep_subspaces = false;  // copy the stage-3 spaces into the report
  bool throw_on_failure = true;
  ToleranceSchedule schedule;
  SolveObserver observer;
};

struct RecycleState {
  DenseMatrix y;                       // A-orthonormal (up to drift) recycled basis
  std::vector<std::size_t> stage1;     // columns of y forming W
  std::size_t last_truncation = 0;     // jbar
  std::size_t systems_solved = 0;      // j of the last solve
  bool full_stage1_at_truncation = true;  // W = Y after the last truncation
  WeightHistory history;

  std::size_t dim() const { return y.cols(); }
};

struct SolveReport {
  std::size_t j = 0;
  std::uint64_t matvecs = 0;
  std::uint64_t precond_applications = 0;
  std::uint64_t stage2_assemblies = 0;
  std::size_t stage1_dim = 0;
  std::size_t basis_dim = 0;
  std::size_t stage2_iters = 0;
  std::size_t stage3_iters = 0;
  std::size_t inner_iters = 0;
  double wall_ms = 0.0;
  double tol = 0.0;
  double final_residual = 0.0;
  bool converged = false;
  bool truncated = false;
  Vector residual_history;
  std::optional<double> reduced_condition;
  DenseMatrix augmenting_basis;  // with keep_subspaces: stage-3 augmenting space
  DenseMatrix directions;        // with keep_subspaces: stage-3 V
};

// Per-system data for the conditioning bound, recorded before system j is
// solved with the basis Y_j it receives.
struct ConditioningTraceEntry {
  std::size_t j = 0;
  std::size_t jbar = 0;
  std::size_t basis_dim = 0;
  double lhs = 0.0;          // ||Y_j^T A_j Y_j - I||_2
  double y_norm_sq = 0.0;    // ||Y_j||_2^2
  double a_diff_norm = 0.0;  // ||A_j - A_{j-1}||_2, 0 for j = 1
  double kappa = 1.0;        // cond(Y_j^T A_j Y_j)
  // rho = 1 with W = Y at the last truncation, or phi = 1 with zero stage-2
  // and inner tolerances.
  bool hypotheses = false;
};

class SystemNotConverged : public Error {
 public:
  SystemNotConverged(SolveReport report, const std::string& what) : Error(what), report_(std::move(report)) {}
  const SolveReport& report() const noexcept { return report_; }

 private:
  SolveReport report_;
};

// Y as the augmenting space of stage 3 with phi = 1: every projection
// (Y^T A Y) u = Y^T A z is solved by an inner augmented CG in reduced
// coordinates whose augmenting set collects stage-1/stage-2 directions and
// the directions of all earlier inner solves, so the reduced factor stays
// block diagonal and is never formed.
class InnerIterativeAugmentation final : public Augmentation {
 public:
  InnerIterativeAugmentation(const DenseMatrix& y, const SparseSpdMatrix& a, Counters* sink,
                             FactoredAugmentation inner, double tol, OrthogonalizationMode mode)
      : y_(y), a_(a), sink_(sink), inner_(std::move(inner)), tol_(tol), mode_(mode) {}

  std::size_t size() const override { return y_.cols(); }

  Vector solve(std::span<const double> z) override {
    const Vector az = spmv(a_, z, sink_);
    const Vector g = gemv_t(y_, az);
    ReducedOperator op(y_, a_, sink_);
    const Vector start = inner_.galerkin(g);
    PcgOptions opt;
    opt.tol = tol_;
    opt.max_iter = y_.cols();
    opt.mode = mode_;
    opt.throw_on_failure = false;
    AugmentedPcgResult r = augmented_pcg(op, g, start, inner_, PreconditionerFn{}, opt);
    if (r.k > 0) inner_.append_orthogonal(r.directions, r.op_directions, r.gamma);
    iterations_ += r.k;
    ++solves_;
    return std::move(r.x);
  }

  void expand(std::span<const double> c, std::span<double> out) const override {
    const Vector v = gemv(y_, c);
    std::copy(v.begin(), v.end(), out.begin());
  }

  void expand_operator(std::span<const double> c, std::span<double> out) override {
    if (known_c_ && std::equal(c.begin(), c.end(), known_c_->begin(), known_c_->end())) {
      std::copy(known_ayc_.begin(), known_ayc_.end(), out.begin());
      return;
    }
    const Vector v = spmv(a_, gemv(y_, c), sink_);
    std::copy(v.begin(), v.end(), out.begin());
  }

  // A Y c for a c whose product is already available from earlier stages.
  void set_known_product(Vector c, Vector ayc) {
    known_c_ = std::move(c);
    known_ayc_ = std::move(ayc);
  }

  std::size_t inner_iterations() const { return iterations_; }
  std::size_t inner_solves() const { return solves_; }
  std::size_t inner_set_size() const { return inner_.size(); }

 private:
  const DenseMatrix& y_;
  const SparseSpdMatrix& a_;
  Counters* sink_;
  FactoredAugmentation inner_;
  double tol_;
  OrthogonalizationMode mode_;
  std::optional<Vector> known_c_;
  Vector known_ayc_;
  std::size_t iterations_ = 0;
  std::size_t solves_ = 0;
};

namespace detail {

inline DenseMatrix selection_matrix(std::size_t rows, const std::vector<std::size_t>& idx) {
  DenseMatrix e(rows, idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) e(idx[k], k) = 1.0;
  return e;
}

inline std::vector<std::size_t> iota(std::size_t first, std::size_t count) {
  std::vector<std::size_t> v(count);
  for (std::size_t i = 0; i < count; ++i) v[i] = first + i;
  return v;
}

}  // namespace detail

// Appends the stage-3 directions V (scaled to unit A-norm) to Y, admits some
// of them to W, and truncates when the cap is exceeded. yhat are the Y
// coordinates of x - xguess before the stage-3 increment.
inline bool update_basis(RecycleState& st, const SparseSpdMatrix& a, const AugmentedPcgResult& r3,
                         std::span<const double> yhat, const ThreeStageConfig& cfg, Counters* sink) {
  const TruncationConfig& tc = cfg.truncation;
  const std::size_t n = a.n();
  if (st.y.rows() != n) st.y = DenseMatrix(n, 0);
  const std::size_t y0 = st.y.cols();

  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < r3.k; ++i)
    if (r3.gamma[i] > 0.0) keep.push_back(i);
  double tsum = 0.0;
  for (std::size_t i : keep) tsum += r3.gamma[i];

  Vector eta(yhat.begin(), yhat.end());
  eta.resize(y0, 0.0);
  for (std::size_t i : keep) {
    Vector v(r3.directions.col(i).begin(), r3.directions.col(i).end());
    const double s = std::sqrt(r3.gamma[i]);
    scale(1.0 / s, v);
    st.y.append_column(v);
    eta.push_back(s * r3.alphas[i]);
  }
  for (std::size_t m = 0; m < keep.size(); ++m) {
    const std::size_t i = keep[m];
    const bool admit = tc.stage1_threshold >= 1.0 || r3.gamma[i] / tsum > tc.stage1_threshold;
    if (admit) st.stage1.push_back(y0 + m);
  }
  st.history.record(std::move(eta));

  if (tc.strategy == TruncationStrategy::none || st.y.cols() <= tc.storage_cap) return false;

  const std::size_t j = st.systems_solved;
  Vector weights = tc.weight_scheme() == WeightScheme::rbf ? weights_rbf(st.history, j - st.last_truncation)
                                                           : weights_previous(st.history);
  weights.resize(st.y.cols(), 0.0);
  if (std::all_of(weights.begin(), weights.end(), [](double w) { return w == 0.0; }))
    std::fill(weights.begin(), weights.end(), 1.0);

  // The retained basis never exceeds the storage cap.
  TruncationConfig capped = tc;
  capped.retain_dim = std::min(tc.retain_dim.value_or(tc.storage_cap), tc.storage_cap);
  TruncationOutcome out = tc.strategy == TruncationStrategy::deflation
                              ? deflation_compress(st.y, a, std::min(tc.deflation_keep, tc.storage_cap), capped, sink)
                              : pod_compress(st.y, weights, capped, a, cfg.output_matrix, sink);
  if (tc.keep_history_across_truncation) {
    if (!out.z_gram) {
      DenseMatrix g = multiply_tn(st.y, spmm(a, st.y, sink));
      g.symmetrize();
      out.z_gram = std::move(g);
    }
    st.history.reexpress(out.map, *out.z_gram);
  } else {
    st.history.reset();
  }
  st.y = std::move(out.y_new);
  st.stage1 = detail::iota(0, out.stage1_width);
  st.full_stage1_at_truncation = out.stage1_width == st.y.cols();
  st.last_truncation = j;
  return true;
}

struct SolveOutcome {
  Vector x;
  SolveReport report;
};

// One system of the sequence: stage 1 Galerkin over W, stage 2 augmented CG
// on Y^T A Y applied implicitly, stage 3 augmented PCG in the full space,
// then the basis update.
inline SolveOutcome solve_system(const LinearSystem& sys, RecycleState& st, const ThreeStageConfig& cfg,
                                 std::size_t j = 0) {
  cfg.truncation.validate();
  const SparseSpdMatrix& a = sys.a;
  const std::size_t n = a.n();
  require(sys.b.size() == n, "solve_system: rhs length mismatch");
  require(st.y.cols() == 0 || st.y.rows() == n, "solve_system: basis has the wrong dimension");
  const auto t0 = std::chrono::steady_clock::now();
  Counters counters;
  Counters* sink = &counters;
  st.systems_solved = j ? j : st.systems_solved + 1;

  SolveReport rep;
  rep.j = st.systems_solved;
  const double eps = (cfg.tol ? *cfg.tol : sys.tol) * (cfg.relative ? norm2(sys.b) : 1.0);
  const StageTolerances tols = cfg.schedule.at(eps);
  rep.tol = eps;

  if (!cfg.recycle) {
    st.y = DenseMatrix(n, 0);
    st.stage1.clear();
  }
  const std::size_t ydim = st.y.cols();
  const std::size_t wdim = st.stage1.size();
  rep.basis_dim = ydim;
  rep.stage1_dim = wdim;

  if (cfg.diagnostics && ydim > 0) {
    DenseMatrix g(ydim, ydim);
    Vector tmp(n);
    for (std::size_t c = 0; c < ydim; ++c) {
      a.multiply(st.y.col(c), tmp);
      for (std::size_t r = 0; r < ydim; ++r) g(r, c) = dot(st.y.col(r), tmp);
    }
    g.symmetrize();
    rep.reduced_condition = condition_number(g);
  }

  Vector rbar(sys.b.begin(), sys.b.end());
  const bool has_guess = std::any_of(sys.xguess.begin(), sys.xguess.end(), [](double v) { return v != 0.0; });
  if (has_guess) axpy(-1.0, spmv(a, sys.xguess, sink), rbar);
  auto full_x = [&](Vector x) {
    if (has_guess) axpy(1.0, sys.xguess, x);
    return x;
  };
  auto notify = [&](int stage, const Vector& x) {
    if (cfg.observer) cfg.observer(stage, full_x(x), counters.snapshot());
  };

  // Stage 1.
  const DenseMatrix w = st.y.select_columns(st.stage1);
  DirectReducedSolution s1 = direct_reduced_solve(a, rbar, w, sink);
  if (wdim > 0) notify(1, gemv(w, s1.what));

  // Stage 2.
  Vector yhat(ydim, 0.0);  // Y coordinates of the stage-1/2 solution
  for (std::size_t k = 0; k < wdim; ++k) yhat[st.stage1[k]] = s1.what[k];
  Vector ay_yhat = wdim ? gemv(s1.aw, s1.what) : Vector(n, 0.0);
  DenseMatrix vhat(n, 0), avhat(n, 0);
  DenseMatrix phat(ydim, 0), bphat(ydim, 0);
  Vector gamma_hat, alphas_hat;
  DenseMatrix bw;
  if (ydim > 0) bw = multiply_tn(st.y, s1.aw);
  if (ydim > wdim) {
    const CounterSnapshot before = counters.snapshot();
    ReducedOperator op(st.y, a, sink, true);
    FactoredAugmentation aug(detail::selection_matrix(ydim, st.stage1), bw,
                             BlockDiagonalFactor(s1.rhat, {}));
    PcgOptions opt;
    opt.tol = tols.eps_hat;
    opt.max_iter = ydim;
    opt.mode = cfg.mode;
    opt.throw_on_failure = false;
    const Vector ghat = gemv_t(st.y, rbar);
    AugmentedPcgResult r2 = augmented_pcg(op, ghat, s1.what, aug, PreconditionerFn{}, opt);
    rep.stage2_assemblies = (counters.snapshot() - before).reduced_assemblies;
    rep.stage2_iters = r2.k;
    phat = r2.directions;
    bphat = r2.op_directions;
    gamma_hat = r2.gamma;
    alphas_hat = r2.alphas;
    avhat = op.recorded_products().columns(0, r2.k);
    vhat = multiply(st.y, phat);
    yhat = r2.x;
    axpy(1.0, gemv(avhat, r2.alphas), ay_yhat);
    notify(2, gemv(st.y, yhat));
  }

  // Stage 3.
  const Preconditioner m = Preconditioner::build(cfg.precond, a);
  const PreconditionerFn mfn = preconditioner_fn(m, sink);
  PcgOptions opt;
  opt.tol = tols.eps;
  opt.max_iter = cfg.max_iter;
  opt.mode = cfg.mode;
  opt.throw_on_failure = false;
  if (cfg.observer)
    opt.observer = [&](std::size_t k, std::span<const double> x, double) {
      if (k > 0) notify(3, Vector(x.begin(), x.end()));
    };
  SparseOperator op(a, sink);
  AugmentedPcgResult r3;
  Vector start_y = yhat;
  if (ydim == 0) {
    NoAugmentation none;
    r3 = augmented_pcg(op, rbar, {}, none, mfn, opt);
  } else if (!cfg.inner_iterative) {
    DenseMatrix basis = w, products = s1.aw;
    basis.append_columns(vhat);
    products.append_columns(avhat);
    Vector start(s1.what.begin(), s1.what.end());
    start.insert(start.end(), alphas_hat.begin(), alphas_hat.end());
    FactoredAugmentation aug(std::move(basis), std::move(products),
                             BlockDiagonalFactor(s1.rhat, [&] {
                               Vector s(gamma_hat.size());
                               for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::sqrt(gamma_hat[i]);
                               return s;
                             }()));
    r3 = augmented_pcg(op, rbar, start, aug, mfn, opt);
    if (cfg.keep_subspaces) rep.augmenting_basis = aug.basis();
  } else {
    DenseMatrix inner_basis = detail::selection_matrix(ydim, st.stage1);
    DenseMatrix inner_products = bw;
    inner_basis.append_columns(phat);
    inner_products.append_columns(bphat);
    Vector sq(gamma_hat.size());
    for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = std::sqrt(gamma_hat[i]);
    InnerIterativeAugmentation aug(
        st.y, a, sink,
        FactoredAugmentation(std::move(inner_basis), std::move(inner_products), BlockDiagonalFactor(s1.rhat, sq)),
        tols.eps_inner, cfg.mode);
    aug.set_known_product(yhat, ay_yhat);
    r3 = augmented_pcg(op, rbar, yhat, aug, mfn, opt);
    rep.inner_iters = aug.inner_iterations();
    if (cfg.keep_subspaces) rep.augmenting_basis = st.y;
  }
  if (cfg.keep_subspaces) rep.directions = r3.directions;
  rep.stage3_iters = r3.k;
  rep.converged = r3.converged;
  rep.residual_history = r3.residual_history;
  Vector x = full_x(r3.x);

  {
    Vector ax(n);
    a.multiply(x, ax);
    rep.final_residual = norm2(subtract(sys.b, ax));
  }

  if (cfg.recycle) rep.truncated = update_basis(st, a, r3, start_y, cfg, sink);

  const CounterSnapshot total = counters.snapshot();
  rep.matvecs = total.matvecs;
  rep.precond_applications = total.precond_applications;
  rep.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  if (!rep.converged && cfg.throw_on_failure)
    throw SystemNotConverged(rep, "solve_system: system " + std::to_string(rep.j) + " did not converge");
  return {std::move(x), std::move(rep)};
}

// Largest |lambda| of a symmetric operator by Lanczos with full
// reorthogonalization. Ritz values never exceed the true extreme, so this is
// a lower estimate; with enough steps it is exact to working precision.
inline double lanczos_norm(const std::function<void(std::span<const double>, std::span<double>)>& apply,
                           std::size_t n, std::size_t steps = 80, std::uint64_t seed = 7) {
  if (n == 0) return 0.0;
  steps = std::min(steps, n);
  Xorshift64Star rng(seed);
  Vector q(n);
  for (auto& v : q) v = rng.uniform(-1.0, 1.0);
  scale(1.0 / norm2(q), q);
  DenseMatrix qs(n, 0);
  Vector alpha, beta;
  Vector w(n);
  for (std::size_t k = 0; k < steps; ++k) {
    qs.append_column(q);
    apply(q, w);
    const double a = dot(q, w);
    alpha.push_back(a);
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t i = 0; i < qs.cols(); ++i) axpy(-dot(qs.col(i), w), qs.col(i), w);
    const double b = norm2(w);
    if (!(b > 1e-13 * std::max(1.0, std::abs(a)))) break;
    beta.push_back(b);
    q = w;
    scale(1.0 / b, q);
  }
  const std::size_t m = alpha.size();
  DenseMatrix t(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    t(i, i) = alpha[i];
    if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[i];
  }
  return symmetric_spectral_norm(t);
}

inline double difference_norm(const SparseSpdMatrix& a, const SparseSpdMatrix& b) {
  require(a.n() == b.n(), "difference_norm: size mismatch");
  Vector tmp(a.n());
  return lanczos_norm(
      [&](std::span<const double> x, std::span<double> y) {
        a.multiply(x, y);
        b.multiply(x, tmp);
        axpy(-1.0, tmp, y);
      },
      a.n());
}

struct SequenceRun {
  std::vector<SolveReport> reports;
  std::vector<Vector> solutions;
  std::vector<ConditioningTraceEntry> trace;  // filled with diagnostics on
  bool all_converged = true;
};

class SequenceNotConverged : public Error {
 public:
  SequenceNotConverged(SequenceRun partial, const std::string& what) : Error(what), partial_(std::move(partial)) {}
  const SequenceRun& partial() const noexcept { return partial_; }

 private:
  SequenceRun partial_;
};

inline ConditioningTraceEntry conditioning_entry(const RecycleState& st, const SparseSpdMatrix& a,
                                                 const SparseSpdMatrix* prev, std::size_t j) {
  ConditioningTraceEntry e;
  e.j = j;
  e.jbar = st.last_truncation;
  e.basis_dim = st.y.cols();
  if (prev) e.a_diff_norm = difference_norm(a, *prev);
  const std::size_t y = st.y.cols();
  if (y == 0) return e;
  DenseMatrix g(y, y);
  Vector tmp(a.n());
  for (std::size_t c = 0; c < y; ++c) {
    a.multiply(st.y.col(c), tmp);
    for (std::size_t r = 0; r < y; ++r) g(r, c) = dot(st.y.col(r), tmp);
  }
  g.symmetrize();
  e.kappa = condition_number(g);
  for (std::size_t i = 0; i < y; ++i) g(i, i) -= 1.0;
  e.lhs = symmetric_spectral_norm(g);
  DenseMatrix yy = multiply_tn(st.y, st.y);
  yy.symmetrize();
  e.y_norm_sq = symmetric_spectral_norm(yy);
  return e;
}

// Solves the sequence in order. A system that fails to converge stops the run
// (its partial report is kept) unless continue_on_failure is set.
inline SequenceRun run_sequence(const SystemSequence& seq, const ThreeStageConfig& cfg,
                                bool continue_on_failure = false, RecycleState* state = nullptr) {
  RecycleState local;
  RecycleState& st = state ? *state : local;
  SequenceRun run;
  ThreeStageConfig c = cfg;
  if (!c.output_matrix && seq.output_matrix) c.output_matrix = &*seq.output_matrix;
  c.throw_on_failure = true;
  for (std::size_t j = 0; j < seq.systems.size(); ++j) {
    const LinearSystem& sys = seq.systems[j];
    require(sys.a.n() == seq.n, "run_sequence: system dimension differs from the sequence");
    if (cfg.diagnostics) {
      run.trace.push_back(conditioning_entry(st, sys.a, j ? &seq.systems[j - 1].a : nullptr, j + 1));
      const StageTolerances t = cfg.schedule.at((cfg.tol ? *cfg.tol : sys.tol) * (cfg.relative ? norm2(sys.b) : 1.0));
      run.trace.back().hypotheses =
          cfg.inner_iterative ? t.eps_hat == 0.0 && t.eps_inner == 0.0
                              : cfg.truncation.stage1_threshold >= 1.0 && st.full_stage1_at_truncation;
    }
    try {
      SolveOutcome o = solve_system(sys, st, c, j + 1);
      run.reports.push_back(std::move(o.report));
      run.solutions.push_back(std::move(o.x));
    } catch (const SystemNotConverged& e) {
      run.all_converged = false;
      run.reports.push_back(e.report());
      if (!continue_on_failure) throw SequenceNotConverged(run, e.what());
      run.solutions.emplace_back();
    }
  }
  return run;
}

}  // namespace recykl
