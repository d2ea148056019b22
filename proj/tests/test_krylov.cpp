#include <gtest/gtest.h>

#include "oracles.hpp"
#include "recykl/krylov.hpp"

using namespace recykl;

namespace {

struct Problem {
  SparseSpdMatrix a;
  Vector b;
  DenseMatrix y;
};

Problem random_problem(std::uint64_t seed, std::size_t n, std::size_t ycols) {
  Xorshift64Star rng(seed);
  Problem p;
  p.a = oracle::random_sparse_spd(rng, n, 0.15);
  p.b = oracle::from_eigen(oracle::random_vector(rng, n));
  p.y = oracle::from_eigen(oracle::random_matrix(rng, n, ycols));
  return p;
}

// Search space range(Y) + K_k(H A, H r0) with H = Q M^{-1} Q^T and
// Q = I - Y (Y^T A Y)^{-1} Y^T A; built densely and orthonormalized.
oracle::Mat augmented_krylov_space(const oracle::Mat& a, const oracle::Mat& minv, const oracle::Mat& y,
                                   const oracle::Vec& r0, int k) {
  const int n = static_cast<int>(a.rows());
  oracle::Mat q = oracle::Mat::Identity(n, n);
  if (y.cols() > 0) q -= y * (y.transpose() * a * y).ldlt().solve(y.transpose() * a);
  const oracle::Mat h = q * minv * q.transpose();
  oracle::Mat basis(n, y.cols() + k);
  basis.leftCols(y.cols()) = y;
  oracle::Vec v = h * r0;
  for (int i = 0; i < k; ++i) {
    for (int pass = 0; pass < 2; ++pass)
      for (int j = 0; j < y.cols() + i; ++j) {
        const oracle::Vec bj = basis.col(j).normalized();
        v -= bj * bj.dot(v);
      }
    basis.col(y.cols() + i) = v.normalized();
    v = h * a * basis.col(y.cols() + i);
  }
  return basis;
}

}  // namespace

TEST(Cg, TwoByTwoExample) {
  const auto a = SparseSpdMatrix::from_triplets(2, {{0, 0, 4}, {0, 1, 1}, {1, 0, 1}, {1, 1, 3}});
  PcgOptions opt;
  opt.tol = 1e-12;
  const auto r = pcg(a, Vector{1, 2}, {}, {}, opt);
  EXPECT_LE(r.k, 2u);
  EXPECT_NEAR(r.x[0], 1.0 / 11.0, 1e-12);
  EXPECT_NEAR(r.x[1], 7.0 / 11.0, 1e-12);
}

TEST(Cg, SmallResidualExitsImmediately) {
  const auto a = SparseSpdMatrix::from_triplets(2, {{0, 0, 4}, {1, 1, 3}});
  PcgOptions opt;
  opt.tol = 1e-3;
  const auto r = pcg(a, Vector{1e-4, 0}, {}, {}, opt);
  EXPECT_EQ(r.k, 0u);
  EXPECT_EQ(r.x, (Vector{0, 0}));
  EXPECT_TRUE(r.converged);
}

TEST(Cg, PcgIsAugmentedPcgWithEmptyBasisBitForBit) {
  const auto p = random_problem(3, 40, 0);
  const auto m = Preconditioner::build({PreconditionerKind::ssor, 1.2}, p.a);
  PcgOptions opt;
  opt.tol = 1e-10;
  const auto r1 = pcg(p.a, p.b, {}, preconditioner_fn(m, nullptr), opt);
  SparseOperator op(p.a, nullptr);
  NoAugmentation none;
  const auto r2 = augmented_pcg(op, p.b, {}, none, preconditioner_fn(m, nullptr), opt);
  EXPECT_EQ(r1.k, r2.k);
  EXPECT_EQ(r1.x, r2.x);
  EXPECT_EQ(r1.alphas, r2.alphas);
  EXPECT_EQ(r1.residual_history, r2.residual_history);
}

TEST(Cg, PreconditionerApplicationsEqualIterations) {
  const auto p = random_problem(8, 50, 0);
  const auto m = Preconditioner::build({PreconditionerKind::jacobi, 1.0}, p.a);
  Counters c;
  PcgOptions opt;
  opt.tol = 1e-8;
  const auto r = pcg(p.a, p.b, {}, preconditioner_fn(m, &c), opt, &c);
  EXPECT_EQ(c.snapshot().precond_applications, r.k);
  EXPECT_EQ(c.snapshot().matvecs, r.k);
}

TEST(Cg, RelativeTolerance) {
  const auto p = random_problem(9, 30, 0);
  PcgOptions opt;
  opt.tol = 1e-6;
  opt.relative = true;
  const auto r = pcg(p.a, p.b, {}, {}, opt);
  EXPECT_LE(r.residual_history.back(), 1e-6 * norm2(p.b));
  EXPECT_GT(r.residual_history[r.k - 1], 1e-6 * norm2(p.b));
}

TEST(Cg, NotConvergedCarriesPartialResult) {
  const auto p = random_problem(10, 30, 0);
  PcgOptions opt;
  opt.tol = 1e-14;
  opt.max_iter = 3;
  try {
    pcg(p.a, p.b, {}, {}, opt);
    FAIL();
  } catch (const NotConverged& e) {
    EXPECT_EQ(e.partial().k, 3u);
    EXPECT_EQ(e.partial().residual_history.size(), 4u);
  }
}

TEST(AugmentedPcg, FullSpaceAugmentationBreaksDown) {
  const auto a = SparseSpdMatrix::from_triplets(2, {{0, 0, 2}, {1, 1, 3}});
  SparseOperator op(a, nullptr);
  auto aug = FactoredAugmentation::from_matrix(a, DenseMatrix::identity(2), nullptr);
  PcgOptions opt;
  opt.tol = 1e-12;
  EXPECT_THROW(augmented_pcg(op, Vector{1, 1}, Vector{0, 0}, aug, {}, opt), Breakdown);
  // Starting from the Galerkin point there is nothing left to do.
  const auto r = augmented_pcg(op, Vector{1, 1}, aug.galerkin(Vector{1, 1}), aug, {}, opt);
  EXPECT_EQ(r.k, 0u);
  EXPECT_NEAR(r.x[0], 0.5, 1e-15);
}

TEST(AugmentedPcg, DirectionsAreAOrthogonalToBasisAndEachOther) {
  for (auto mode : {OrthogonalizationMode::cg, OrthogonalizationMode::fom}) {
    const auto p = random_problem(12, 80, 6);
    auto aug = FactoredAugmentation::from_matrix(p.a, p.y, nullptr);
    SparseOperator op(p.a, nullptr);
    PcgOptions opt;
    opt.tol = 1e-10;
    opt.mode = mode;
    const auto m = Preconditioner::build({PreconditionerKind::ssor, 1.0}, p.a);
    const auto r = augmented_pcg(op, p.b, aug.galerkin(p.b), aug, preconditioner_fn(m, nullptr), opt);
    const auto a = oracle::to_eigen(p.a);
    const auto v = oracle::to_eigen(r.directions), y = oracle::to_eigen(p.y);
    const oracle::Mat vay = v.transpose() * a * y;
    const oracle::Mat vav = v.transpose() * a * v;
    for (int i = 0; i < vav.rows(); ++i) {
      EXPECT_NEAR(vav(i, i), r.gamma[i], 1e-12 * r.gamma[i]);
      for (int j = 0; j < y.cols(); ++j)
        EXPECT_LT(std::abs(vay(i, j)), 1e-9 * std::sqrt(vav(i, i) * (y.col(j).dot(a * y.col(j)))));
      for (int j = 0; j < i; ++j) {
        const double scale = std::sqrt(vav(i, i) * vav(j, j));
        EXPECT_LT(std::abs(vav(i, j)), (mode == OrthogonalizationMode::fom ? 1e-12 : 1e-6) * scale);
      }
    }
  }
}

TEST(AugmentedPcg, FomLiteralModeConverges) {
  const auto p = random_problem(14, 40, 3);
  auto aug = FactoredAugmentation::from_matrix(p.a, p.y, nullptr);
  SparseOperator op(p.a, nullptr);
  PcgOptions opt;
  opt.tol = 1e-8;
  opt.mode = OrthogonalizationMode::fom_literal;
  opt.throw_on_failure = false;
  const auto r = augmented_pcg(op, p.b, aug.galerkin(p.b), aug, {}, opt);
  EXPECT_GT(r.k, 0u);
  EXPECT_LE(r.residual_history.back(), std::max(1e-8, r.residual_history.front()));
}

// Property: at every k the iterate is the A-orthogonal projection of x* onto
// range(Y) + K_k(H A, H r0), checked against a dense oracle.
TEST(AugmentedPcg, IterateIsAProjectionOntoAugmentedKrylovSpace) {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    Xorshift64Star rng(seed * 101);
    const int n = 30;
    const oracle::Mat a = oracle::random_spd(rng, n, 1.0, 50.0);
    const auto asp = SparseSpdMatrix::from_dense(oracle::from_eigen(a));
    const oracle::Vec b = oracle::random_vector(rng, n);
    const oracle::Mat y = oracle::random_matrix(rng, n, 4);
    const oracle::Vec xstar = a.ldlt().solve(b);
    const auto kind = seed % 2 ? PreconditionerKind::jacobi : PreconditionerKind::ssor;
    const auto m = Preconditioner::build({kind, 1.1}, asp);
    oracle::Mat minv(n, n);
    for (int j = 0; j < n; ++j) {
      Vector e(n, 0.0);
      e[j] = 1.0;
      minv.col(j) = oracle::to_eigen(m.apply(e));
    }
    auto aug = FactoredAugmentation::from_matrix(asp, oracle::from_eigen(y), nullptr);
    SparseOperator op(asp, nullptr);
    const Vector bv = oracle::from_eigen(b);
    const Vector y0 = aug.galerkin(bv);
    const oracle::Vec r0 = b - a * y * oracle::to_eigen(y0);
    std::vector<oracle::Vec> iterates;
    PcgOptions opt;
    opt.tol = 1e-9;
    opt.mode = OrthogonalizationMode::fom;
    opt.observer = [&](std::size_t, std::span<const double> x, double) {
      iterates.push_back(Eigen::Map<const oracle::Vec>(x.data(), n));
    };
    const auto r = augmented_pcg(op, bv, y0, aug, preconditioner_fn(m, nullptr), opt);
    const double scale = oracle::a_norm(a, xstar);
    for (std::size_t k = 0; k <= r.k; ++k) {
      const oracle::Mat s = augmented_krylov_space(a, minv, y, r0, static_cast<int>(k));
      const oracle::Vec xo = oracle::a_projection(a, s, oracle::Vec::Zero(n), xstar);
      EXPECT_LT(oracle::a_norm(a, iterates[k] - xo), 1e-8 * scale) << "seed " << seed << " k " << k;
    }
  }
}

TEST(DirectReducedSolve, MatchesDenseGalerkin) {
  const auto p = random_problem(20, 25, 5);
  Counters c;
  const auto s = direct_reduced_solve(p.a, p.b, p.y, &c);
  const auto a = oracle::to_eigen(p.a);
  const auto w = oracle::to_eigen(p.y);
  const oracle::Vec ref = (w.transpose() * a * w).ldlt().solve(w.transpose() * oracle::to_eigen(p.b));
  EXPECT_LT((oracle::to_eigen(s.what) - ref).norm(), 1e-11 * ref.norm());
  EXPECT_EQ(c.snapshot().matvecs, 5u);
  EXPECT_EQ(c.snapshot().reduced_assemblies, 1u);
  const auto empty = direct_reduced_solve(p.a, p.b, DenseMatrix(25, 0));
  EXPECT_TRUE(empty.what.empty());
  EXPECT_EQ(empty.rhat.order(), 0u);
}

TEST(DirectReducedSolve, RankDeficientBasisRejected) {
  const auto p = random_problem(21, 10, 1);
  DenseMatrix w = p.y;
  w.append_column(p.y.col(0));
  EXPECT_THROW(direct_reduced_solve(p.a, p.b, w), NotPositiveDefinite);
}

TEST(ReducedOperator, MatchesDenseReducedMatrix) {
  const auto p = random_problem(22, 20, 4);
  Counters c;
  ReducedOperator op(p.y, p.a, &c, true);
  const Vector x{1, -2, 0.5, 3};
  Vector out(4);
  op.apply(x, out);
  const auto a = oracle::to_eigen(p.a);
  const auto y = oracle::to_eigen(p.y);
  const oracle::Vec ref = y.transpose() * a * y * oracle::to_eigen(x);
  EXPECT_LT((oracle::to_eigen(out) - ref).norm(), 1e-12 * ref.norm());
  EXPECT_EQ(c.snapshot().matvecs, 1u);
  EXPECT_EQ(c.snapshot().reduced_assemblies, 0u);
  EXPECT_EQ(op.recorded_products().cols(), 1u);
}
