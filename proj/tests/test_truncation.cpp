#include <gtest/gtest.h>

#include "oracles.hpp"
#include "recykl/truncation.hpp"

using namespace recykl;

namespace {

double a_defect(const DenseMatrix& y, const oracle::Mat& a) {
  const oracle::Mat ym = oracle::to_eigen(y);
  return (ym.transpose() * a * ym - oracle::Mat::Identity(ym.cols(), ym.cols())).norm();
}

TruncationConfig config(const char* strategy) {
  TruncationConfig cfg;
  parse_strategy(strategy, cfg);
  return cfg;
}

}  // namespace

TEST(TruncationConfig, ParseAndName) {
  for (const char* s : {"none", "pod-a-prev", "pod-a-rbf", "pod-ctc-prev", "pod-ctc-rbf", "deflate:7"}) {
    const auto cfg = config(s);
    EXPECT_EQ(strategy_name(cfg), s);
  }
  TruncationConfig cfg;
  EXPECT_THROW(parse_strategy("deflate:", cfg), InvalidConfig);
  EXPECT_THROW(parse_strategy("deflate:0", cfg), InvalidConfig);
  EXPECT_THROW(parse_strategy("gcrot", cfg), InvalidConfig);
}

TEST(TruncationConfig, Validate) {
  TruncationConfig cfg;
  cfg.nu_w = 0.9;
  cfg.nu_y = 0.8;
  EXPECT_THROW(cfg.validate(), InvalidConfig);
  cfg.nu_w = 0.5;
  EXPECT_NO_THROW(cfg.validate());
  cfg.stage1_threshold = 1.5;
  EXPECT_THROW(cfg.validate(), InvalidConfig);
  cfg.stage1_threshold = 0.5;
  cfg.storage_cap = 0;
  EXPECT_THROW(cfg.validate(), InvalidConfig);
}

TEST(Enforce, AlreadyOrthonormalIsUnchanged) {
  Xorshift64Star rng(3);
  const auto a = oracle::random_sparse_spd(rng, 15, 0.3);
  const oracle::Mat ad = oracle::to_eigen(a);
  oracle::Mat y = oracle::random_matrix(rng, 15, 4);
  y = oracle::Mat(Eigen::LLT<oracle::Mat>(oracle::Mat(y.transpose() * ad * y)).matrixU().solve<Eigen::OnTheRight>(y));
  const auto e = enforce_a_orthogonality(oracle::from_eigen(y), a, nullptr);
  EXPECT_LE((oracle::to_eigen(e.l.to_dense()) - oracle::Mat::Identity(4, 4)).norm(), 1e-12);
  EXPECT_LE((oracle::to_eigen(e.y) - y).norm(), 1e-12);

  const auto e2 = enforce_a_orthogonality(oracle::from_eigen(oracle::Mat(2.0 * y)), a, nullptr);
  EXPECT_LE((oracle::to_eigen(e2.l.to_dense()) - 2.0 * oracle::Mat::Identity(4, 4)).norm(), 1e-12);
  EXPECT_LE((oracle::to_eigen(e2.y) - y).norm(), 1e-12);
}

TEST(Enforce, RandomBasis) {
  Xorshift64Star rng(4);
  for (int t = 0; t < 10; ++t) {
    const auto a = oracle::random_sparse_spd(rng, 30, 0.2);
    const auto y = oracle::from_eigen(oracle::random_matrix(rng, 30, 7));
    const auto e = enforce_a_orthogonality(y, a, nullptr);
    EXPECT_LE(a_defect(e.y, oracle::to_eigen(a)), 1e-8);
    EXPECT_LE(principal_angle_distance(e.y, y), 1e-10);
    // Leading prefixes keep their span.
    EXPECT_LE(principal_angle_distance(e.y.columns(0, 3), y.columns(0, 3)), 1e-10);
  }
}

TEST(PodCompress, SingleColumn) {
  Xorshift64Star rng(5);
  const auto a = oracle::random_sparse_spd(rng, 10, 0.3);
  const auto z = oracle::from_eigen(oracle::random_matrix(rng, 10, 1));
  for (const char* s : {"pod-a-prev", "pod-ctc-prev"}) {
    const oracle::Mat c = oracle::random_matrix(rng, 4, 10);
    const DenseMatrix cm = oracle::from_eigen(c);
    const auto out = pod_compress(z, Vector{2.0}, config(s), a, &cm, nullptr);
    ASSERT_EQ(out.y_new.cols(), 1u);
    EXPECT_EQ(out.stage1_width, 1u);
    EXPECT_LE(principal_angle_distance(out.y_new, z), 1e-12);
    EXPECT_LE(a_defect(out.y_new, oracle::to_eigen(a)), 1e-12);
  }
}

TEST(PodCompress, FullEnergyPreservesRange) {
  Xorshift64Star rng(6);
  for (const char* s : {"pod-a-prev", "pod-a-rbf", "pod-ctc-prev", "pod-ctc-rbf"}) {
    const auto a = oracle::random_sparse_spd(rng, 40, 0.15);
    const auto z = oracle::from_eigen(oracle::random_matrix(rng, 40, 8));
    const DenseMatrix c = oracle::from_eigen(oracle::random_matrix(rng, 20, 40));
    Vector w(8);
    for (auto& v : w) v = rng.uniform(0.5, 1.5);
    const auto out = pod_compress(z, w, config(s), a, &c, nullptr);
    EXPECT_EQ(out.y_new.cols(), 8u) << s;
    EXPECT_LE(principal_angle_distance(out.y_new, z), 1e-8) << s;
    EXPECT_LE(a_defect(out.y_new, oracle::to_eigen(a)), 1e-9) << s;
    // map reproduces the basis from Z.
    EXPECT_LE(frobenius_norm(add(multiply(z, out.map), out.y_new, -1.0)), 1e-9 * frobenius_norm(out.y_new)) << s;
  }
}

TEST(PodCompress, StagePrefixAndRangeInclusion) {
  Xorshift64Star rng(7);
  const auto a = oracle::random_sparse_spd(rng, 50, 0.1);
  const auto z = oracle::from_eigen(oracle::random_matrix(rng, 50, 10));
  Vector w(10);
  for (std::size_t i = 0; i < 10; ++i) w[i] = std::pow(0.5, static_cast<double>(i));
  auto cfg = config("pod-a-prev");
  cfg.nu_y = 0.999;
  cfg.nu_w = 0.9;
  const auto out = pod_compress(z, w, cfg, a, nullptr, nullptr);
  EXPECT_LT(out.y_new.cols(), 10u);
  EXPECT_LE(out.stage1_width, out.y_new.cols());
  EXPECT_GE(out.stage1_width, 1u);
  // range(Y_new) inside range(Z)
  const oracle::Mat q = oracle::to_eigen(orthonormal_basis(z));
  const oracle::Mat y = oracle::to_eigen(out.y_new);
  EXPECT_LE((y - q * (q.transpose() * y)).norm(), 1e-9 * y.norm());

  cfg.stage1_dim = 2;
  cfg.retain_dim = 4;
  const auto fixed = pod_compress(z, w, cfg, a, nullptr, nullptr);
  EXPECT_EQ(fixed.stage1_width, 2u);
  EXPECT_LE(fixed.y_new.cols(), 4u);
}

TEST(PodCompress, CtcNeedsOutputMatrix) {
  Xorshift64Star rng(8);
  const auto a = oracle::random_sparse_spd(rng, 10, 0.3);
  const auto z = oracle::from_eigen(oracle::random_matrix(rng, 10, 2));
  EXPECT_THROW(pod_compress(z, Vector{1, 1}, config("pod-ctc-prev"), a, nullptr, nullptr), InvalidConfig);
  EXPECT_THROW(pod_compress(z, Vector{1, 1}, config("deflate:1"), a, nullptr, nullptr), InvalidConfig);
}

TEST(Deflation, DiagonalExample) {
  const auto a = SparseSpdMatrix::from_triplets(3, {{0, 0, 1}, {1, 1, 2}, {2, 2, 3}});
  const auto out = deflation_compress(DenseMatrix::identity(3), a, 2, config("deflate:2"), nullptr);
  ASSERT_EQ(out.y_new.cols(), 2u);
  DenseMatrix e12(3, 2);
  e12(0, 0) = e12(1, 1) = 1.0;
  EXPECT_LE(principal_angle_distance(out.y_new, e12), 1e-12);
  EXPECT_NEAR(out.spectrum[0], 1.0, 1e-12);
  EXPECT_NEAR(out.spectrum[1], 2.0, 1e-12);
}

TEST(Deflation, KeepAllPreservesRange) {
  Xorshift64Star rng(9);
  const auto a = oracle::random_sparse_spd(rng, 20, 0.2);
  const auto z = oracle::from_eigen(oracle::random_matrix(rng, 20, 5));
  const auto out = deflation_compress(z, a, 5, config("deflate:5"), nullptr);
  EXPECT_LE(principal_angle_distance(out.y_new, z), 1e-9);
  EXPECT_LE(a_defect(out.y_new, oracle::to_eigen(a)), 1e-8);
}

TEST(Deflation, MatchesDenseGeneralizedEigenproblem) {
  Xorshift64Star rng(10);
  for (int t = 0; t < 10; ++t) {
    const auto a = oracle::random_sparse_spd(rng, 40, 0.15);
    const oracle::Mat ad = oracle::to_eigen(a);
    const oracle::Mat z = oracle::random_matrix(rng, 40, 12);
    const oracle::Mat az = ad * z;
    const Eigen::GeneralizedSelfAdjointEigenSolver<oracle::Mat> ges(az.transpose() * az, z.transpose() * az);
    // ascending mu; keep the 4 smallest
    const auto out = deflation_compress(oracle::from_eigen(z), a, 4, config("deflate:4"), nullptr);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(out.spectrum[i], ges.eigenvalues()[i], 1e-8 * ges.eigenvalues()[i]);
    const oracle::Mat ref = z * ges.eigenvectors().leftCols(4);
    EXPECT_LE(principal_angle_distance(out.y_new, oracle::from_eigen(ref)), 1e-8);
    EXPECT_LE(a_defect(out.y_new, ad), 1e-8);
  }
}
