#include "msl/optimizer.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace msl;
using msl::testing::rel_diff;
using msl::testing::small_problem;

TEST(Decompose, InvariantsOnRandomFactors) {
  const GroundTruth gt = make_ground_truth(12, 9, 3, 1);
  NormalSource normal(2);
  for (int trial = 0; trial < 100; ++trial) {
    const Index k = 1 + trial % 7;
    const Matrix z = normal.matrix(21, k);
    const Decomposition dec = decompose(gt, z);
    const Index s = std::min<Index>(3, k);
    ASSERT_EQ(dec.Q_t.cols(), s);
    ASSERT_EQ(dec.Q_t_perp.cols(), k - s);
    const Matrix lz = gt.L_X.transpose() * z;
    EXPECT_LE(rel_diff(dec.P_t.leftCols(s) * dec.Sigma_t.asDiagonal() * dec.Q_t.transpose(), lz), 1e-12);
    Matrix q(k, k);
    q << dec.Q_t, dec.Q_t_perp;
    EXPECT_LE((q.transpose() * q - Matrix::Identity(k, k)).norm(), 1e-12);
    EXPECT_LE((lz * dec.Q_t_perp).norm(), 1e-12 * std::max(1.0, lz.norm()));
    EXPECT_EQ(dec.full_rank, k >= 3);
    if (dec.full_rank) {
      const Matrix p = signal_basis(z, dec);
      EXPECT_LE((p.transpose() * p - Matrix::Identity(3, 3)).norm(), 1e-12);
      // Same column space as Z Q_t.
      const Matrix zq = z * dec.Q_t;
      EXPECT_LE((zq - p * (p.transpose() * zq)).norm(), 1e-12 * zq.norm());
    }
  }
}

TEST(Decompose, CanonicalSignalPlusNuisance) {
  const GroundTruth gt = make_ground_truth(10, 8, 2, 3);
  // Z = L_X diag(2, 1) [I 0] + L_perp e_1 e_3^T * 0.5.
  Matrix z = Matrix::Zero(18, 4);
  z.col(0) = 2.0 * gt.L_X.col(0);
  z.col(1) = 1.0 * gt.L_X.col(1);
  z.col(2) = 0.5 * gt.L_X_perp.col(0);
  const Decomposition dec = decompose(gt, z);
  EXPECT_NEAR(dec.Sigma_t(0), 2.0, 1e-13);
  EXPECT_NEAR(dec.Sigma_t(1), 1.0, 1e-13);
  EXPECT_NEAR(spectral_norm(z * dec.Q_t_perp), 0.5, 1e-13);
}

TEST(Decompose, RankDeficientSignal) {
  const GroundTruth gt = make_ground_truth(10, 8, 2, 3);
  Matrix z = Matrix::Zero(18, 3);
  z.col(0) = gt.L_X.col(0);
  z.col(1) = gt.L_X_perp.col(2);
  EXPECT_FALSE(decompose(gt, z).full_rank);
  EXPECT_THROW(decompose(gt, Matrix::Zero(17, 3)), std::invalid_argument);
}

TEST(Record, ExactBalancedFactorization) {
  const auto p = small_problem(false);
  const FactorPair fp = msl::testing::balanced_exact(p.gt, 2);
  const DiagnosticsRecord rec = compute_record(p.gt, p.op, p.targets, fp, 7, true);
  EXPECT_EQ(rec.iter, 7);
  EXPECT_LE(rec.train_loss, 1e-25);
  EXPECT_LE(rec.rel_test_error_fro, 1e-14);
  EXPECT_LE(rec.rel_test_error_spec, 1e-12);
  EXPECT_LE(rec.imbalance_norm, 1e-14);
  EXPECT_LE(rec.vw_imbalance, 1e-14);
  ASSERT_TRUE(rec.sigma_min_signal && rec.nuisance_norm && rec.angle_norm);
  EXPECT_NEAR(*rec.sigma_min_signal, std::sqrt(p.gt.sigma_min()), 1e-12);
  EXPECT_NEAR(rec.sigma_min_LZ, std::sqrt(p.gt.sigma_min()), 1e-12);
  EXPECT_LE(*rec.nuisance_norm, 1e-14);
  EXPECT_LE(*rec.angle_norm, 1e-7);
  EXPECT_LE(*rec.imbalance_nuisance, 1e-14);
  EXPECT_LE(*rec.imbalance_signal_angle, 1e-14);
  ASSERT_TRUE(rec.delta_norm);
  EXPECT_LE(*rec.delta_norm, 1e-13);
  EXPECT_NEAR(rec.z_norm, 1.0, 1e-12);
}

TEST(Record, NormsAgreeWithDirectComputation) {
  const auto p = small_problem(false);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const FactorPair fp = msl::testing::random_factors(12, 8, 2 + seed % 4, seed);
    const DiagnosticsRecord rec = compute_record(p.gt, p.op, p.targets, fp, 0, false);
    const Matrix diff = fp.product() - p.gt.X;
    EXPECT_NEAR(rec.rel_test_error_fro, diff.norm() / p.gt.X.norm(), 1e-12);
    EXPECT_NEAR(rec.rel_test_error_spec, spectral_norm(diff), 1e-10);
    EXPECT_NEAR(rec.vw_imbalance, 2.0 * rec.imbalance_norm, 1e-12 * std::max(1.0, rec.vw_imbalance));
    EXPECT_FALSE(rec.delta_norm.has_value());
    ASSERT_TRUE(rec.angle_norm.has_value());
    EXPECT_LE(*rec.angle_norm, 1.0 + 1e-12);
    EXPECT_LE(*rec.imbalance_nuisance, rec.imbalance_norm + 1e-12);
    EXPECT_LE(*rec.imbalance_signal_angle, rec.imbalance_norm + 1e-12);
    EXPECT_LE(*rec.nuisance_norm, rec.z_norm + 1e-12);
    EXPECT_LE(*rec.sigma_min_signal, rec.z_norm + 1e-12);
  }
}

TEST(Record, RankDeficientFieldsAreAbsent) {
  const auto p = small_problem(true);
  const FactorPair fp = msl::testing::random_factors(12, 8, 1, 3);
  const DiagnosticsRecord rec = compute_record(p.gt, p.op, p.targets, fp, 0, true);
  EXPECT_FALSE(rec.sigma_min_signal.has_value());
  EXPECT_FALSE(rec.nuisance_norm.has_value());
  EXPECT_FALSE(rec.angle_norm.has_value());
  EXPECT_FALSE(rec.imbalance_nuisance.has_value());
  EXPECT_FALSE(rec.imbalance_signal_angle.has_value());
  EXPECT_EQ(rec.sigma_min_LZ, 0.0);
  EXPECT_EQ(*rec.delta_norm, 0.0);
}

TEST(Record, ZeroFactors) {
  const auto p = small_problem(false);
  const FactorPair fp{Matrix::Zero(12, 4), Matrix::Zero(8, 4)};
  const DiagnosticsRecord rec = compute_record(p.gt, p.op, p.targets, fp, 0, false);
  EXPECT_NEAR(rec.rel_test_error_fro, 1.0, 1e-15);
  EXPECT_NEAR(rec.rel_test_error_spec, 1.0, 1e-12);
  EXPECT_EQ(rec.imbalance_norm, 0.0);
  EXPECT_EQ(rec.z_norm, 0.0);
  EXPECT_FALSE(rec.angle_norm.has_value());
}

TEST(Record, InitialImbalanceScalesWithAlphaSquared) {
  const GroundTruth gt = make_ground_truth(100, 50, 5, 1);
  for (double alpha : {1e-2, 1e-3, 1e-5}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const FactorPair fp = init_random(100, 50, 10, alpha, seed);
      const DiagnosticsRecord rec = record_snapshot(gt, fp, 0, 0.0, std::nullopt);
      EXPECT_LE(rec.imbalance_norm, 10.0 * alpha * alpha * std::sqrt(150.0 * 10.0));
      EXPECT_GT(rec.imbalance_norm, 0.0);
    }
  }
}

TEST(Delta, MatchesTheSymmetrizedOracle) {
  const auto p = small_problem(false);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const FactorPair fp = msl::testing::random_factors(12, 8, 3, seed);
    const LiftedPair lp = lift(fp);
    const Matrix s = lp.Z * lp.Z.transpose() - lp.Z_tilde * lp.Z_tilde.transpose() - sym_embed(p.gt.X);
    const Matrix oracle = s - p.op.symmetrized_adjoint(p.op.symmetrized_apply(s));
    const Matrix got = delta_term(p.gt, p.op, lp);
    EXPECT_LE(rel_diff(got, oracle), 1e-12);
    EXPECT_EQ(got.topLeftCorner(12, 12).norm(), 0.0);
    EXPECT_NEAR(delta_norm(p.gt, p.op, fp), spectral_norm(oracle), 1e-10);
  }
}

TEST(Delta, VanishesForThePopulationOperator) {
  const auto p = small_problem(true);
  const FactorPair fp = msl::testing::random_factors(12, 8, 3, 1);
  EXPECT_EQ(delta_norm(p.gt, p.op, fp), 0.0);
}

TEST(Delta, ShrinksWithMoreMeasurements) {
  const GroundTruth gt = make_ground_truth(10, 8, 2, 1);
  const FactorPair fp = msl::testing::random_factors(10, 8, 2, 2);
  const double few = delta_norm(gt, make_gaussian_operator(10, 8, 100, 1), fp);
  const double many = delta_norm(gt, make_gaussian_operator(10, 8, 10000, 1), fp);
  EXPECT_LT(many, few);
}

TEST(Observe, TargetsPerMode) {
  const auto e = small_problem(false);
  EXPECT_EQ(e.targets.y.size(), 300);
  EXPECT_EQ(e.targets.X.size(), 0);
  const auto pop = small_problem(true);
  EXPECT_EQ(pop.targets.X.rows(), 12);
  EXPECT_THROW(observe(make_population_operator(3, 3), e.gt), std::invalid_argument);
}

TEST(Threshold, LocalPhase) {
  const GroundTruth gt = make_ground_truth_conditioned(10, 8, 2, 2.0, 1);
  EXPECT_NEAR(local_phase_threshold(gt), std::sqrt(0.5 / 8.0), 1e-15);
}

TEST(Lifted, SignFlipNormIdentitiesAlongARun) {
  const auto p = small_problem(false);
  FactorPair fp = init_random(12, 8, 4, 1e-2, 3);
  const Matrix lt_perp = p.gt.L_tilde_X_perp();
  for (int t = 0; t < 300; ++t) {
    const LiftedPair lp = lift(fp);
    const Decomposition dec = decompose(p.gt, lp.Z);
    const double scale = std::max(1.0, lp.Z.norm());
    EXPECT_NEAR(spectral_norm(lp.Z), spectral_norm(lp.Z_tilde), 1e-12 * scale);
    EXPECT_LE((lt_perp.transpose() * lp.Z_tilde * dec.Q_t - p.gt.L_X_perp.transpose() * lp.Z * dec.Q_t).norm(),
              1e-10 * scale);
    EXPECT_LE((p.gt.L_tilde_X.transpose() * lp.Z_tilde - p.gt.L_X.transpose() * lp.Z).norm(), 1e-10 * scale);
    fp = gd_step(p.op, p.targets, fp, 0.1);
  }
}
