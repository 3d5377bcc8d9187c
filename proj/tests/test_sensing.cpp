#include "support.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>

using namespace msl;
using msl::testing::rel_diff;

TEST(Linalg, SpectralNormMatchesEigenvalueOracle) {
  NormalSource normal(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix m = normal.matrix(7 + trial % 5, 4 + trial % 3);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(m.transpose() * m);
    EXPECT_NEAR(spectral_norm(m), std::sqrt(eig.eigenvalues().maxCoeff()), 1e-10);
    EXPECT_NEAR(sigma_min(m), std::sqrt(std::max(0.0, eig.eigenvalues().minCoeff())), 1e-8);
    double trace_sqrt = 0.0;
    for (Index i = 0; i < eig.eigenvalues().size(); ++i)
      trace_sqrt += std::sqrt(std::max(0.0, eig.eigenvalues()(i)));
    EXPECT_NEAR(nuclear_norm(m), trace_sqrt, 1e-8);
  }
}

TEST(Linalg, TallMatricesUseTheSameSingularValues) {
  NormalSource normal(12);
  const Matrix tall = normal.matrix(150, 10);
  const Vector fast = singular_values(tall);
  Eigen::JacobiSVD<Matrix> direct(tall);
  EXPECT_LE((fast - direct.singularValues()).norm(), 1e-10);
  const Matrix wide = normal.matrix(60, 80);
  Eigen::JacobiSVD<Matrix> direct_wide(wide);
  EXPECT_LE((singular_values(wide) - direct_wide.singularValues()).norm(), 1e-9);
}

TEST(Linalg, OrthogonalComplementCompletesTheBasis) {
  NormalSource normal(13);
  const Matrix basis = orthonormalize(normal.matrix(9, 3));
  const Matrix perp = orthogonal_complement(basis);
  ASSERT_EQ(perp.cols(), 6);
  EXPECT_LE((basis.transpose() * perp).norm(), 1e-12);
  EXPECT_LE((perp.transpose() * perp - Matrix::Identity(6, 6)).norm(), 1e-12);
}

TEST(Linalg, SymEmbedIsSymmetricWithMirroredSpectrum) {
  NormalSource normal(14);
  const Matrix x = normal.matrix(5, 3);
  const Matrix s = sym_embed(x);
  EXPECT_EQ((s - s.transpose()).norm(), 0.0);
  EXPECT_EQ(s.topLeftCorner(5, 5).norm(), 0.0);
  EXPECT_EQ(s.bottomRightCorner(3, 3).norm(), 0.0);
  EXPECT_NEAR(spectral_norm(s), spectral_norm(x), 1e-12);
}

TEST(SensingOperator, GaussianEntriesHaveVarianceOneOverM) {
  const SensingOperator op = make_gaussian_operator(100, 50, 2000, 7);
  double sum = 0.0, sq = 0.0;
  Index count = 0;
  for (Index i = 0; i < op.m(); ++i) {
    const Matrix a = op.measurement(i);
    sum += a.sum();
    sq += a.squaredNorm();
    count += a.size();
  }
  const double mean = sum / static_cast<double>(count);
  const double var = sq / static_cast<double>(count) - mean * mean;
  EXPECT_GE(var, 0.9 / 2000.0);
  EXPECT_LE(var, 1.1 / 2000.0);
  EXPECT_LT(std::abs(mean), 1e-3);
}

TEST(SensingOperator, DegenerateDimensionsWork) {
  const SensingOperator op = make_gaussian_operator(1, 1, 1, 0);
  EXPECT_EQ(op.m(), 1);
  EXPECT_EQ(op.measurement(0).rows(), 1);
  EXPECT_EQ(op.measurement(0).cols(), 1);
  Matrix x(1, 1);
  x(0, 0) = 2.0;
  EXPECT_DOUBLE_EQ(op.apply(x)(0), 2.0 * op.measurement(0)(0, 0));
}

TEST(SensingOperator, RejectsEmptyShapes) {
  EXPECT_THROW(make_gaussian_operator(100, 50, 0, 0), std::invalid_argument);
  EXPECT_THROW(make_gaussian_operator(0, 50, 10, 0), std::invalid_argument);
  EXPECT_THROW(make_gaussian_operator(10, 0, 10, 0), std::invalid_argument);
  EXPECT_THROW(make_population_operator(0, 5), std::invalid_argument);
  EXPECT_THROW(SensingOperator::from_matrices({}), std::invalid_argument);
}

TEST(SensingOperator, DeterministicPerSeed) {
  const SensingOperator a = make_gaussian_operator(6, 4, 30, 99);
  const SensingOperator b = make_gaussian_operator(6, 4, 30, 99);
  const SensingOperator c = make_gaussian_operator(6, 4, 30, 100);
  EXPECT_EQ((a.measurement(17) - b.measurement(17)).norm(), 0.0);
  EXPECT_GT((a.measurement(17) - c.measurement(17)).norm(), 0.0);
}

TEST(SensingOperator, ApplyMatchesInnerProductsWithMeasurements) {
  const SensingOperator op = make_gaussian_operator(5, 4, 12, 21);
  NormalSource normal(22);
  const Matrix x = normal.matrix(5, 4);
  const Vector y = op.apply(x);
  for (Index i = 0; i < op.m(); ++i)
    EXPECT_NEAR(y(i), (op.measurement(i).array() * x.array()).sum(), 1e-13);
  const SensingOperator same = SensingOperator::from_matrices([&] {
    std::vector<Matrix> ms;
    for (Index i = 0; i < op.m(); ++i) ms.push_back(op.measurement(i));
    return ms;
  }());
  EXPECT_LE((same.apply(x) - y).norm(), 1e-14);
}

TEST(SensingOperator, AdjointnessOnRandomPairs) {
  const SensingOperator op = make_gaussian_operator(20, 15, 400, 31);
  NormalSource normal(32);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix x = normal.matrix(20, 15);
    const Vector y = normal.matrix(400, 1).col(0);
    const double lhs = op.apply(x).dot(y);
    const double rhs = (x.array() * op.adjoint(y).array()).sum();
    EXPECT_LE(std::abs(lhs - rhs), 1e-10 * std::max(1.0, std::abs(lhs)));
  }
}

TEST(SensingOperator, FusedPassEqualsApplyThenAdjoint) {
  const SensingOperator op = make_gaussian_operator(9, 7, 100, 41);
  NormalSource normal(42);
  const Matrix vecs = normal.matrix(63, 3);
  const Vector y = normal.matrix(100, 1).col(0);
  Matrix residuals;
  const Matrix out = op.fused_residual_adjoint(vecs, y, residuals);
  for (Index b = 0; b < 3; ++b) {
    const Matrix m = Eigen::Map<const Matrix>(vecs.col(b).data(), 9, 7);
    const Vector r = op.apply(m) - y;
    EXPECT_LE((residuals.col(b) - r).norm(), 1e-12 * r.norm());
    const Matrix g = op.adjoint(r);
    EXPECT_LE((out.col(b) - Eigen::Map<const Vector>(g.data(), 63)).norm(), 1e-12 * g.norm());
  }
  EXPECT_THROW(op.fused_residual_adjoint(Matrix::Zero(62, 1), y, residuals), std::invalid_argument);
}

TEST(SensingOperator, PopulationModeIsTheIdentity) {
  const SensingOperator op = make_population_operator(6, 4);
  EXPECT_TRUE(op.is_population());
  EXPECT_EQ(op.m(), 0);
  NormalSource normal(51);
  const Matrix x = normal.matrix(6, 4);
  EXPECT_EQ((op.normal(x) - x).norm(), 0.0);
  EXPECT_THROW(op.apply(x), std::logic_error);
  EXPECT_THROW(op.adjoint(Vector::Zero(3)), std::logic_error);
}

TEST(SensingOperator, ShapeMismatchesAreRejected) {
  const SensingOperator op = make_gaussian_operator(5, 4, 10, 1);
  EXPECT_THROW(op.apply(Matrix::Zero(4, 5)), std::invalid_argument);
  EXPECT_THROW(op.adjoint(Vector::Zero(9)), std::invalid_argument);
  EXPECT_THROW(op.normal(Matrix::Zero(5, 5)), std::invalid_argument);
}

TEST(SymmetrizedOperator, ActsThroughTheOffDiagonalBlock) {
  const SensingOperator op = make_gaussian_operator(6, 5, 40, 61);
  NormalSource normal(62);
  const Matrix x = normal.matrix(6, 5);
  // B(sym X) = sqrt(2) A(X).
  EXPECT_LE((op.symmetrized_apply(sym_embed(x)) - std::sqrt(2.0) * op.apply(x)).norm(),
            1e-12 * op.apply(x).norm());
  Matrix s = normal.matrix(11, 11);
  s = (s + s.transpose()).eval();
  const Vector y = normal.matrix(40, 1).col(0);
  const double lhs = op.symmetrized_apply(s).dot(y);
  const double rhs = (s.array() * op.symmetrized_adjoint(y).array()).sum();
  EXPECT_LE(std::abs(lhs - rhs), 1e-10 * std::max(1.0, std::abs(lhs)));
  // B*B(sym M) = sym(A*A M).
  const Matrix bb = op.symmetrized_adjoint(op.symmetrized_apply(sym_embed(x)));
  EXPECT_LE(rel_diff(bb, sym_embed(op.normal(x))), 1e-12);
}

TEST(SymmetrizedOperator, RejectsAsymmetricInput) {
  const SensingOperator op = make_gaussian_operator(3, 2, 5, 1);
  Matrix s = Matrix::Zero(5, 5);
  s(0, 4) = 1.0;
  EXPECT_THROW(op.symmetrized_apply(s), std::invalid_argument);
  EXPECT_THROW(op.symmetrized_apply(Matrix::Zero(4, 4)), std::invalid_argument);
}

TEST(RipEstimate, PopulationOperatorHasNoDistortion) {
  const RipEstimate est = estimate_rip_constant(make_population_operator(10, 8), 2, 5, 0);
  EXPECT_EQ(est.delta_lower, 0.0);
  EXPECT_EQ(est.order, 2);
}

TEST(RipEstimate, ValidatesArguments) {
  const SensingOperator op = make_gaussian_operator(6, 4, 50, 1);
  EXPECT_THROW(estimate_rip_constant(op, 0, 5, 0), std::invalid_argument);
  EXPECT_THROW(estimate_rip_constant(op, 5, 5, 0), std::invalid_argument);
  EXPECT_THROW(estimate_rip_constant(op, 1, 0, 0), std::invalid_argument);
}

TEST(RipEstimate, ShrinksWithMoreMeasurements) {
  const RipEstimate few = estimate_rip_constant(make_gaussian_operator(10, 8, 60, 3), 2, 50, 4);
  const RipEstimate many = estimate_rip_constant(make_gaussian_operator(10, 8, 6000, 3), 2, 50, 4);
  EXPECT_GE(few.delta_lower, 0.0);
  EXPECT_LT(many.delta_lower, few.delta_lower);
  EXPECT_LT(many.delta_lower, 0.2);
}
