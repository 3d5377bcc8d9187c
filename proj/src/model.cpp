#include "msl/model.hpp"

#include "msl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace msl {

namespace {

void check_rank(Index n1, Index n2, Index r) {
  if (n1 < 1 || n2 < 1) throw std::invalid_argument("ground truth: dimensions must be positive");
  if (r < 1 || r > std::min(n1, n2))
    throw std::invalid_argument("ground truth: rank " + std::to_string(r) +
                                " outside [1, min(n1, n2)]");
}

// Fills every derived field from (P, sigma, Q). Flips column signs so the
// largest-magnitude entry of each column of P is positive.
GroundTruth assemble(Matrix p, Vector sigma, Matrix q) {
  for (Index j = 0; j < p.cols(); ++j) {
    Index arg = 0;
    p.col(j).cwiseAbs().maxCoeff(&arg);
    if (p(arg, j) < 0) {
      p.col(j) = -p.col(j);
      q.col(j) = -q.col(j);
    }
  }
  GroundTruth gt;
  gt.r = sigma.size();
  gt.X = p * sigma.asDiagonal() * q.transpose();
  gt.kappa = sigma(0) / sigma(gt.r - 1);
  const Index n1 = p.rows();
  const Index n2 = q.rows();
  const double h = 1.0 / std::sqrt(2.0);
  gt.L_X.resize(n1 + n2, gt.r);
  gt.L_X << h * p, h * q;
  gt.L_tilde_X.resize(n1 + n2, gt.r);
  gt.L_tilde_X << h * p, -h * q;
  gt.L_X_perp = orthogonal_complement(gt.L_X);
  gt.P_X = std::move(p);
  gt.Q_X = std::move(q);
  gt.Sigma_X = std::move(sigma);
  return gt;
}

}  // namespace

Matrix GroundTruth::L_tilde_X_perp() const {
  Matrix out = L_X_perp;
  out.bottomRows(n2()) *= -1.0;
  return out;
}

GroundTruth make_ground_truth(Index n1, Index n2, Index r, std::uint64_t seed) {
  check_rank(n1, n2, r);
  NormalSource normal(seed);
  const Matrix x1 = normal.matrix(n1, r);
  const Matrix x2 = normal.matrix(r, n2);
  // X1 X2 = Q1 (R1 R2^T) Q2^T; the SVD of the r x r core gives the exact
  // singular triplets without touching the n1 x n2 product.
  Eigen::HouseholderQR<Matrix> qr1(x1);
  Eigen::HouseholderQR<Matrix> qr2(x2.transpose());
  const Matrix q1 = qr1.householderQ() * Matrix::Identity(n1, r);
  const Matrix q2 = qr2.householderQ() * Matrix::Identity(n2, r);
  const Matrix r1 = qr1.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  const Matrix r2 = qr2.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  Eigen::JacobiSVD<Matrix> core(r1 * r2.transpose(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector s = core.singularValues();
  if (!(s(r - 1) > 1e-10 * s(0)))
    throw std::runtime_error("ground truth: sampled factors are rank deficient");
  return assemble(q1 * core.matrixU(), s / s(0), q2 * core.matrixV());
}

GroundTruth make_ground_truth_conditioned(Index n1, Index n2, Index r, double kappa_target,
                                          std::uint64_t seed) {
  check_rank(n1, n2, r);
  if (!(kappa_target >= 1.0)) throw std::invalid_argument("ground truth: kappa_target must be >= 1");
  if (r == 1 && kappa_target != 1.0)
    throw std::invalid_argument("ground truth: a rank-1 matrix has condition number 1");
  NormalSource normal(seed);
  const Matrix p = orthonormalize(normal.matrix(n1, r));
  const Matrix q = orthonormalize(normal.matrix(n2, r));
  Vector sigma(r);
  for (Index i = 0; i < r; ++i)
    sigma(i) = r == 1 ? 1.0 : std::pow(kappa_target, -static_cast<double>(i) / (r - 1));
  return assemble(p, sigma, q);
}

FactorPair init_random(Index n1, Index n2, Index k, double alpha, std::uint64_t seed) {
  if (n1 < 1 || n2 < 1 || k < 1) throw std::invalid_argument("init_random: dimensions must be positive");
  if (!(alpha >= 0.0)) throw std::invalid_argument("init_random: alpha must be >= 0");
  NormalSource normal(seed);
  FactorPair fp;
  fp.V = normal.matrix(n1, k, alpha);
  fp.W = normal.matrix(n2, k, alpha);
  return fp;
}

LiftedPair lift(const FactorPair& fp) {
  const double h = 1.0 / std::sqrt(2.0);
  const Index n1 = fp.V.rows();
  const Index n2 = fp.W.rows();
  LiftedPair lp;
  lp.Z.resize(n1 + n2, fp.k());
  lp.Z << h * fp.V, h * fp.W;
  lp.Z_tilde.resize(n1 + n2, fp.k());
  lp.Z_tilde << h * fp.V, -h * fp.W;
  return lp;
}

FactorPair unlift(const LiftedPair& lp, Index n1) {
  const double h = 1.0 / std::sqrt(2.0);
  const Index n2 = lp.Z.rows() - n1;
  return FactorPair{h * (lp.Z.topRows(n1) + lp.Z_tilde.topRows(n1)),
                    h * (lp.Z.bottomRows(n2) - lp.Z_tilde.bottomRows(n2))};
}

}  // namespace msl
