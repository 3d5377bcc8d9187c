#include "msl/diagnostics.hpp"

#include "msl/optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace msl {

Targets observe(const SensingOperator& op, const GroundTruth& gt) {
  if (op.n1() != gt.n1() || op.n2() != gt.n2())
    throw std::invalid_argument("observe: operator and ground truth dimensions differ");
  Targets t;
  if (op.is_population())
    t.X = gt.X;
  else
    t.y = op.apply(gt.X);
  return t;
}

Decomposition decompose(const GroundTruth& gt, const Eigen::Ref<const Matrix>& z) {
  if (z.rows() != gt.L_X.rows())
    throw std::invalid_argument("decompose: lifted factor has the wrong row count");
  const Index r = gt.r;
  const Index k = z.cols();
  const Matrix lz = gt.L_X.transpose() * z;
  Eigen::JacobiSVD<Matrix> svd(lz, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Index s = std::min(r, k);
  Decomposition dec;
  dec.P_t = svd.matrixU();
  dec.Sigma_t = svd.singularValues();
  dec.Q_t = svd.matrixV().leftCols(s);
  dec.Q_t_perp = k > s ? orthonormalize(svd.matrixV().rightCols(k - s)) : Matrix(k, 0);
  dec.full_rank = k >= r && dec.Sigma_t(r - 1) > 1e-12 * std::max(1.0, dec.Sigma_t(0));
  return dec;
}

Matrix signal_basis(const Eigen::Ref<const Matrix>& z, const Decomposition& dec) {
  const Matrix zq = z * dec.Q_t;
  Eigen::JacobiSVD<Matrix> svd(zq, Eigen::ComputeThinU);
  return svd.matrixU();
}

DiagnosticsRecord record_snapshot(const GroundTruth& gt, const FactorPair& fp, Index iter,
                                  double train_loss, std::optional<double> delta) {
  const LiftedPair lp = lift(fp);
  DiagnosticsRecord rec;
  rec.iter = iter;
  rec.train_loss = train_loss;
  rec.delta_norm = delta;

  const Matrix diff = fp.product() - gt.X;
  rec.rel_test_error_fro = diff.norm() / gt.X.norm();
  Matrix left(fp.V.rows(), fp.k() + gt.r);
  left << fp.V, -(gt.P_X * gt.Sigma_X.asDiagonal());
  Matrix right(fp.W.rows(), fp.k() + gt.r);
  right << fp.W, gt.Q_X;
  rec.rel_test_error_spec = spectral_norm_of_product(left, right) / gt.norm();

  const Matrix coupling = lp.Z_tilde.transpose() * lp.Z;
  rec.imbalance_norm = spectral_norm(coupling);
  rec.vw_imbalance = spectral_norm(fp.V.transpose() * fp.V - fp.W.transpose() * fp.W);
  rec.z_norm = spectral_norm(lp.Z);

  const Decomposition dec = decompose(gt, lp.Z);
  rec.sigma_min_LZ = fp.k() >= gt.r ? dec.Sigma_t(gt.r - 1) : 0.0;
  if (!dec.full_rank) return rec;

  const Matrix zq = lp.Z * dec.Q_t;
  rec.sigma_min_signal = sigma_min(zq);
  rec.nuisance_norm = spectral_norm(lp.Z * dec.Q_t_perp);
  const Matrix p = signal_basis(lp.Z, dec);
  rec.angle_norm = spectral_norm(p - gt.L_X * (gt.L_X.transpose() * p));
  rec.imbalance_nuisance = spectral_norm(coupling * dec.Q_t_perp);
  rec.imbalance_signal_angle = spectral_norm(lp.Z_tilde.transpose() * p);
  return rec;
}

Matrix delta_block(const GroundTruth& gt, const SensingOperator& op, const FactorPair& fp) {
  if (op.is_population()) return Matrix::Zero(gt.n1(), gt.n2());
  const Matrix diff = fp.product() - gt.X;
  return diff - op.normal(diff);
}

Matrix delta_term(const GroundTruth& gt, const SensingOperator& op, const LiftedPair& lifted) {
  return sym_embed(delta_block(gt, op, unlift(lifted, gt.n1())));
}

double delta_norm(const GroundTruth& gt, const SensingOperator& op, const FactorPair& fp) {
  return spectral_norm(delta_block(gt, op, fp));
}

DiagnosticsRecord compute_record(const GroundTruth& gt, const SensingOperator& op,
                                 const Targets& targets, const FactorPair& fp, Index iter,
                                 bool with_delta) {
  std::optional<double> delta;
  if (with_delta) delta = delta_norm(gt, op, fp);
  return record_snapshot(gt, fp, iter, loss(op, targets, fp), delta);
}

double local_phase_threshold(const GroundTruth& gt) { return std::sqrt(gt.sigma_min() / 8.0); }

}  // namespace msl
