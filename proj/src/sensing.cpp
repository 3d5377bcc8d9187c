#include "msl/sensing.hpp"

#include "msl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace msl {

namespace {

std::string shape(Index r, Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

}  // namespace

SensingOperator make_gaussian_operator(Index n1, Index n2, Index m, std::uint64_t seed) {
  if (n1 < 1 || n2 < 1) throw std::invalid_argument("sensing operator: dimensions must be positive");
  if (m < 1) throw std::invalid_argument("sensing operator: need at least one measurement");
  auto data = std::make_shared<SensingOperator::Storage>(m, n1 * n2);
  NormalSource normal(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n1 * n2; ++j) (*data)(i, j) = scale * normal();
  return SensingOperator(n1, n2, OperatorMode::empirical, std::move(data));
}

SensingOperator make_population_operator(Index n1, Index n2) {
  if (n1 < 1 || n2 < 1) throw std::invalid_argument("sensing operator: dimensions must be positive");
  return SensingOperator(n1, n2, OperatorMode::population, nullptr);
}

SensingOperator SensingOperator::from_matrices(const std::vector<Matrix>& matrices) {
  if (matrices.empty()) throw std::invalid_argument("sensing operator: need at least one measurement");
  const Index n1 = matrices.front().rows();
  const Index n2 = matrices.front().cols();
  if (n1 < 1 || n2 < 1) throw std::invalid_argument("sensing operator: dimensions must be positive");
  auto data = std::make_shared<Storage>(static_cast<Index>(matrices.size()), n1 * n2);
  for (std::size_t i = 0; i < matrices.size(); ++i) {
    const Matrix& a = matrices[i];
    if (a.rows() != n1 || a.cols() != n2)
      throw std::invalid_argument("sensing operator: measurement " + std::to_string(i) +
                                  " has shape " + shape(a.rows(), a.cols()) + ", expected " +
                                  shape(n1, n2));
    data->row(static_cast<Index>(i)) = Eigen::Map<const Vector>(a.data(), n1 * n2).transpose();
  }
  return SensingOperator(n1, n2, OperatorMode::empirical, std::move(data));
}

void SensingOperator::require_empirical(const char* what) const {
  if (is_population())
    throw std::logic_error(std::string(what) + " is undefined for a population operator");
}

Matrix SensingOperator::measurement(Index i) const {
  require_empirical("measurement");
  if (i < 0 || i >= m()) throw std::out_of_range("measurement index out of range");
  Matrix a(n1_, n2_);
  Eigen::Map<Vector>(a.data(), a.size()) = data_->row(i).transpose();
  return a;
}

Vector SensingOperator::apply(const Eigen::Ref<const Matrix>& m) const {
  require_empirical("apply");
  if (m.rows() != n1_ || m.cols() != n2_)
    throw std::invalid_argument("apply: expected " + shape(n1_, n2_) + " matrix, got " +
                                shape(m.rows(), m.cols()));
  const Matrix dense = m;  // contiguous column-major copy for the vec view
  Vector y(this->m());
  y.noalias() = (*data_) * Eigen::Map<const Vector>(dense.data(), dense.size());
  return y;
}

Matrix SensingOperator::adjoint(const Eigen::Ref<const Vector>& y) const {
  require_empirical("adjoint");
  if (y.size() != m())
    throw std::invalid_argument("adjoint: expected vector of length " + std::to_string(m()) +
                                ", got " + std::to_string(y.size()));
  Matrix out(n1_, n2_);
  Eigen::Map<Vector> flat(out.data(), out.size());
  flat.noalias() = data_->transpose() * y;
  return out;
}

Matrix SensingOperator::normal(const Eigen::Ref<const Matrix>& m) const {
  if (m.rows() != n1_ || m.cols() != n2_)
    throw std::invalid_argument("normal: expected " + shape(n1_, n2_) + " matrix, got " +
                                shape(m.rows(), m.cols()));
  if (is_population()) return m;
  return adjoint(apply(m));
}

Matrix SensingOperator::fused_residual_adjoint(const Eigen::Ref<const Matrix>& vecs,
                                               const Eigen::Ref<const Vector>& y,
                                               Matrix& residuals) const {
  require_empirical("fused_residual_adjoint");
  if (vecs.rows() != n1_ * n2_)
    throw std::invalid_argument("fused_residual_adjoint: expected " + std::to_string(n1_ * n2_) +
                                " rows, got " + std::to_string(vecs.rows()));
  if (y.size() != m())
    throw std::invalid_argument("fused_residual_adjoint: expected vector of length " +
                                std::to_string(m()) + ", got " + std::to_string(y.size()));
  // Blocks of rows stay in cache between the forward and the adjoint product,
  // so the operator is streamed from memory once per call.
  constexpr Index kBlock = 16;
  const Index batch = vecs.cols();
  residuals.resize(m(), batch);
  Matrix out = Matrix::Zero(vecs.rows(), batch);
  for (Index i0 = 0; i0 < m(); i0 += kBlock) {
    const Index nb = std::min(kBlock, m() - i0);
    const auto rows = data_->middleRows(i0, nb);
    auto r = residuals.middleRows(i0, nb);
    r.noalias() = rows * vecs;
    r.colwise() -= y.segment(i0, nb);
    out.noalias() += rows.transpose() * r;
  }
  return out;
}

Vector SensingOperator::symmetrized_apply(const Eigen::Ref<const Matrix>& s) const {
  require_empirical("symmetrized_apply");
  const Index d = n1_ + n2_;
  if (s.rows() != d || s.cols() != d)
    throw std::invalid_argument("symmetrized_apply: expected " + shape(d, d) + " matrix, got " +
                                shape(s.rows(), s.cols()));
  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw std::invalid_argument("symmetrized_apply: matrix is not symmetric");
  // <B_i, S> = (1/sqrt 2) <A_i, S12 + S21^T>.
  const Matrix off = s.topRightCorner(n1_, n2_) + s.bottomLeftCorner(n2_, n1_).transpose();
  return apply(off) / std::sqrt(2.0);
}

Matrix SensingOperator::symmetrized_adjoint(const Eigen::Ref<const Vector>& y) const {
  return sym_embed(adjoint(y)) / std::sqrt(2.0);
}

RipEstimate estimate_rip_constant(const SensingOperator& op, Index order, Index trials,
                                  std::uint64_t seed) {
  if (order < 1 || order > std::min(op.n1(), op.n2()))
    throw std::invalid_argument("estimate_rip_constant: order " + std::to_string(order) +
                                " outside [1, min(n1, n2)]");
  if (trials < 1) throw std::invalid_argument("estimate_rip_constant: need at least one trial");
  RipEstimate est{order, 0.0, trials, seed};
  // A*A = Id exactly, so no probe can be distorted.
  if (op.is_population()) return est;
  NormalSource normal(seed);
  for (Index t = 0; t < trials; ++t) {
    const Matrix left = normal.matrix(op.n1(), order);
    const Matrix right = normal.matrix(op.n2(), order);
    Matrix probe = left * right.transpose();
    probe /= probe.norm();
    const double distortion = std::abs(op.apply(probe).squaredNorm() - 1.0);
    est.delta_lower = std::max(est.delta_lower, distortion);
  }
  return est;
}

}  // namespace msl
