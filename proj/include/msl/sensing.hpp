#pragma once

#include "msl/linalg.hpp"

#include <cstdint>
#include <memory>
#include <vector>

namespace msl {

enum class OperatorMode { empirical, population };

/// Linear measurement map A: R^{n1 x n2} -> R^m, y_i = <A_i, M>.
///
/// Empirical operators hold the m measurement matrices densely, one row of
/// an m x (n1 n2) row-major array per A_i (column-major vec of A_i). The
/// storage is shared between copies and never mutated.
///
/// Population operators hold no matrices. They stand for the idealization
/// A*A = Id: normal() is the identity and raw apply()/adjoint() throw.
class SensingOperator {
 public:
  using Storage = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  /// Builds an empirical operator from explicit measurement matrices.
  static SensingOperator from_matrices(const std::vector<Matrix>& matrices);

  Index n1() const { return n1_; }
  Index n2() const { return n2_; }
  /// Number of measurements; 0 in population mode.
  Index m() const { return data_ ? data_->rows() : 0; }
  OperatorMode mode() const { return mode_; }
  bool is_population() const { return mode_ == OperatorMode::population; }

  /// Copy of A_i.
  Matrix measurement(Index i) const;

  /// y_i = <A_i, M>.
  Vector apply(const Eigen::Ref<const Matrix>& m) const;

  /// sum_i y_i A_i.
  Matrix adjoint(const Eigen::Ref<const Vector>& y) const;

  /// (A*A)(M); the identity for population operators.
  Matrix normal(const Eigen::Ref<const Matrix>& m) const;

  /// One pass over the stored rows for a batch of B matrices given as the
  /// columns of `vecs` (column-major vec of each n1 x n2 matrix). Writes
  /// R_j = A(M_j) - y to the columns of `residuals` (m x B) and returns the
  /// vec'd adjoints A*(R_j) as the columns of an (n1 n2) x B matrix.
  Matrix fused_residual_adjoint(const Eigen::Ref<const Matrix>& vecs,
                                const Eigen::Ref<const Vector>& y, Matrix& residuals) const;

  /// (B(S))_i = <B_i, S> with B_i = (1/sqrt 2) [[0, A_i], [A_i^T, 0]].
  /// Only the off-diagonal blocks of S are read.
  Vector symmetrized_apply(const Eigen::Ref<const Matrix>& s) const;

  /// sum_i y_i B_i = (1/sqrt 2) sym(A*(y)).
  Matrix symmetrized_adjoint(const Eigen::Ref<const Vector>& y) const;

 private:
  friend SensingOperator make_gaussian_operator(Index, Index, Index, std::uint64_t);
  friend SensingOperator make_population_operator(Index, Index);

  SensingOperator(Index n1, Index n2, OperatorMode mode, std::shared_ptr<const Storage> data)
      : n1_(n1), n2_(n2), mode_(mode), data_(std::move(data)) {}

  void require_empirical(const char* what) const;

  Index n1_ = 0;
  Index n2_ = 0;
  OperatorMode mode_ = OperatorMode::empirical;
  std::shared_ptr<const Storage> data_;
};

/// A_i entries i.i.d. N(0, 1/m), drawn A_1 first, each column by column.
SensingOperator make_gaussian_operator(Index n1, Index n2, Index m, std::uint64_t seed);

SensingOperator make_population_operator(Index n1, Index n2);

/// Empirical lower bound on the RIP constant of a given order.
struct RipEstimate {
  Index order = 0;
  double delta_lower = 0.0;  // max observed | ||A(M)||^2 - ||M||_F^2 | / ||M||_F^2
  Index trials = 0;
  std::uint64_t seed = 0;
};

/// Probes `trials` random rank-`order` matrices (product of Gaussian factors,
/// Frobenius-normalized) and records the worst relative distortion. The
/// result is a lower bound on the true constant, never a certificate.
RipEstimate estimate_rip_constant(const SensingOperator& op, Index order, Index trials,
                                  std::uint64_t seed);

}  // namespace msl
