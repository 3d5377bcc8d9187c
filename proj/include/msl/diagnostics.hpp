#pragma once

#include "msl/model.hpp"
#include "msl/sensing.hpp"

#include <optional>

namespace msl {

/// What the loss is fitted against: measurements y = A(X) for an empirical
/// operator, or X itself for a population operator.
struct Targets {
  Vector y;
  Matrix X;
};

Targets observe(const SensingOperator& op, const GroundTruth& gt);

/// Signal/nuisance split of a lifted factor Z against the fixed basis L_X:
/// L_X^T Z = P_t diag(Sigma_t) Q_t^T, and Q_t_perp completes Q_t in R^k.
struct Decomposition {
  Matrix P_t;       // r x r
  Vector Sigma_t;   // min(r, k), descending
  Matrix Q_t;       // k x min(r, k)
  Matrix Q_t_perp;  // k x (k - min(r, k))
  bool full_rank = false;
};

Decomposition decompose(const GroundTruth& gt, const Eigen::Ref<const Matrix>& z);

/// Left orthonormal factor of Z Q_t (the column space of the signal part).
Matrix signal_basis(const Eigen::Ref<const Matrix>& z, const Decomposition& dec);

/// One snapshot of a trajectory. Fields that need a full-rank L_X^T Z are
/// empty when the decomposition is rank deficient.
struct DiagnosticsRecord {
  Index iter = 0;
  double train_loss = 0.0;
  double rel_test_error_fro = 0.0;   // ||VW^T - X||_F / ||X||_F
  double rel_test_error_spec = 0.0;  // ||VW^T - X|| / ||X||
  std::optional<double> sigma_min_signal;        // sigma_min(Z Q_t)
  std::optional<double> nuisance_norm;           // ||Z Q_perp||
  std::optional<double> angle_norm;              // ||L_perp^T P_{Z Q_t}||
  double imbalance_norm = 0.0;                   // ||Z~^T Z||
  std::optional<double> imbalance_nuisance;      // ||Z~^T Z Q_perp||
  std::optional<double> imbalance_signal_angle;  // ||Z~^T P_{Z Q_t}||
  double vw_imbalance = 0.0;                     // ||V^T V - W^T W||
  std::optional<double> delta_norm;              // ||Delta_t||, only on request
  double z_norm = 0.0;                           // ||Z||
  double sigma_min_LZ = 0.0;                     // sigma_min(L_X^T Z)
};

/// Snapshot from a known train loss; delta_norm is stored as given.
DiagnosticsRecord record_snapshot(const GroundTruth& gt, const FactorPair& fp, Index iter,
                                  double train_loss, std::optional<double> delta_norm);

DiagnosticsRecord compute_record(const GroundTruth& gt, const SensingOperator& op,
                                 const Targets& targets, const FactorPair& fp, Index iter,
                                 bool with_delta);

/// Off-diagonal block of Delta = (Id - B*B)(ZZ^T - Z~Z~^T - sym(X)), which
/// is (Id - A*A)(VW^T - X). Zero for population operators.
Matrix delta_block(const GroundTruth& gt, const SensingOperator& op, const FactorPair& fp);

/// Full (n1+n2) x (n1+n2) perturbation term; its diagonal blocks are zero.
Matrix delta_term(const GroundTruth& gt, const SensingOperator& op, const LiftedPair& lifted);

/// ||Delta||, computed from the off-diagonal block.
double delta_norm(const GroundTruth& gt, const SensingOperator& op, const FactorPair& fp);

/// Phase-3 threshold sqrt(sigma_min(X) / 8) on sigma_min(L_X^T Z).
double local_phase_threshold(const GroundTruth& gt);

}  // namespace msl
