#pragma once

#include "msl/optimizer.hpp"

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace msl {

/// Per-iteration inequalities from the convergence analysis, checked
/// numerically on concrete iterates.
enum class LemmaId {
  sigmin_growth,
  noise_growth,
  angle_control,
  norm_control,
  balance_base,
  balance_perp,
  balance_angle,
  spec_loss_bound,
  local_convergence,
  rip_bound_1,
  rip_bound_2,
  rip_bound_3,
};

inline constexpr LemmaId kAllLemmas[] = {
    LemmaId::sigmin_growth,   LemmaId::noise_growth,      LemmaId::angle_control,
    LemmaId::norm_control,    LemmaId::balance_base,      LemmaId::balance_perp,
    LemmaId::balance_angle,   LemmaId::spec_loss_bound,   LemmaId::local_convergence,
    LemmaId::rip_bound_1,     LemmaId::rip_bound_2,       LemmaId::rip_bound_3,
};

const char* to_string(LemmaId id);
/// Throws std::invalid_argument for unknown names.
LemmaId lemma_from_string(std::string_view name);
/// True when the inequality relates an iterate to its gradient-descent successor.
bool needs_successor(LemmaId id);

/// Raised when a caller-supplied successor is not the gradient step of the
/// supplied state.
class AuditIntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Named constants. "mu" is required; "c" (0.01), "C" (100) and "eps" (1)
/// have defaults; "delta" (an RIP constant) is required by the rip_bound_*
/// checks only.
using LemmaConstants = std::map<std::string, double>;

struct LemmaReport {
  LemmaId lemma_id = LemmaId::balance_base;
  Index iter = 0;
  bool preconditions_hold = false;
  bool conclusion_holds = false;
  double margin = 0.0;  // min over the lemma's inequalities of RHS - LHS
  LemmaConstants constants_used;
};

/// Everything the checks read from one iterate, computed once.
struct StateSummary {
  FactorPair fp;
  LiftedPair lifted;
  Decomposition dec;
  bool full_rank = false;
  double z_norm = 0.0;
  double sigma_min_LZ = 0.0;
  double sigma_min_signal = 0.0;
  double nuisance_norm = 0.0;
  double angle_norm = 0.0;
  double imbalance_norm = 0.0;
  double imbalance_nuisance = 0.0;
  double imbalance_signal_angle = 0.0;
  double delta_norm = 0.0;
  double residual_norm = 0.0;       // ||sym(X) - ZZ^T + Z~Z~^T|| = ||X - VW^T||
  double residual_signal = 0.0;     // ||L_X^T (sym(X) - ZZ^T + Z~Z~^T)||
  double residual_orthogonal = 0.0; // ||L_perp^T (sym(X) - ZZ^T + Z~Z~^T)||
};

StateSummary summarize(const GroundTruth& gt, const SensingOperator& op, const FactorPair& fp);

/// Fills defaults and rejects unknown or missing constants for `id`.
LemmaConstants resolve_constants(LemmaId id, const LemmaConstants& constants);

/// Checks one lemma at state_t. Two-state lemmas need state_t1, which must
/// equal gd_step(state_t, mu) within 1e-10 (AuditIntegrityError otherwise).
LemmaReport check_lemma(LemmaId id, const GroundTruth& gt, const SensingOperator& op,
                        const FactorPair& state_t, const FactorPair* state_t1,
                        const LemmaConstants& constants, Index iter = 0);

/// Same check from precomputed summaries (next may be null for one-state lemmas).
LemmaReport check_lemma(LemmaId id, const GroundTruth& gt, const SensingOperator& op,
                        const StateSummary& now, const StateSummary* next,
                        const LemmaConstants& constants, Index iter);

struct PhaseBoundaries {
  std::optional<Index> t_signal;  // heuristic: sigma_min(Z Q_t) doubled from iteration 0
  std::optional<Index> t_local;   // sigma_min(L_X^T Z) >= sqrt(sigma_min(X) / 8)
};

PhaseBoundaries phase_boundaries(const TrajectoryRecord& traj, const GroundTruth& gt);

struct PowerMethodRow {
  Index t = 0;
  double error_norm = 0.0;  // ||Z_t - (Id + mu F)^t Z_0||
  double bound = 0.0;       // (16/||F||) min{k, n1+n2} (1 + mu||F||)^{3t} ||Z_0||^3
  bool in_window = false;
};

struct PowerMethodComparison {
  double F_norm = 0.0;
  double z0_norm = 0.0;
  double window = 0.0;            // last t covered by the bound
  bool init_small_enough = false; // ||Z_0||^2 <= ||F|| / 16
  std::vector<PowerMethodRow> rows;

  /// ||E_t|| <= bound_t at every row inside the window.
  bool holds_in_window() const;
};

/// Compares gradient descent (init from cfg) with the power iteration
/// Z'_t = (Id + mu F)^t Z_0, F = (B*B)(sym(X)), for t = 0..t_max.
PowerMethodComparison power_method_comparison(const GroundTruth& gt, const SensingOperator& op,
                                              const GdConfig& cfg, Index t_max);

}  // namespace msl
