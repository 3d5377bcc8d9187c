#pragma once

#include "msl/diagnostics.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace msl {

/// Raised when an iterate or its loss stops being finite.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(Index iter)
      : std::runtime_error("gradient descent diverged at iteration " + std::to_string(iter)),
        iter_(iter) {}
  Index iter() const { return iter_; }

 private:
  Index iter_;
};

struct GdConfig {
  double mu = 0.01;      // absolute step size
  double alpha = 1e-5;   // initialization scale
  Index k = 10;
  Index max_iters = 200000;
  Index record_every = 10;
  std::optional<double> stop_train_loss = 0.5e-9;
  std::optional<double> stop_rel_test_error;  // on ||VW^T - X||_F / ||X||_F
  std::uint64_t seed = 0;                     // initialization seed

  void validate() const;
};

enum class StopReason { max_iters, train_loss, test_error };

const char* to_string(StopReason reason);

struct TrajectoryRecord {
  GdConfig config;
  std::vector<DiagnosticsRecord> records;
  FactorPair final_factors;
  Index iterations_run = 0;
  StopReason stop_reason = StopReason::max_iters;
};

/// Loss value and the n1 x n2 matrix G = (A*A)(VW^T) - A*(y) shared by both
/// factor gradients (G = VW^T - X in population mode).
struct Evaluation {
  double loss = 0.0;
  Matrix residual;
};

Evaluation evaluate(const SensingOperator& op, const Targets& targets, const FactorPair& fp);

/// (1/2)||y - A(VW^T)||^2, or (1/2)||X - VW^T||_F^2 for a population operator.
double loss(const SensingOperator& op, const Targets& targets, const FactorPair& fp);

struct Gradient {
  Matrix dV;  // G W
  Matrix dW;  // G^T V
};

Gradient gradient(const SensingOperator& op, const Targets& targets, const FactorPair& fp);

/// Simultaneous update V' = V - mu G W, W' = W - mu G^T V from one residual.
FactorPair step_with(const FactorPair& fp, const Matrix& residual, double mu);

FactorPair gd_step(const SensingOperator& op, const Targets& targets, const FactorPair& fp,
                   double mu);

struct DiagnosticsOptions {
  bool with_delta = false;
  Index delta_stride = 50;  // in recorded points
};

/// Initializes with init_random(cfg.seed), iterates gd_step and records a
/// snapshot every record_every iterations plus the last one. Stopping rules
/// are checked train_loss, then test_error, then max_iters.
TrajectoryRecord run_trajectory(const GroundTruth& gt, const SensingOperator& op,
                                const GdConfig& cfg, const DiagnosticsOptions& diag = {});

/// Runs several trajectories against one problem in lockstep so that each
/// pass over the operator serves all of them. Results match run_trajectory
/// per config up to floating-point summation order.
std::vector<TrajectoryRecord> run_trajectories(const GroundTruth& gt, const SensingOperator& op,
                                               const std::vector<GdConfig>& cfgs,
                                               const DiagnosticsOptions& diag = {});

}  // namespace msl
