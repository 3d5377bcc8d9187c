#pragma once

#include "msl/audit.hpp"

#include "json.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace msl {

enum class Experiment {
  run,
  imbalance_alpha,
  traintest,
  error_alpha,
  imbalance_stepsize,
  coupling,
  lemma_audit,
  rip_probe,
  power_compare,
};

const char* to_string(Experiment e);
/// Accepts both "error_alpha" and "error-alpha".
Experiment experiment_from_string(std::string_view name);

/// Bad configuration value; what() names the offending field.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct ExperimentConfig {
  Experiment experiment = Experiment::run;
  Index n1 = 100;
  Index n2 = 50;
  Index r = 5;
  Index m = 2000;
  Index k = 10;
  std::vector<double> alphas{1e-5};
  std::vector<double> mus_times_normX{0.01};
  std::vector<std::uint64_t> seeds{1};
  Index max_iters = 200000;
  std::string out_dir = "out";
  bool with_delta = false;

  bool population = false;            // run and coupling only
  std::optional<Index> record_every;  // default: 1 below 2000 max_iters, else 10
  Index delta_stride = 50;            // in recorded points
  double stop_train_loss = 0.5e-9;
  Index jobs = 1;
  Index audit_stride = 10;            // lemma_audit: audit every n-th iteration
  LemmaConstants lemma_constants;     // lemma_audit overrides; mu comes from the run
  Index rip_trials = 200;
  double rip_inflation = 3.0;         // rip_bound_* use inflation * estimated delta
  std::optional<Index> power_t_max;   // power_compare: default ceil(1.25 * window)

  Index effective_record_every() const;
  /// Throws ConfigError.
  void validate() const;
};

/// Parameter defaults of each experiment (grids, k, step sizes).
ExperimentConfig default_config(Experiment e);

/// Overrides fields of `cfg` from a flat JSON object. Unknown keys and
/// mistyped values raise ConfigError naming the key.
void apply_json(ExperimentConfig& cfg, const nlohmann::json& j);
/// Parses a config file; malformed JSON raises ConfigError("config").
nlohmann::json load_config_json(const std::string& path);
/// Defaults of the named experiment (if any) overridden by the file.
ExperimentConfig load_config_file(const std::string& path);
nlohmann::json to_json(const ExperimentConfig& cfg);

/// Seed for the ground truth, operator or init of a run ("truth",
/// "operator", "init").
std::uint64_t role_seed(std::uint64_t base, std::string_view role);

/// Problem instance shared by every grid point of a sweep.
struct Problem {
  GroundTruth gt;
  SensingOperator op;
  std::uint64_t init_seed = 0;
};

Problem make_problem(const ExperimentConfig& cfg, std::uint64_t seed, bool population);

/// GdConfig for one grid point: mu = mu_rel / ||X||.
GdConfig gd_config(const ExperimentConfig& cfg, const Problem& problem, double alpha,
                   double mu_rel);

/// Median of the last 10% (at least one) of the values.
double plateau(const std::vector<double>& values);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
};

/// Ordinary least squares y = slope x + intercept. Needs two distinct x.
LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

/// Runs fn(0..n-1) on up to `jobs` threads and rethrows the first failure.
void parallel_for(std::size_t n, Index jobs, const std::function<void(std::size_t)>& fn);

// Results. Each exp_* writes its files under cfg.out_dir when it is not
// empty and lists them in `files`.

struct RunOutcome {
  std::uint64_t seed = 0;
  double normX = 0.0;
  double kappa = 0.0;
  TrajectoryRecord traj;
  PhaseBoundaries phases;
};

struct RunResult {
  std::vector<RunOutcome> runs;
  std::vector<std::string> files;
};

struct ImbalanceSeries {
  bool population = false;
  double alpha = 0.0;
  std::vector<Index> iters;
  std::vector<double> vw_imbalance;
  double initial = 0.0;
  double max = 0.0;
  double plateau = 0.0;
  Index iterations = 0;
  StopReason stop_reason = StopReason::max_iters;
};

struct ImbalanceAlphaResult {
  std::vector<ImbalanceSeries> series;
  std::vector<std::string> files;
};

struct TrainTestResult {
  double alpha_large = 0.0;
  double alpha_small = 0.0;
  TrajectoryRecord large;
  TrajectoryRecord small;
  std::vector<std::string> files;
};

struct ErrorAlphaRow {
  double alpha = 0.0;
  double rel_test_error_fro_sq = 0.0;
  double rel_test_error_spec = 0.0;
  Index iterations = 0;
  bool reached = false;  // train loss fell below the stopping threshold
};

struct ErrorAlphaResult {
  std::vector<ErrorAlphaRow> rows;
  std::optional<LinearFit> fit_spec;    // log error vs log alpha, reached rows only
  std::optional<LinearFit> fit_fro_sq;
  std::optional<LinearFit> fit_spec_all;  // every row, reached or not (fixed-budget view)
  std::size_t inversions = 0;           // adjacent pairs where the error does not decrease with alpha
  std::vector<std::string> files;
};

struct StepsizeRow {
  double mu_times_normX = 0.0;
  double plateau = 0.0;  // vw_imbalance at the final iterate
  Index iterations = 0;
  bool reached = false;
  std::vector<Index> iters;
  std::vector<double> vw_imbalance;
};

struct StepsizeResult {
  std::vector<StepsizeRow> rows;
  std::optional<LinearFit> fit;
  std::vector<std::string> files;
};

struct CouplingResult {
  TrajectoryRecord traj;
  PhaseBoundaries phases;
  std::optional<double> median_nuisance_ratio;  // after t_local
  double max_signal_angle_x2 = 0.0;
  std::vector<std::string> files;
};

struct LemmaTally {
  LemmaId id = LemmaId::balance_base;
  Index audited = 0;
  Index preconditions_held = 0;
  Index conclusion_held = 0;  // among precondition-satisfied iterations
  std::optional<double> min_margin;
  std::optional<Index> first_violation;

  Index violations() const { return preconditions_held - conclusion_held; }
};

struct LemmaAuditResult {
  TrajectoryRecord traj;
  double delta_hat = 0.0;  // estimated RIP constant before inflation
  double delta_used = 0.0;
  std::vector<LemmaTally> tallies;
  std::vector<LemmaReport> reports;
  std::vector<std::string> files;

  const LemmaTally& tally(LemmaId id) const;
};

struct RipProbeResult {
  std::vector<RipEstimate> estimates;
  std::vector<std::string> files;
};

struct PowerCompareResult {
  PowerMethodComparison comparison;
  std::vector<std::string> files;
};

RunResult exp_run(const ExperimentConfig& cfg);
ImbalanceAlphaResult exp_imbalance_alpha(const ExperimentConfig& cfg);
TrainTestResult exp_traintest(const ExperimentConfig& cfg);
ErrorAlphaResult exp_error_alpha(const ExperimentConfig& cfg);
StepsizeResult exp_imbalance_stepsize(const ExperimentConfig& cfg);
CouplingResult exp_coupling(const ExperimentConfig& cfg);
LemmaAuditResult exp_lemma_audit(const ExperimentConfig& cfg);
RipProbeResult exp_rip_probe(const ExperimentConfig& cfg);
PowerCompareResult exp_power_compare(const ExperimentConfig& cfg);

/// Dispatches on cfg.experiment, writes the summary JSON and returns it.
nlohmann::json run_experiment(const ExperimentConfig& cfg);

}  // namespace msl
