#include "msl/optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace msl {

void GdConfig::validate() const {
  if (!(mu > 0.0) || !std::isfinite(mu)) throw std::invalid_argument("config: mu must be > 0");
  if (!(alpha >= 0.0)) throw std::invalid_argument("config: alpha must be >= 0");
  if (k < 1) throw std::invalid_argument("config: k must be >= 1");
  if (max_iters < 1) throw std::invalid_argument("config: max_iters must be >= 1");
  if (record_every < 1) throw std::invalid_argument("config: record_every must be >= 1");
}

const char* to_string(StopReason reason) {
  switch (reason) {
    case StopReason::max_iters: return "max_iters";
    case StopReason::train_loss: return "train_loss";
    case StopReason::test_error: return "test_error";
  }
  return "unknown";
}

namespace {

void check_shapes(const SensingOperator& op, const FactorPair& fp) {
  if (fp.V.rows() != op.n1() || fp.W.rows() != op.n2() || fp.V.cols() != fp.W.cols())
    throw std::invalid_argument("factor shapes do not match the operator");
}

}  // namespace

Evaluation evaluate(const SensingOperator& op, const Targets& targets, const FactorPair& fp) {
  check_shapes(op, fp);
  Evaluation ev;
  const Matrix prod = fp.product();
  if (op.is_population()) {
    if (targets.X.rows() != op.n1() || targets.X.cols() != op.n2())
      throw std::invalid_argument("population operator needs the ground truth as target");
    ev.residual = prod - targets.X;
    ev.loss = 0.5 * ev.residual.squaredNorm();
    return ev;
  }
  if (targets.y.size() != op.m())
    throw std::invalid_argument("empirical operator needs a measurement vector of length m");
  Matrix r;
  const Matrix g = op.fused_residual_adjoint(Eigen::Map<const Vector>(prod.data(), prod.size()),
                                             targets.y, r);
  ev.loss = 0.5 * r.squaredNorm();
  ev.residual = Eigen::Map<const Matrix>(g.data(), op.n1(), op.n2());
  return ev;
}

double loss(const SensingOperator& op, const Targets& targets, const FactorPair& fp) {
  check_shapes(op, fp);
  if (op.is_population()) return evaluate(op, targets, fp).loss;
  if (targets.y.size() != op.m())
    throw std::invalid_argument("empirical operator needs a measurement vector of length m");
  return 0.5 * (targets.y - op.apply(fp.product())).squaredNorm();
}

Gradient gradient(const SensingOperator& op, const Targets& targets, const FactorPair& fp) {
  const Evaluation ev = evaluate(op, targets, fp);
  return Gradient{ev.residual * fp.W, ev.residual.transpose() * fp.V};
}

FactorPair step_with(const FactorPair& fp, const Matrix& residual, double mu) {
  FactorPair next;
  next.V = fp.V - mu * (residual * fp.W);
  next.W = fp.W - mu * (residual.transpose() * fp.V);
  return next;
}

FactorPair gd_step(const SensingOperator& op, const Targets& targets, const FactorPair& fp,
                   double mu) {
  if (!(mu >= 0.0)) throw std::invalid_argument("gd_step: mu must be >= 0");
  return step_with(fp, evaluate(op, targets, fp).residual, mu);
}

namespace {

struct Runner {
  GdConfig cfg;
  TrajectoryRecord traj;
  FactorPair fp;
  Index recorded = 0;
  bool done = false;
};

// Everything in one iteration of one trajectory except computing the
// residual, which the caller batches across trajectories.
void advance(Runner& run, Index t, Evaluation& ev, const GroundTruth& gt,
             const SensingOperator& op, double x_fro, const DiagnosticsOptions& diag) {
  const GdConfig& cfg = run.cfg;
  FactorPair& fp = run.fp;
  if (!std::isfinite(ev.loss) || !fp.V.allFinite() || !fp.W.allFinite()) throw DivergenceError(t);

  std::optional<StopReason> stop;
  if (cfg.stop_train_loss && ev.loss < *cfg.stop_train_loss) {
    stop = StopReason::train_loss;
  } else if (cfg.stop_rel_test_error &&
             (fp.product() - gt.X).norm() / x_fro < *cfg.stop_rel_test_error) {
    stop = StopReason::test_error;
  } else if (t >= cfg.max_iters) {
    stop = StopReason::max_iters;
  }

  if (stop || t % cfg.record_every == 0) {
    std::optional<double> delta;
    if (diag.with_delta && (stop || run.recorded % diag.delta_stride == 0))
      delta = delta_norm(gt, op, fp);
    run.traj.records.push_back(record_snapshot(gt, fp, t, ev.loss, delta));
    ++run.recorded;
  }
  if (stop) {
    run.traj.stop_reason = *stop;
    run.traj.iterations_run = t;
    run.traj.final_factors = fp;
    run.done = true;
    return;
  }
  fp = step_with(fp, ev.residual, cfg.mu);
}

}  // namespace

TrajectoryRecord run_trajectory(const GroundTruth& gt, const SensingOperator& op,
                                const GdConfig& cfg, const DiagnosticsOptions& diag) {
  return std::move(run_trajectories(gt, op, {cfg}, diag).front());
}

std::vector<TrajectoryRecord> run_trajectories(const GroundTruth& gt, const SensingOperator& op,
                                               const std::vector<GdConfig>& cfgs,
                                               const DiagnosticsOptions& diag) {
  if (op.n1() != gt.n1() || op.n2() != gt.n2())
    throw std::invalid_argument("run_trajectory: operator and ground truth dimensions differ");
  if (diag.with_delta && diag.delta_stride < 1)
    throw std::invalid_argument("run_trajectory: delta_stride must be >= 1");
  std::vector<Runner> runs;
  runs.reserve(cfgs.size());
  for (const GdConfig& cfg : cfgs) {
    cfg.validate();
    Runner run;
    run.cfg = cfg;
    run.traj.config = cfg;
    run.fp = init_random(gt.n1(), gt.n2(), cfg.k, cfg.alpha, cfg.seed);
    runs.push_back(std::move(run));
  }
  const Targets targets = observe(op, gt);
  const double x_fro = gt.X.norm();
  const Index cells = gt.n1() * gt.n2();

  std::vector<Runner*> active;
  for (Runner& run : runs) active.push_back(&run);
  for (Index t = 0; !active.empty(); ++t) {
    std::vector<Evaluation> evs(active.size());
    if (op.is_population()) {
      for (std::size_t b = 0; b < active.size(); ++b) evs[b] = evaluate(op, targets, active[b]->fp);
    } else {
      Matrix vecs(cells, static_cast<Index>(active.size()));
      for (std::size_t b = 0; b < active.size(); ++b) {
        const Matrix prod = active[b]->fp.product();
        vecs.col(static_cast<Index>(b)) = Eigen::Map<const Vector>(prod.data(), cells);
      }
      Matrix r;
      const Matrix g = op.fused_residual_adjoint(vecs, targets.y, r);
      for (std::size_t b = 0; b < active.size(); ++b) {
        const Index col = static_cast<Index>(b);
        evs[b].loss = 0.5 * r.col(col).squaredNorm();
        evs[b].residual = Eigen::Map<const Matrix>(g.col(col).data(), gt.n1(), gt.n2());
      }
    }
    for (std::size_t b = 0; b < active.size(); ++b) advance(*active[b], t, evs[b], gt, op, x_fro, diag);
    std::erase_if(active, [](const Runner* run) { return run->done; });
  }

  std::vector<TrajectoryRecord> out;
  out.reserve(runs.size());
  for (Runner& run : runs) out.push_back(std::move(run.traj));
  return out;
}

}  // namespace msl
