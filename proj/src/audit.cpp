#include "msl/audit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace msl {

namespace {

struct LemmaName {
  LemmaId id;
  const char* name;
};

constexpr std::array<LemmaName, 12> kNames{{
    {LemmaId::sigmin_growth, "sigmin_growth"},
    {LemmaId::noise_growth, "noise_growth"},
    {LemmaId::angle_control, "angle_control"},
    {LemmaId::norm_control, "norm_control"},
    {LemmaId::balance_base, "balance_base"},
    {LemmaId::balance_perp, "balance_perp"},
    {LemmaId::balance_angle, "balance_angle"},
    {LemmaId::spec_loss_bound, "spec_loss_bound"},
    {LemmaId::local_convergence, "local_convergence"},
    {LemmaId::rip_bound_1, "rip_bound_1"},
    {LemmaId::rip_bound_2, "rip_bound_2"},
    {LemmaId::rip_bound_3, "rip_bound_3"},
}};

// a <= b with slack for exact-boundary choices such as mu = 1 / (100 ||X||).
bool le(double a, double b) { return a <= b + 1e-12 * std::abs(b); }

// Accumulates RHS - LHS over the inequalities of one conclusion.
class Conclusion {
 public:
  void require(double lhs, double rhs) {
    const double margin = rhs - lhs;
    const double scale = std::max(std::abs(lhs), std::abs(rhs));
    holds_ = holds_ && margin >= -1e-10 * scale;
    margin_ = std::min(margin_, margin);
  }
  bool holds() const { return holds_; }
  double margin() const { return margin_; }

 private:
  bool holds_ = true;
  double margin_ = std::numeric_limits<double>::infinity();
};

double constant(const LemmaConstants& c, const char* key) { return c.at(key); }

bool signal_rank_ok(const Matrix& lz_q) {
  const Vector s = singular_values(lz_q);
  return s.size() > 0 && s(s.size() - 1) > 1e-12 * std::max(1.0, s(0));
}

}  // namespace

const char* to_string(LemmaId id) {
  for (const auto& n : kNames)
    if (n.id == id) return n.name;
  return "unknown";
}

LemmaId lemma_from_string(std::string_view name) {
  for (const auto& n : kNames)
    if (name == n.name) return n.id;
  throw std::invalid_argument("unknown lemma id '" + std::string(name) + "'");
}

bool needs_successor(LemmaId id) {
  switch (id) {
    case LemmaId::spec_loss_bound:
    case LemmaId::rip_bound_1:
    case LemmaId::rip_bound_2:
    case LemmaId::rip_bound_3:
      return false;
    default:
      return true;
  }
}

LemmaConstants resolve_constants(LemmaId id, const LemmaConstants& constants) {
  LemmaConstants out{{"c", 0.01}, {"C", 100.0}, {"eps", 1.0}};
  for (const auto& [key, value] : constants) {
    if (key != "mu" && key != "c" && key != "C" && key != "eps" && key != "delta")
      throw std::invalid_argument("unknown lemma constant '" + key + "'");
    if (!std::isfinite(value)) throw std::invalid_argument("lemma constant '" + key + "' is not finite");
    out[key] = value;
  }
  if (!out.count("mu")) throw std::invalid_argument("lemma constants: 'mu' is required");
  const bool rip = id == LemmaId::rip_bound_1 || id == LemmaId::rip_bound_2 ||
                   id == LemmaId::rip_bound_3;
  if (rip && !out.count("delta"))
    throw std::invalid_argument(std::string(to_string(id)) + " needs the RIP constant 'delta'");
  return out;
}

StateSummary summarize(const GroundTruth& gt, const SensingOperator& op, const FactorPair& fp) {
  StateSummary s;
  s.fp = fp;
  s.lifted = lift(fp);
  s.dec = decompose(gt, s.lifted.Z);
  s.full_rank = s.dec.full_rank;
  s.z_norm = spectral_norm(s.lifted.Z);
  s.sigma_min_LZ = fp.k() >= gt.r ? s.dec.Sigma_t(gt.r - 1) : 0.0;
  const Matrix coupling = s.lifted.Z_tilde.transpose() * s.lifted.Z;
  s.imbalance_norm = spectral_norm(coupling);
  s.delta_norm = delta_norm(gt, op, fp);

  const Matrix residual = sym_embed(gt.X - fp.product());
  s.residual_norm = spectral_norm(gt.X - fp.product());
  const Matrix along = gt.L_X.transpose() * residual;
  s.residual_signal = spectral_norm(along);
  s.residual_orthogonal = spectral_norm(residual - gt.L_X * along);

  if (!s.full_rank) return s;
  const Matrix zq = s.lifted.Z * s.dec.Q_t;
  s.sigma_min_signal = sigma_min(zq);
  s.nuisance_norm = spectral_norm(s.lifted.Z * s.dec.Q_t_perp);
  const Matrix p = signal_basis(s.lifted.Z, s.dec);
  s.angle_norm = spectral_norm(p - gt.L_X * (gt.L_X.transpose() * p));
  s.imbalance_nuisance = spectral_norm(coupling * s.dec.Q_t_perp);
  s.imbalance_signal_angle = spectral_norm(s.lifted.Z_tilde.transpose() * p);
  return s;
}

LemmaReport check_lemma(LemmaId id, const GroundTruth& gt, const SensingOperator& op,
                        const FactorPair& state_t, const FactorPair* state_t1,
                        const LemmaConstants& constants, Index iter) {
  const LemmaConstants resolved = resolve_constants(id, constants);
  const StateSummary now = summarize(gt, op, state_t);
  if (!needs_successor(id)) return check_lemma(id, gt, op, now, nullptr, resolved, iter);
  if (state_t1 == nullptr)
    throw std::invalid_argument(std::string(to_string(id)) + " needs the successor state");
  const FactorPair expected = gd_step(op, observe(op, gt), state_t, resolved.at("mu"));
  const double scale = std::max(1.0, std::hypot(expected.V.norm(), expected.W.norm()));
  const double gap = std::hypot((expected.V - state_t1->V).norm(), (expected.W - state_t1->W).norm());
  if (!(gap <= 1e-10 * scale))
    throw AuditIntegrityError("successor state is not the gradient step of state_t (gap " +
                              std::to_string(gap) + ")");
  const StateSummary next = summarize(gt, op, expected);
  return check_lemma(id, gt, op, now, &next, resolved, iter);
}

LemmaReport check_lemma(LemmaId id, const GroundTruth& gt, const SensingOperator& op,
                        const StateSummary& now, const StateSummary* next,
                        const LemmaConstants& constants, Index iter) {
  const LemmaConstants k = resolve_constants(id, constants);
  if (needs_successor(id) && next == nullptr)
    throw std::invalid_argument(std::string(to_string(id)) + " needs the successor state");

  LemmaReport report;
  report.lemma_id = id;
  report.iter = iter;
  report.constants_used = k;

  const double mu = constant(k, "mu");
  const double c = constant(k, "c");
  const double big_c = constant(k, "C");
  const double eps = constant(k, "eps");
  const double nx = gt.norm();
  const double smin = gt.sigma_min();
  const double kappa = gt.kappa;
  const double root_nx = std::sqrt(nx);
  const bool norm_ok = le(now.z_norm, 2.0 * root_nx);

  bool pre = false;
  Conclusion out;

  switch (id) {
    case LemmaId::sigmin_growth: {
      pre = le(mu, c / (nx * kappa)) && norm_ok && now.full_rank &&
            le(now.angle_norm, c / kappa) && le(now.delta_norm, c * smin);
      if (!pre) break;
      const double after = next->sigma_min_LZ;
      const double restricted =
          sigma_min(gt.L_X.transpose() * next->lifted.Z * now.dec.Q_t);
      const double s = now.sigma_min_LZ;
      out.require(restricted, after);
      out.require(s * (1.0 + 0.25 * mu * smin - mu * s * s), restricted);
      break;
    }
    case LemmaId::noise_growth: {
      pre = le(mu, c * eps / (nx * kappa)) && norm_ok && now.full_rank && next->full_rank &&
            le(now.delta_norm, c * eps * smin) && le(now.angle_norm, c * eps / kappa) &&
            signal_rank_ok(gt.L_X.transpose() * next->lifted.Z * now.dec.Q_t);
      if (!pre) break;
      const double n = now.nuisance_norm;
      out.require(next->nuisance_norm, (1.0 - 0.5 * mu * n * n + mu * eps * smin) * n +
                                           2.0 * mu * root_nx * now.imbalance_nuisance);
      break;
    }
    case LemmaId::angle_control: {
      pre = le(mu, c / (nx * kappa)) && norm_ok && now.full_rank && next->full_rank &&
            le(now.angle_norm, c / kappa) && le(now.delta_norm, c * smin) &&
            le(now.nuisance_norm,
               std::min(c * std::sqrt(smin / kappa), 2.0 * now.sigma_min_signal)) &&
            le(now.imbalance_nuisance, root_nx * now.sigma_min_signal) &&
            now.sigma_min_signal > 0.0;
      if (!pre) break;
      const double rhs = (1.0 - 0.25 * mu * smin) * now.angle_norm +
                         2.0 * mu * root_nx * now.imbalance_signal_angle +
                         big_c * mu * root_nx * now.imbalance_nuisance / now.sigma_min_signal +
                         big_c * mu * now.delta_norm + big_c * mu * mu * nx * nx;
      out.require(next->angle_norm, rhs);
      break;
    }
    case LemmaId::norm_control: {
      pre = norm_ok && now.full_rank && le(now.delta_norm, nx / 100.0) &&
            le(now.nuisance_norm, root_nx / 100.0) && le(now.angle_norm, 0.01) &&
            le(mu, 1.0 / (100.0 * nx));
      if (!pre) break;
      out.require(next->z_norm, 2.0 * root_nx);
      break;
    }
    case LemmaId::balance_base: {
      pre = norm_ok && le(now.delta_norm, nx);
      if (!pre) break;
      out.require(next->imbalance_norm, now.imbalance_norm + 400.0 * mu * mu * nx * nx * nx);
      break;
    }
    case LemmaId::balance_perp: {
      pre = now.full_rank && next->full_rank && norm_ok && le(next->z_norm, 2.0 * root_nx) &&
            le(now.angle_norm, c) && le(mu, c / (nx * kappa)) && le(now.delta_norm, c * smin) &&
            signal_rank_ok(gt.L_X.transpose() * next->lifted.Z * now.dec.Q_t);
      if (!pre) break;
      const double n = now.nuisance_norm;
      const double beta = now.angle_norm * nx + n * n + now.delta_norm;
      const double rhs = now.imbalance_nuisance +
                         big_c * mu * ((now.angle_norm + mu * nx) * beta + mu * nx * nx) * root_nx * n +
                         8.0 * mu * beta * n * n;
      out.require(next->imbalance_nuisance, rhs);
      break;
    }
    case LemmaId::balance_angle: {
      pre = norm_ok && now.full_rank && next->full_rank && now.sigma_min_signal > 0.0 &&
            le(now.nuisance_norm, std::min(2.0 * now.sigma_min_signal, c * std::sqrt(smin))) &&
            le(now.delta_norm, c * smin) && le(mu, c / (nx * kappa)) &&
            le(now.imbalance_nuisance, c / kappa * now.sigma_min_signal * root_nx) &&
            le(now.angle_norm, c / kappa);
      if (!pre) break;
      const double rhs = (1.0 - 0.25 * mu * smin) * now.imbalance_signal_angle +
                         4.0 * mu * nx * now.nuisance_norm +
                         2.0 * mu * now.imbalance_norm * root_nx +
                         mu * now.imbalance_nuisance * smin / now.sigma_min_signal +
                         800.0 * mu * mu * std::pow(nx, 2.5);
      out.require(next->imbalance_signal_angle, rhs);
      break;
    }
    case LemmaId::spec_loss_bound:
    case LemmaId::local_convergence: {
      pre = le(mu, c / (kappa * nx)) && norm_ok && now.full_rank &&
            le(now.angle_norm, c / kappa) &&
            le(now.delta_norm, c / kappa * now.residual_norm) &&
            now.sigma_min_signal >= std::sqrt(smin / 8.0) &&
            le(now.nuisance_norm, c * std::sqrt(smin));
      if (!pre) break;
      const double n2 = now.nuisance_norm * now.nuisance_norm;
      if (id == LemmaId::spec_loss_bound) {
        out.require(now.residual_orthogonal, 5.0 * now.residual_signal + 4.0 * n2);
        out.require(now.residual_norm, 6.0 * now.residual_signal + 4.0 * n2);
      } else {
        out.require(next->residual_signal,
                    (1.0 - mu * smin / 128.0) * now.residual_signal + mu / 20.0 * smin * n2);
      }
      break;
    }
    case LemmaId::rip_bound_1:
    case LemmaId::rip_bound_2:
    case LemmaId::rip_bound_3: {
      const double delta = constant(k, "delta");
      pre = !op.is_population() && (id == LemmaId::rip_bound_3 || now.full_rank);
      if (!pre) break;
      const FactorPair& fp = now.fp;
      Matrix target;
      double rhs = 0.0;
      if (id == LemmaId::rip_bound_1) {
        const Matrix proj = now.dec.Q_t * now.dec.Q_t.transpose();
        target = fp.V * proj * fp.W.transpose() - gt.X;
        rhs = delta * std::sqrt(static_cast<double>(gt.r)) * spectral_norm(target);
      } else if (id == LemmaId::rip_bound_2) {
        const Matrix proj = now.dec.Q_t_perp * now.dec.Q_t_perp.transpose();
        target = fp.V * proj * fp.W.transpose();
        rhs = static_cast<double>(fp.k() - gt.r) * delta * spectral_norm(target);
      } else {
        target = fp.product();
        // ZZ^T - Z~Z~^T = sym(VW^T) has twice the nuclear norm of VW^T.
        rhs = delta * 2.0 * nuclear_norm(target);
      }
      out.require(spectral_norm(target - op.normal(target)), rhs);
      break;
    }
  }

  report.preconditions_hold = pre;
  if (pre) {
    report.conclusion_holds = out.holds();
    report.margin = out.margin();
  } else {
    // Nothing asserted; a vacuous report carries a zero margin.
    report.conclusion_holds = true;
    report.margin = 0.0;
  }
  return report;
}

PhaseBoundaries phase_boundaries(const TrajectoryRecord& traj, const GroundTruth& gt) {
  PhaseBoundaries out;
  if (traj.records.empty()) return out;
  const double threshold = local_phase_threshold(gt);
  const std::optional<double> start = traj.records.front().sigma_min_signal;
  for (const DiagnosticsRecord& rec : traj.records) {
    if (!out.t_local && rec.sigma_min_LZ >= threshold) out.t_local = rec.iter;
    if (!out.t_signal && start && *start > 0.0 && rec.sigma_min_signal &&
        *rec.sigma_min_signal >= 2.0 * *start)
      out.t_signal = rec.iter;
  }
  return out;
}

bool PowerMethodComparison::holds_in_window() const {
  return std::all_of(rows.begin(), rows.end(), [](const PowerMethodRow& row) {
    return !row.in_window || row.error_norm <= row.bound;
  });
}

PowerMethodComparison power_method_comparison(const GroundTruth& gt, const SensingOperator& op,
                                              const GdConfig& cfg, Index t_max) {
  cfg.validate();
  if (t_max < 0) throw std::invalid_argument("power_method_comparison: t_max must be >= 0");
  const Targets targets = observe(op, gt);
  const Matrix f = sym_embed(op.normal(gt.X));

  PowerMethodComparison cmp;
  cmp.F_norm = spectral_norm(f);
  FactorPair fp = init_random(gt.n1(), gt.n2(), cfg.k, cfg.alpha, cfg.seed);
  Matrix z_power = lift(fp).Z;
  cmp.z0_norm = spectral_norm(z_power);

  const double width = static_cast<double>(std::min(cfg.k, gt.n1() + gt.n2()));
  const double growth = 1.0 + cfg.mu * cmp.F_norm;
  const double z0_cubed = std::pow(cmp.z0_norm, 3);
  cmp.init_small_enough = cmp.z0_norm * cmp.z0_norm <= cmp.F_norm / 16.0;
  if (cmp.z0_norm > 0.0 && cmp.init_small_enough) {
    cmp.window = std::log(cmp.F_norm / (16.0 * width * cmp.z0_norm * cmp.z0_norm)) /
                 (3.0 * std::log(growth));
  } else {
    cmp.window = cmp.z0_norm > 0.0 ? -1.0 : std::numeric_limits<double>::infinity();
  }

  for (Index t = 0; t <= t_max; ++t) {
    PowerMethodRow row;
    row.t = t;
    row.error_norm = spectral_norm(lift(fp).Z - z_power);
    row.bound = 16.0 / cmp.F_norm * width * std::pow(growth, 3.0 * t) * z0_cubed;
    row.in_window = static_cast<double>(t) <= cmp.window;
    cmp.rows.push_back(row);
    if (t == t_max) break;
    fp = gd_step(op, targets, fp, cfg.mu);
    z_power += cfg.mu * (f * z_power);
  }
  return cmp;
}

}  // namespace msl
