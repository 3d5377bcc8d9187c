#include "msl/experiments.hpp"

#include "msl/report.hpp"
#include "msl/rng.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

namespace msl {

namespace {

constexpr std::array<std::pair<Experiment, const char*>, 9> kExperimentNames{{
    {Experiment::run, "run"},
    {Experiment::imbalance_alpha, "imbalance_alpha"},
    {Experiment::traintest, "traintest"},
    {Experiment::error_alpha, "error_alpha"},
    {Experiment::imbalance_stepsize, "imbalance_stepsize"},
    {Experiment::coupling, "coupling"},
    {Experiment::lemma_audit, "lemma_audit"},
    {Experiment::rip_probe, "rip_probe"},
    {Experiment::power_compare, "power_compare"},
}};

std::string path_in(const ExperimentConfig& cfg, const std::string& name) {
  return (std::filesystem::path(cfg.out_dir) / name).string();
}

bool writes_files(const ExperimentConfig& cfg) { return !cfg.out_dir.empty(); }

// Grid values in file names: 1e-05, 0.01.
std::string tag(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", value);
  return buf;
}

DiagnosticsOptions diag_options(const ExperimentConfig& cfg) {
  return DiagnosticsOptions{cfg.with_delta, cfg.delta_stride};
}

std::vector<double> vw_series(const TrajectoryRecord& traj) {
  std::vector<double> out;
  out.reserve(traj.records.size());
  for (const DiagnosticsRecord& rec : traj.records) out.push_back(rec.vw_imbalance);
  return out;
}

std::vector<Index> iter_series(const TrajectoryRecord& traj) {
  std::vector<Index> out;
  out.reserve(traj.records.size());
  for (const DiagnosticsRecord& rec : traj.records) out.push_back(rec.iter);
  return out;
}

void write_series_csv(const std::string& path, const std::vector<Index>& iters,
                      const std::vector<double>& values) {
  CsvWriter csv(path, {"iter", "vw_imbalance"});
  for (std::size_t i = 0; i < iters.size(); ++i) {
    csv.cell(iters[i]).cell(values[i]);
    csv.end_row();
  }
  csv.close();
}

nlohmann::json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json opt_json(const std::optional<Index>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json fit_json(const std::optional<LinearFit>& fit) {
  if (!fit) return nullptr;
  return {{"slope", fit->slope}, {"intercept", fit->intercept}, {"r2", fit->r2},
          {"points", fit->points}};
}

nlohmann::json final_json(const TrajectoryRecord& traj) {
  const DiagnosticsRecord& last = traj.records.back();
  return {{"iterations", traj.iterations_run},
          {"stop_reason", to_string(traj.stop_reason)},
          {"train_loss", last.train_loss},
          {"rel_test_error_fro", last.rel_test_error_fro},
          {"rel_test_error_spec", last.rel_test_error_spec},
          {"vw_imbalance", last.vw_imbalance}};
}

template <typename T>
T get_field(const nlohmann::json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(key, "wrong type (got " + std::string(j.type_name()) + ")");
  }
}

Index get_index(const nlohmann::json& j, const std::string& key) {
  if (!j.is_number_integer()) throw ConfigError(key, "expected an integer");
  return j.get<Index>();
}

double get_double(const nlohmann::json& j, const std::string& key) {
  if (!j.is_number()) throw ConfigError(key, "expected a number");
  return j.get<double>();
}

std::vector<double> get_doubles(const nlohmann::json& j, const std::string& key) {
  if (j.is_number()) return {j.get<double>()};
  if (!j.is_array()) throw ConfigError(key, "expected a list of numbers");
  std::vector<double> out;
  for (const auto& v : j) out.push_back(get_double(v, key));
  return out;
}

}  // namespace

const char* to_string(Experiment e) {
  for (const auto& [id, name] : kExperimentNames)
    if (id == e) return name;
  return "unknown";
}

Experiment experiment_from_string(std::string_view name) {
  std::string norm(name);
  std::replace(norm.begin(), norm.end(), '-', '_');
  for (const auto& [id, n] : kExperimentNames)
    if (norm == n) return id;
  throw ConfigError("experiment", "unknown experiment '" + std::string(name) + "'");
}

Index ExperimentConfig::effective_record_every() const {
  if (record_every) return *record_every;
  return max_iters < 2000 ? 1 : 10;
}

void ExperimentConfig::validate() const {
  auto positive = [](const char* field, Index v) {
    if (v < 1) throw ConfigError(field, "must be >= 1, got " + std::to_string(v));
  };
  positive("n1", n1);
  positive("n2", n2);
  positive("r", r);
  positive("m", m);
  positive("k", k);
  positive("jobs", jobs);
  positive("delta_stride", delta_stride);
  positive("audit_stride", audit_stride);
  positive("rip_trials", rip_trials);
  if (r > std::min(n1, n2)) throw ConfigError("r", "must not exceed min(n1, n2)");
  if (k < r) throw ConfigError("k", "must be >= r");
  if (max_iters < 0) throw ConfigError("max_iters", "must be >= 0");
  if (record_every && *record_every < 1) throw ConfigError("record_every", "must be >= 1");
  if (alphas.empty()) throw ConfigError("alphas", "must not be empty");
  if (mus_times_normX.empty()) throw ConfigError("mus_times_normX", "must not be empty");
  if (seeds.empty()) throw ConfigError("seeds", "must not be empty");
  for (double a : alphas)
    if (!(a > 0.0) || !std::isfinite(a)) throw ConfigError("alphas", "entries must be positive");
  for (double mu : mus_times_normX)
    if (!(mu >= 0.0) || !std::isfinite(mu))
      throw ConfigError("mus_times_normX", "entries must be finite and >= 0");
  if (!(stop_train_loss >= 0.0)) throw ConfigError("stop_train_loss", "must be >= 0");
  if (!(rip_inflation > 0.0)) throw ConfigError("rip_inflation", "must be positive");
  if (power_t_max && *power_t_max < 0) throw ConfigError("power_t_max", "must be >= 0");
  if (experiment == Experiment::rip_probe && 2 * r > std::min(n1, n2))
    throw ConfigError("r", "rip_probe needs 2r <= min(n1, n2)");
  for (const auto& [key, value] : lemma_constants) {
    if (key != "c" && key != "C" && key != "eps")
      throw ConfigError("lemma_constants", "unknown constant '" + key + "'");
    if (!std::isfinite(value)) throw ConfigError("lemma_constants", key + " must be finite");
  }
}

ExperimentConfig default_config(Experiment e) {
  ExperimentConfig cfg;
  cfg.experiment = e;
  switch (e) {
    case Experiment::imbalance_alpha:
      cfg.alphas = {1e-2, 1e-3, 1e-4, 1e-5};
      break;
    case Experiment::traintest:
      cfg.k = 40;
      cfg.alphas = {1e-6};
      cfg.mus_times_normX = {0.25};
      break;
    case Experiment::error_alpha:
      cfg.k = 40;
      cfg.alphas = {1e-4, 1e-5, 1e-6, 1e-7};
      cfg.mus_times_normX = {0.25};
      break;
    case Experiment::imbalance_stepsize:
      cfg.mus_times_normX = {0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 0.10};
      break;
    case Experiment::coupling:
      cfg.alphas = {1e-6};
      break;
    default:
      break;
  }
  return cfg;
}

void apply_json(ExperimentConfig& cfg, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config", "expected a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key == "experiment") {
      cfg.experiment = experiment_from_string(get_field<std::string>(v, key));
    } else if (key == "n1") {
      cfg.n1 = get_index(v, key);
    } else if (key == "n2") {
      cfg.n2 = get_index(v, key);
    } else if (key == "r") {
      cfg.r = get_index(v, key);
    } else if (key == "m") {
      cfg.m = get_index(v, key);
    } else if (key == "k") {
      cfg.k = get_index(v, key);
    } else if (key == "alphas") {
      cfg.alphas = get_doubles(v, key);
    } else if (key == "mus_times_normX") {
      cfg.mus_times_normX = get_doubles(v, key);
    } else if (key == "seeds") {
      if (!v.is_array()) throw ConfigError(key, "expected a list of integers");
      cfg.seeds.clear();
      for (const auto& s : v) {
        if (!s.is_number_unsigned()) throw ConfigError(key, "entries must be non-negative integers");
        cfg.seeds.push_back(s.get<std::uint64_t>());
      }
    } else if (key == "max_iters") {
      cfg.max_iters = get_index(v, key);
    } else if (key == "out_dir") {
      cfg.out_dir = get_field<std::string>(v, key);
    } else if (key == "with_delta") {
      cfg.with_delta = get_field<bool>(v, key);
    } else if (key == "population") {
      cfg.population = get_field<bool>(v, key);
    } else if (key == "record_every") {
      if (v.is_null()) cfg.record_every.reset();
      else cfg.record_every = get_index(v, key);
    } else if (key == "delta_stride") {
      cfg.delta_stride = get_index(v, key);
    } else if (key == "stop_train_loss") {
      cfg.stop_train_loss = get_double(v, key);
    } else if (key == "jobs") {
      cfg.jobs = get_index(v, key);
    } else if (key == "audit_stride") {
      cfg.audit_stride = get_index(v, key);
    } else if (key == "lemma_constants") {
      if (!v.is_object()) throw ConfigError(key, "expected an object of named constants");
      cfg.lemma_constants.clear();
      for (const auto& [name, value] : v.items())
        cfg.lemma_constants[name] = get_double(value, key + "." + name);
    } else if (key == "rip_trials") {
      cfg.rip_trials = get_index(v, key);
    } else if (key == "rip_inflation") {
      cfg.rip_inflation = get_double(v, key);
    } else if (key == "power_t_max") {
      if (v.is_null()) cfg.power_t_max.reset();
      else cfg.power_t_max = get_index(v, key);
    } else {
      throw ConfigError(key, "unknown configuration field");
    }
  }
}

nlohmann::json load_config_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config", "malformed JSON in " + path + ": " + e.what());
  }
}

ExperimentConfig load_config_file(const std::string& path) {
  const nlohmann::json j = load_config_json(path);
  ExperimentConfig cfg;
  if (j.is_object() && j.contains("experiment"))
    cfg = default_config(experiment_from_string(get_field<std::string>(j["experiment"], "experiment")));
  apply_json(cfg, j);
  return cfg;
}

nlohmann::json to_json(const ExperimentConfig& cfg) {
  nlohmann::json j{{"experiment", to_string(cfg.experiment)},
                   {"n1", cfg.n1},
                   {"n2", cfg.n2},
                   {"r", cfg.r},
                   {"m", cfg.m},
                   {"k", cfg.k},
                   {"alphas", cfg.alphas},
                   {"mus_times_normX", cfg.mus_times_normX},
                   {"seeds", cfg.seeds},
                   {"max_iters", cfg.max_iters},
                   {"out_dir", cfg.out_dir},
                   {"with_delta", cfg.with_delta},
                   {"population", cfg.population},
                   {"record_every", cfg.effective_record_every()},
                   {"delta_stride", cfg.delta_stride},
                   {"stop_train_loss", cfg.stop_train_loss},
                   {"jobs", cfg.jobs},
                   {"audit_stride", cfg.audit_stride},
                   {"lemma_constants", cfg.lemma_constants},
                   {"rip_trials", cfg.rip_trials},
                   {"rip_inflation", cfg.rip_inflation},
                   {"power_t_max", opt_json(cfg.power_t_max)}};
  return j;
}

std::uint64_t role_seed(std::uint64_t base, std::string_view role) { return derive_seed(base, role); }

Problem make_problem(const ExperimentConfig& cfg, std::uint64_t seed, bool population) {
  GroundTruth gt = make_ground_truth(cfg.n1, cfg.n2, cfg.r, role_seed(seed, "truth"));
  SensingOperator op = population
                           ? make_population_operator(cfg.n1, cfg.n2)
                           : make_gaussian_operator(cfg.n1, cfg.n2, cfg.m, role_seed(seed, "operator"));
  return Problem{std::move(gt), std::move(op), role_seed(seed, "init")};
}

GdConfig gd_config(const ExperimentConfig& cfg, const Problem& problem, double alpha,
                   double mu_rel) {
  GdConfig gd;
  gd.mu = mu_rel / problem.gt.norm();
  gd.alpha = alpha;
  gd.k = cfg.k;
  gd.max_iters = cfg.max_iters;
  gd.record_every = cfg.effective_record_every();
  gd.stop_train_loss = cfg.stop_train_loss;
  gd.seed = problem.init_seed;
  return gd;
}

double plateau(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("plateau: no values");
  const std::size_t n = values.size();
  const std::size_t tail = std::max<std::size_t>(1, n / 10);
  std::vector<double> last(values.end() - static_cast<std::ptrdiff_t>(tail), values.end());
  std::sort(last.begin(), last.end());
  const std::size_t mid = tail / 2;
  return tail % 2 == 1 ? last[mid] : 0.5 * (last[mid - 1] + last[mid]);
}

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("linear_fit: x and y differ in length");
  if (x.size() < 2) throw std::invalid_argument("linear_fit: need at least two points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("linear_fit: x values are all equal");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  fit.points = x.size();
  return fit;
}

void parallel_for(std::size_t n, Index jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max<Index>(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        {
          std::lock_guard lock(mutex);
          if (failure) return;
        }
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------

RunResult exp_run(const ExperimentConfig& cfg) {
  cfg.validate();
  if (writes_files(cfg)) ensure_directory(cfg.out_dir);
  RunResult result;
  result.runs.resize(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), cfg.jobs, [&](std::size_t i) {
    const std::uint64_t seed = cfg.seeds[i];
    const Problem p = make_problem(cfg, seed, cfg.population);
    RunOutcome& out = result.runs[i];
    out.seed = seed;
    out.normX = p.gt.norm();
    out.kappa = p.gt.kappa;
    out.traj = run_trajectory(p.gt, p.op,
                              gd_config(cfg, p, cfg.alphas.front(), cfg.mus_times_normX.front()),
                              diag_options(cfg));
    out.phases = phase_boundaries(out.traj, p.gt);
    if (writes_files(cfg))
      write_run_csv(path_in(cfg, "run_seed" + std::to_string(seed) + ".csv"), out.traj.records);
  });
  if (writes_files(cfg))
    for (const RunOutcome& run : result.runs)
      result.files.push_back(path_in(cfg, "run_seed" + std::to_string(run.seed) + ".csv"));
  return result;
}

ImbalanceAlphaResult exp_imbalance_alpha(const ExperimentConfig& cfg) {
  cfg.validate();
  if (writes_files(cfg)) ensure_directory(cfg.out_dir);
  const std::uint64_t seed = cfg.seeds.front();
  const double mu_rel = cfg.mus_times_normX.front();
  ImbalanceAlphaResult result;
  std::vector<std::vector<ImbalanceSeries>> by_mode(2);
  parallel_for(2, cfg.jobs, [&](std::size_t mode) {
    const bool population = mode == 1;
    const Problem p = make_problem(cfg, seed, population);
    std::vector<GdConfig> gds;
    for (double alpha : cfg.alphas) gds.push_back(gd_config(cfg, p, alpha, mu_rel));
    const std::vector<TrajectoryRecord> trajs = run_trajectories(p.gt, p.op, gds, diag_options(cfg));
    for (std::size_t i = 0; i < trajs.size(); ++i) {
      ImbalanceSeries s;
      s.population = population;
      s.alpha = cfg.alphas[i];
      s.iters = iter_series(trajs[i]);
      s.vw_imbalance = vw_series(trajs[i]);
      s.initial = s.vw_imbalance.front();
      s.max = *std::max_element(s.vw_imbalance.begin(), s.vw_imbalance.end());
      s.plateau = plateau(s.vw_imbalance);
      s.iterations = trajs[i].iterations_run;
      s.stop_reason = trajs[i].stop_reason;
      by_mode[mode].push_back(std::move(s));
    }
  });
  for (auto& mode : by_mode)
    for (auto& s : mode) result.series.push_back(std::move(s));

  if (writes_files(cfg)) {
    for (const ImbalanceSeries& s : result.series) {
      const std::string name = std::string("imbalance_alpha_") +
                               (s.population ? "population" : "empirical") + "_alpha" +
                               tag(s.alpha) + ".csv";
      write_series_csv(path_in(cfg, name), s.iters, s.vw_imbalance);
      result.files.push_back(path_in(cfg, name));
    }
    CsvWriter csv(path_in(cfg, "imbalance_alpha.csv"),
                  {"mode", "alpha", "initial", "max", "plateau", "iterations", "stop_reason"});
    for (const ImbalanceSeries& s : result.series) {
      csv.cell(std::string(s.population ? "population" : "empirical"))
          .cell(s.alpha)
          .cell(s.initial)
          .cell(s.max)
          .cell(s.plateau)
          .cell(s.iterations)
          .cell(std::string(to_string(s.stop_reason)));
      csv.end_row();
    }
    csv.close();
    result.files.push_back(path_in(cfg, "imbalance_alpha.csv"));
  }
  return result;
}

TrainTestResult exp_traintest(const ExperimentConfig& cfg) {
  cfg.validate();
  if (writes_files(cfg)) ensure_directory(cfg.out_dir);
  const Problem p = make_problem(cfg, cfg.seeds.front(), false);
  TrainTestResult result;
  result.alpha_small = cfg.alphas.front();
  result.alpha_large = 1.0 / std::sqrt(static_cast<double>(std::max(cfg.n1 + cfg.n2, cfg.k)));
  const double mu_rel = cfg.mus_times_normX.front();
  std::vector<TrajectoryRecord> trajs =
      run_trajectories(p.gt, p.op,
                       {gd_config(cfg, p, result.alpha_large, mu_rel),
                        gd_config(cfg, p, result.alpha_small, mu_rel)},
                       diag_options(cfg));
  result.large = std::move(trajs[0]);
  result.small = std::move(trajs[1]);
  if (writes_files(cfg)) {
    for (const auto& [name, traj] : {std::pair{"traintest_large.csv", &result.large},
                                     std::pair{"traintest_small.csv", &result.small}}) {
      CsvWriter csv(path_in(cfg, name), {"iter", "train_loss", "rel_test_error_fro"});
      for (const DiagnosticsRecord& rec : traj->records) {
        csv.cell(rec.iter).cell(rec.train_loss).cell(rec.rel_test_error_fro);
        csv.end_row();
      }
      csv.close();
      result.files.push_back(path_in(cfg, name));
    }
  }
  return result;
}

ErrorAlphaResult exp_error_alpha(const ExperimentConfig& cfg) {
  cfg.validate();
  if (writes_files(cfg)) ensure_directory(cfg.out_dir);
  const Problem p = make_problem(cfg, cfg.seeds.front(), false);
  const double mu_rel = cfg.mus_times_normX.front();
  std::vector<GdConfig> gds;
  for (double alpha : cfg.alphas) gds.push_back(gd_config(cfg, p, alpha, mu_rel));
  const std::vector<TrajectoryRecord> trajs = run_trajectories(p.gt, p.op, gds, diag_options(cfg));

  ErrorAlphaResult result;
  std::vector<double> lx, ls, lf, all_x, all_s;
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    const DiagnosticsRecord& last = trajs[i].records.back();
    ErrorAlphaRow row;
    row.alpha = cfg.alphas[i];
    row.rel_test_error_fro_sq = last.rel_test_error_fro * last.rel_test_error_fro;
    row.rel_test_error_spec = last.rel_test_error_spec;
    row.iterations = trajs[i].iterations_run;
    row.reached = trajs[i].stop_reason == StopReason::train_loss;
    if (row.rel_test_error_spec > 0.0) {
      all_x.push_back(std::log(row.alpha));
      all_s.push_back(std::log(row.rel_test_error_spec));
    }
    if (row.reached && row.rel_test_error_spec > 0.0 && row.rel_test_error_fro_sq > 0.0) {
      lx.push_back(std::log(row.alpha));
      ls.push_back(std::log(row.rel_test_error_spec));
      lf.push_back(std::log(row.rel_test_error_fro_sq));
    }
    result.rows.push_back(row);
  }
  auto distinct_count = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return std::unique(v.begin(), v.end()) - v.begin();
  };
  if (distinct_count(lx) >= 2) {
    result.fit_spec = linear_fit(lx, ls);
    result.fit_fro_sq = linear_fit(lx, lf);
  }
  if (distinct_count(all_x) >= 2) result.fit_spec_all = linear_fit(all_x, all_s);
  // Sorted by alpha, the error should increase with alpha.
  std::vector<ErrorAlphaRow> sorted = result.rows;
  std::sort(sorted.begin(), sorted.end(),
            [](const ErrorAlphaRow& a, const ErrorAlphaRow& b) { return a.alpha < b.alpha; });
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i].rel_test_error_spec <= sorted[i - 1].rel_test_error_spec) ++result.inversions;

  if (writes_files(cfg)) {
    CsvWriter csv(path_in(cfg, "error_alpha.csv"),
                  {"alpha", "rel_test_error_fro_sq", "rel_test_error_spec", "iterations", "reached"});
    for (const ErrorAlphaRow& row : result.rows) {
      csv.cell(row.alpha)
          .cell(row.rel_test_error_fro_sq)
          .cell(row.rel_test_error_spec)
          .cell(row.iterations)
          .cell(static_cast<Index>(row.reached));
      csv.end_row();
    }
    csv.close();
    result.files.push_back(path_in(cfg, "error_alpha.csv"));
  }
  return result;
}

StepsizeResult exp_imbalance_stepsize(const ExperimentConfig& cfg) {
  cfg.validate();
  if (writes_files(cfg)) ensure_directory(cfg.out_dir);
  const Problem p = make_problem(cfg, cfg.seeds.front(), false);
  const double alpha = cfg.alphas.front();
  // max_iters belongs to the smallest step size; larger steps get fewer
  // iterations so that every grid point covers the same horizon mu * t.
  const double mu_min = *std::min_element(cfg.mus_times_normX.begin(), cfg.mus_times_normX.end());
  std::vector<GdConfig> gds;
  for (double mu_rel : cfg.mus_times_normX) {
    GdConfig gd = gd_config(cfg, p, alpha, mu_rel);
    if (mu_rel > 0.0 && mu_min > 0.0)
      gd.max_iters = static_cast<Index>(std::ceil(static_cast<double>(cfg.max_iters) * mu_min / mu_rel));
    gds.push_back(gd);
  }
  const std::vector<TrajectoryRecord> trajs = run_trajectories(p.gt, p.op, gds, diag_options(cfg));

  StepsizeResult result;
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    StepsizeRow row;
    row.mu_times_normX = cfg.mus_times_normX[i];
    row.plateau = trajs[i].records.back().vw_imbalance;
    row.iterations = trajs[i].iterations_run;
    row.reached = trajs[i].stop_reason == StopReason::train_loss;
    row.iters = iter_series(trajs[i]);
    row.vw_imbalance = vw_series(trajs[i]);
    xs.push_back(row.mu_times_normX);
    ys.push_back(row.plateau);
    result.rows.push_back(std::move(row));
  }
  std::vector<double> distinct = xs;
  std::sort(distinct.begin(), distinct.end());
  if (std::unique(distinct.begin(), distinct.end()) - distinct.begin() >= 2)
    result.fit = linear_fit(xs, ys);

  if (writes_files(cfg)) {
    for (const StepsizeRow& row : result.rows) {
      const std::string name = "imbalance_stepsize_mu" + tag(row.mu_times_normX) + ".csv";
      write_series_csv(path_in(cfg, name), row.iters, row.vw_imbalance);
      result.files.push_back(path_in(cfg, name));
    }
    CsvWriter csv(path_in(cfg, "imbalance_stepsize.csv"),
                  {"mu_times_normX", "plateau_vw_imbalance", "iterations", "reached"});
    for (const StepsizeRow& row : result.rows) {
      csv.cell(row.mu_times_normX).cell(row.plateau).cell(row.iterations).cell(static_cast<Index>(row.reached));
      csv.end_row();
    }
    csv.close();
    result.files.push_back(path_in(cfg, "imbalance_stepsize.csv"));
  }
  return result;
}

CouplingResult exp_coupling(const ExperimentConfig& cfg) {
  cfg.validate();
  if (writes_files(cfg)) ensure_directory(cfg.out_dir);
  const Problem p = make_problem(cfg, cfg.seeds.front(), cfg.population);
  CouplingResult result;
  result.traj = run_trajectory(p.gt, p.op,
                               gd_config(cfg, p, cfg.alphas.front(), cfg.mus_times_normX.front()),
                               diag_options(cfg));
  result.phases = phase_boundaries(result.traj, p.gt);

  std::vector<double> ratios;
  for (const DiagnosticsRecord& rec : result.traj.records) {
    if (rec.imbalance_signal_angle)
      result.max_signal_angle_x2 = std::max(result.max_signal_angle_x2, 2.0 * *rec.imbalance_signal_angle);
    if (result.phases.t_local && rec.iter >= *result.phases.t_local && rec.imbalance_nuisance &&
        rec.vw_imbalance > 0.0)
      ratios.push_back(2.0 * *rec.imbalance_nuisance / rec.vw_imbalance);
  }
  if (!ratios.empty()) {
    std::sort(ratios.begin(), ratios.end());
    const std::size_t n = ratios.size();
    result.median_nuisance_ratio =
        n % 2 == 1 ? ratios[n / 2] : 0.5 * (ratios[n / 2 - 1] + ratios[n / 2]);
  }

  if (writes_files(cfg)) {
    CsvWriter csv(path_in(cfg, "coupling.csv"),
                  {"iter", "vw_imbalance", "imbalance_nuisance_x2", "imbalance_signal_angle_x2"});
    for (const DiagnosticsRecord& rec : result.traj.records) {
      csv.cell(rec.iter).cell(rec.vw_imbalance);
      csv.cell(rec.imbalance_nuisance ? std::optional<double>(2.0 * *rec.imbalance_nuisance) : std::nullopt);
      csv.cell(rec.imbalance_signal_angle ? std::optional<double>(2.0 * *rec.imbalance_signal_angle)
                                          : std::nullopt);
      csv.end_row();
    }
    csv.close();
    result.files.push_back(path_in(cfg, "coupling.csv"));
  }
  return result;
}

const LemmaTally& LemmaAuditResult::tally(LemmaId id) const {
  for (const LemmaTally& t : tallies)
    if (t.id == id) return t;
  throw std::out_of_range(std::string("no tally for ") + to_string(id));
}

LemmaAuditResult exp_lemma_audit(const ExperimentConfig& cfg) {
  cfg.validate();
  if (writes_files(cfg)) ensure_directory(cfg.out_dir);
  const Problem p = make_problem(cfg, cfg.seeds.front(), false);
  const GdConfig gd = gd_config(cfg, p, cfg.alphas.front(), cfg.mus_times_normX.front());
  const Targets targets = observe(p.op, p.gt);

  LemmaAuditResult result;
  const RipEstimate rip = estimate_rip_constant(p.op, std::min(2 * cfg.r, std::min(cfg.n1, cfg.n2)),
                                                cfg.rip_trials, role_seed(cfg.seeds.front(), "rip"));
  result.delta_hat = rip.delta_lower;
  result.delta_used = cfg.rip_inflation * rip.delta_lower;

  LemmaConstants constants = cfg.lemma_constants;
  constants["mu"] = gd.mu;
  constants["delta"] = result.delta_used;

  for (LemmaId id : kAllLemmas) {
    LemmaTally tally;
    tally.id = id;
    result.tallies.push_back(tally);
  }

  // The run itself mirrors run_trajectory; audited iterations also summarize
  // the successor, which is exactly the next iterate.
  TrajectoryRecord& traj = result.traj;
  traj.config = gd;
  FactorPair fp = init_random(p.gt.n1(), p.gt.n2(), gd.k, gd.alpha, gd.seed);
  for (Index t = 0;; ++t) {
    const Evaluation ev = evaluate(p.op, targets, fp);
    if (!std::isfinite(ev.loss) || !fp.V.allFinite() || !fp.W.allFinite()) throw DivergenceError(t);
    std::optional<StopReason> stop;
    if (gd.stop_train_loss && ev.loss < *gd.stop_train_loss) stop = StopReason::train_loss;
    else if (t >= gd.max_iters) stop = StopReason::max_iters;
    if (stop || t % gd.record_every == 0)
      traj.records.push_back(record_snapshot(p.gt, fp, t, ev.loss, std::nullopt));
    if (stop) {
      traj.stop_reason = *stop;
      traj.iterations_run = t;
      traj.final_factors = fp;
      break;
    }
    FactorPair next = step_with(fp, ev.residual, gd.mu);
    if (t % cfg.audit_stride == 0) {
      const StateSummary now = summarize(p.gt, p.op, fp);
      const StateSummary after = summarize(p.gt, p.op, next);
      for (LemmaTally& tally : result.tallies) {
        const LemmaReport rep = check_lemma(tally.id, p.gt, p.op, now, &after, constants, t);
        ++tally.audited;
        if (rep.preconditions_hold) {
          ++tally.preconditions_held;
          if (rep.conclusion_holds) ++tally.conclusion_held;
          else if (!tally.first_violation) tally.first_violation = t;
          tally.min_margin = tally.min_margin ? std::min(*tally.min_margin, rep.margin) : rep.margin;
        }
        result.reports.push_back(rep);
      }
    }
    fp = std::move(next);
  }

  if (writes_files(cfg)) {
    CsvWriter csv(path_in(cfg, "lemma_audit.csv"),
                  {"iter", "lemma_id", "preconditions_hold", "conclusion_holds", "margin"});
    for (const LemmaReport& rep : result.reports) {
      csv.cell(rep.iter)
          .cell(std::string(to_string(rep.lemma_id)))
          .cell(static_cast<Index>(rep.preconditions_hold))
          .cell(static_cast<Index>(rep.conclusion_holds))
          .cell(rep.margin);
      csv.end_row();
    }
    csv.close();
    result.files.push_back(path_in(cfg, "lemma_audit.csv"));
    write_run_csv(path_in(cfg, "lemma_audit_run.csv"), traj.records);
    result.files.push_back(path_in(cfg, "lemma_audit_run.csv"));
  }
  return result;
}

RipProbeResult exp_rip_probe(const ExperimentConfig& cfg) {
  cfg.validate();
  if (writes_files(cfg)) ensure_directory(cfg.out_dir);
  const Problem p = make_problem(cfg, cfg.seeds.front(), false);
  RipProbeResult result;
  for (Index order = 1; order <= 2 * cfg.r; ++order)
    result.estimates.push_back(estimate_rip_constant(
        p.op, order, cfg.rip_trials, role_seed(cfg.seeds.front() + static_cast<std::uint64_t>(order), "rip")));
  if (writes_files(cfg)) {
    CsvWriter csv(path_in(cfg, "rip_probe.csv"), {"order", "delta_lower", "trials"});
    for (const RipEstimate& e : result.estimates) {
      csv.cell(e.order).cell(e.delta_lower).cell(e.trials);
      csv.end_row();
    }
    csv.close();
    result.files.push_back(path_in(cfg, "rip_probe.csv"));
  }
  return result;
}

PowerCompareResult exp_power_compare(const ExperimentConfig& cfg) {
  cfg.validate();
  if (writes_files(cfg)) ensure_directory(cfg.out_dir);
  const Problem p = make_problem(cfg, cfg.seeds.front(), cfg.population);
  const GdConfig gd = gd_config(cfg, p, cfg.alphas.front(), cfg.mus_times_normX.front());
  Index t_max = 0;
  if (cfg.power_t_max) {
    t_max = *cfg.power_t_max;
  } else {
    const PowerMethodComparison probe = power_method_comparison(p.gt, p.op, gd, 0);
    t_max = std::isfinite(probe.window) && probe.window > 0.0
                ? static_cast<Index>(std::ceil(1.25 * probe.window))
                : 0;
    t_max = std::min(t_max, cfg.max_iters);
  }
  PowerCompareResult result;
  result.comparison = power_method_comparison(p.gt, p.op, gd, t_max);
  if (writes_files(cfg)) {
    CsvWriter csv(path_in(cfg, "power_compare.csv"), {"t", "error_norm", "bound", "in_window"});
    for (const PowerMethodRow& row : result.comparison.rows) {
      csv.cell(row.t).cell(row.error_norm).cell(row.bound).cell(static_cast<Index>(row.in_window));
      csv.end_row();
    }
    csv.close();
    result.files.push_back(path_in(cfg, "power_compare.csv"));
  }
  return result;
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::json results_json(const ExperimentConfig& cfg, std::vector<std::string>& files) {
  switch (cfg.experiment) {
    case Experiment::run: {
      RunResult r = exp_run(cfg);
      files = r.files;
      nlohmann::json runs = nlohmann::json::array();
      for (const RunOutcome& run : r.runs) {
        nlohmann::json j = final_json(run.traj);
        j["seed"] = run.seed;
        j["normX"] = run.normX;
        j["kappa"] = run.kappa;
        j["t_local"] = opt_json(run.phases.t_local);
        j["t_signal_heuristic"] = opt_json(run.phases.t_signal);
        runs.push_back(j);
      }
      return {{"runs", runs}};
    }
    case Experiment::imbalance_alpha: {
      ImbalanceAlphaResult r = exp_imbalance_alpha(cfg);
      files = r.files;
      nlohmann::json rows = nlohmann::json::array();
      for (const ImbalanceSeries& s : r.series)
        rows.push_back({{"mode", s.population ? "population" : "empirical"},
                        {"alpha", s.alpha},
                        {"initial", s.initial},
                        {"max", s.max},
                        {"plateau", s.plateau},
                        {"iterations", s.iterations},
                        {"stop_reason", to_string(s.stop_reason)}});
      return {{"series", rows}, {"plateau_estimator", "median of the last 10% of recorded values"}};
    }
    case Experiment::traintest: {
      TrainTestResult r = exp_traintest(cfg);
      files = r.files;
      return {{"alpha_large", r.alpha_large},
              {"alpha_large_rule", "1/sqrt(max(n1+n2, k))"},
              {"alpha_small", r.alpha_small},
              {"large", final_json(r.large)},
              {"small", final_json(r.small)}};
    }
    case Experiment::error_alpha: {
      ErrorAlphaResult r = exp_error_alpha(cfg);
      files = r.files;
      nlohmann::json rows = nlohmann::json::array();
      for (const ErrorAlphaRow& row : r.rows)
        rows.push_back({{"alpha", row.alpha},
                        {"rel_test_error_fro_sq", row.rel_test_error_fro_sq},
                        {"rel_test_error_spec", row.rel_test_error_spec},
                        {"iterations", row.iterations},
                        {"reached", row.reached}});
      return {{"rows", rows},
              {"fit_log_spec_vs_log_alpha", fit_json(r.fit_spec)},
              {"fit_log_fro_sq_vs_log_alpha", fit_json(r.fit_fro_sq)},
              {"fit_log_spec_vs_log_alpha_all_rows", fit_json(r.fit_spec_all)},
              {"inversions", r.inversions}};
    }
    case Experiment::imbalance_stepsize: {
      StepsizeResult r = exp_imbalance_stepsize(cfg);
      files = r.files;
      nlohmann::json rows = nlohmann::json::array();
      for (const StepsizeRow& row : r.rows)
        rows.push_back({{"mu_times_normX", row.mu_times_normX},
                        {"plateau_vw_imbalance", row.plateau},
                        {"iterations", row.iterations},
                        {"reached", row.reached}});
      return {{"rows", rows}, {"fit_plateau_vs_mu", fit_json(r.fit)}};
    }
    case Experiment::coupling: {
      CouplingResult r = exp_coupling(cfg);
      files = r.files;
      nlohmann::json j = final_json(r.traj);
      j["t_local"] = opt_json(r.phases.t_local);
      j["t_signal_heuristic"] = opt_json(r.phases.t_signal);
      j["median_nuisance_ratio_after_t_local"] = opt_json(r.median_nuisance_ratio);
      j["max_imbalance_signal_angle_x2"] = r.max_signal_angle_x2;
      return j;
    }
    case Experiment::lemma_audit: {
      LemmaAuditResult r = exp_lemma_audit(cfg);
      nlohmann::json lemmas = nlohmann::json::object();
      for (const LemmaTally& t : r.tallies)
        lemmas[to_string(t.id)] = {{"audited", t.audited},
                                   {"preconditions_held", t.preconditions_held},
                                   {"conclusion_held", t.conclusion_held},
                                   {"violations", t.violations()},
                                   {"min_margin", opt_json(t.min_margin)},
                                   {"first_violation", opt_json(t.first_violation)}};
      nlohmann::json j{{"run", final_json(r.traj)},
                       {"audit_stride", cfg.audit_stride},
                       {"delta_hat", r.delta_hat},
                       {"delta_used", r.delta_used},
                       {"constants", resolve_constants(LemmaId::rip_bound_1, [&] {
                          LemmaConstants c = cfg.lemma_constants;
                          c["mu"] = r.traj.config.mu;
                          c["delta"] = r.delta_used;
                          return c;
                        }())},
                       {"lemmas", lemmas}};
      if (writes_files(cfg)) {
        write_json(path_in(cfg, "lemma_audit.json"), j);
        r.files.push_back(path_in(cfg, "lemma_audit.json"));
      }
      files = r.files;
      return j;
    }
    case Experiment::rip_probe: {
      RipProbeResult r = exp_rip_probe(cfg);
      files = r.files;
      nlohmann::json rows = nlohmann::json::array();
      for (const RipEstimate& e : r.estimates)
        rows.push_back({{"order", e.order}, {"delta_lower", e.delta_lower}, {"trials", e.trials}});
      return {{"estimates", rows}, {"note", "lower bounds from random probes, not certificates"}};
    }
    case Experiment::power_compare: {
      PowerCompareResult r = exp_power_compare(cfg);
      files = r.files;
      const PowerMethodComparison& c = r.comparison;
      return {{"F_norm", c.F_norm},
              {"z0_norm", c.z0_norm},
              {"window", c.window},
              {"init_small_enough", c.init_small_enough},
              {"t_max", c.rows.empty() ? 0 : c.rows.back().t},
              {"holds_in_window", c.holds_in_window()}};
    }
  }
  throw std::logic_error("unhandled experiment");
}

}  // namespace

nlohmann::json run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::string> files;
  nlohmann::json results = results_json(cfg, files);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  nlohmann::json summary{{"experiment", to_string(cfg.experiment)},
                         {"config", to_json(cfg)},
                         {"seed", cfg.seeds.front()},
                         {"version", version_string()},
                         {"wall_time_seconds", wall},
                         {"results", results},
                         {"files", files}};
  if (writes_files(cfg)) {
    ensure_directory(cfg.out_dir);
    write_json(path_in(cfg, std::string("summary_") + to_string(cfg.experiment) + ".json"), summary);
    write_json(path_in(cfg, "summary.json"), summary);
  }
  return summary;
}

}  // namespace msl
