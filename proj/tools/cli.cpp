#include "cli.hpp"

#include "msl/experiments.hpp"
#include "msl/report.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <memory>

namespace msl {

namespace {

// Flag values of one subcommand; an option overrides the config only when
// it was given on the command line.
struct Flags {
  std::string config;
  Index n1 = 0, n2 = 0, r = 0, m = 0, k = 0, max_iters = 0, record_every = 0, delta_stride = 0;
  Index jobs = 0, audit_stride = 0, rip_trials = 0, power_t_max = 0;
  std::vector<double> alphas, mus;
  std::vector<std::uint64_t> seeds;
  std::string out;
  double stop_loss = 0.0, rip_inflation = 0.0;
  std::vector<std::string> lemma_constants;
  bool with_delta = false, population = false;

  std::vector<std::pair<CLI::Option*, std::function<void(ExperimentConfig&)>>> setters;
};

template <typename T>
void add(CLI::App& sub, Flags& f, const std::string& name, T& target, const std::string& help,
         std::function<void(ExperimentConfig&)> apply) {
  CLI::Option* opt = sub.add_option(name, target, help);
  f.setters.emplace_back(opt, std::move(apply));
}

void register_flags(CLI::App& sub, Flags& f) {
  sub.add_option("--config", f.config, "JSON file with a flat ExperimentConfig object");
  add(sub, f, "--n1", f.n1, "rows of X", [&f](ExperimentConfig& c) { c.n1 = f.n1; });
  add(sub, f, "--n2", f.n2, "columns of X", [&f](ExperimentConfig& c) { c.n2 = f.n2; });
  add(sub, f, "--r", f.r, "rank of X", [&f](ExperimentConfig& c) { c.r = f.r; });
  add(sub, f, "--m", f.m, "number of measurements", [&f](ExperimentConfig& c) { c.m = f.m; });
  add(sub, f, "--k", f.k, "columns of the factors", [&f](ExperimentConfig& c) { c.k = f.k; });
  add(sub, f, "--alpha,--alphas", f.alphas, "initialization scale(s)",
      [&f](ExperimentConfig& c) { c.alphas = f.alphas; });
  add(sub, f, "--mu-rel,--mus-times-normX", f.mus, "step size(s) times ||X||",
      [&f](ExperimentConfig& c) { c.mus_times_normX = f.mus; });
  add(sub, f, "--seed,--seeds", f.seeds, "base seed(s)", [&f](ExperimentConfig& c) { c.seeds = f.seeds; });
  add(sub, f, "--max-iters", f.max_iters, "iteration cap per trajectory",
      [&f](ExperimentConfig& c) { c.max_iters = f.max_iters; });
  add(sub, f, "--out", f.out, "output directory", [&f](ExperimentConfig& c) { c.out_dir = f.out; });
  add(sub, f, "--record-every", f.record_every, "record a snapshot every n iterations",
      [&f](ExperimentConfig& c) { c.record_every = f.record_every; });
  add(sub, f, "--delta-stride", f.delta_stride, "compute ||Delta|| every n recorded points",
      [&f](ExperimentConfig& c) { c.delta_stride = f.delta_stride; });
  add(sub, f, "--stop-loss", f.stop_loss, "stop once the train loss is below this",
      [&f](ExperimentConfig& c) { c.stop_train_loss = f.stop_loss; });
  add(sub, f, "--jobs", f.jobs, "concurrent grid points (default: $MSL_JOBS or 1)",
      [&f](ExperimentConfig& c) { c.jobs = f.jobs; });
  add(sub, f, "--audit-stride", f.audit_stride, "lemma-audit every n-th iteration",
      [&f](ExperimentConfig& c) { c.audit_stride = f.audit_stride; });
  add(sub, f, "--rip-trials", f.rip_trials, "random probes per RIP estimate",
      [&f](ExperimentConfig& c) { c.rip_trials = f.rip_trials; });
  add(sub, f, "--rip-inflation", f.rip_inflation, "factor applied to the RIP estimate in audits",
      [&f](ExperimentConfig& c) { c.rip_inflation = f.rip_inflation; });
  add(sub, f, "--power-t-max", f.power_t_max, "last iteration of the power-method comparison",
      [&f](ExperimentConfig& c) { c.power_t_max = f.power_t_max; });
  add(sub, f, "--lemma-const", f.lemma_constants, "lemma constant override, name=value (c, C, eps)",
      [&f](ExperimentConfig& c) {
        for (const std::string& item : f.lemma_constants) {
          const auto eq = item.find('=');
          if (eq == std::string::npos) throw ConfigError("lemma_constants", "expected name=value, got " + item);
          try {
            c.lemma_constants[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
          } catch (const std::exception&) {
            throw ConfigError("lemma_constants", "bad number in " + item);
          }
        }
      });
  CLI::Option* wd = sub.add_flag("--with-delta", f.with_delta, "record ||Delta|| on the delta stride");
  f.setters.emplace_back(wd, [&f](ExperimentConfig& c) { c.with_delta = f.with_delta; });
  CLI::Option* pop = sub.add_flag("--population", f.population, "use the population loss (A*A = Id)");
  f.setters.emplace_back(pop, [&f](ExperimentConfig& c) { c.population = f.population; });
}

Index jobs_from_env() {
  const char* env = std::getenv("MSL_JOBS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) throw ConfigError("MSL_JOBS", std::string("expected a positive integer, got '") + env + "'");
  return v;
}

ExperimentConfig build_config(Experiment e, const Flags& f) {
  ExperimentConfig cfg = default_config(e);
  cfg.jobs = jobs_from_env();
  if (!f.config.empty()) {
    const nlohmann::json j = load_config_json(f.config);
    if (j.contains("experiment") && j["experiment"].is_string() &&
        experiment_from_string(j["experiment"].get<std::string>()) != e)
      throw ConfigError("experiment", "config file names '" + j["experiment"].get<std::string>() +
                                          "' but the subcommand is '" + to_string(e) + "'");
    apply_json(cfg, j);
    cfg.experiment = e;
  }
  for (const auto& [opt, apply] : f.setters)
    if (opt->count() > 0) apply(cfg);
  cfg.validate();
  return cfg;
}

void print_synopsis(const nlohmann::json& summary, std::ostream& out) {
  out << summary["experiment"].get<std::string>() << " finished in "
      << format_number(summary["wall_time_seconds"].get<double>()) << " s\n";
  for (const auto& file : summary["files"]) out << "  wrote " << file.get<std::string>() << '\n';
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Factorized gradient descent for low-rank matrix sensing: experiments and audits",
               "msl_cli"};
  app.require_subcommand(1);
  app.fallthrough(false);

  constexpr std::pair<Experiment, const char*> kCommands[] = {
      {Experiment::run, "single trajectory per seed, full diagnostics CSV"},
      {Experiment::imbalance_alpha, "imbalance vs initialization scale, empirical and population"},
      {Experiment::traintest, "train/test error for large and small initialization"},
      {Experiment::error_alpha, "final test error vs initialization scale with log-log fit"},
      {Experiment::imbalance_stepsize, "final imbalance vs step size with linear fit"},
      {Experiment::coupling, "imbalance, its nuisance part and signal angle over a run"},
      {Experiment::lemma_audit, "per-iteration lemma inequality checks along a run"},
      {Experiment::rip_probe, "empirical RIP constant lower bounds by order"},
      {Experiment::power_compare, "gradient descent vs power iteration in the spectral phase"},
  };

  std::vector<std::unique_ptr<Flags>> flags;
  std::vector<std::pair<CLI::App*, Experiment>> subs;
  for (const auto& [e, help] : kCommands) {
    std::string name = to_string(e);
    std::replace(name.begin(), name.end(), '_', '-');
    CLI::App* sub = app.add_subcommand(name, help);
    flags.push_back(std::make_unique<Flags>());
    register_flags(*sub, *flags.back());
    subs.emplace_back(sub, e);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << '\n' << app.help();
    return 2;
  }

  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (!subs[i].first->parsed()) continue;
    try {
      const ExperimentConfig cfg = build_config(subs[i].second, *flags[i]);
      print_synopsis(run_experiment(cfg), out);
      return 0;
    } catch (const ConfigError& e) {
      err << "configuration error: " << e.what() << '\n';
      return 2;
    } catch (const DivergenceError& e) {
      err << "error: " << e.what() << '\n';
      return 1;
    } catch (const IoError& e) {
      err << "I/O error: " << e.what() << '\n';
      return 1;
    } catch (const std::invalid_argument& e) {
      err << "configuration error: " << e.what() << '\n';
      return 2;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return 1;
    }
  }
  err << app.help();
  return 2;
}

}  // namespace msl
