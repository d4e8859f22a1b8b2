#include "nplmmd/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "nplmmd/evaluation.hpp"

namespace nplmmd::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& text, const std::string& where, const std::string& key) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v))
    throw ConfigError(where + ": " + key + ": expected a number, got '" + text + "'");
  return v;
}

std::uint64_t parse_unsigned(const std::string& text, const std::string& where,
                             const std::string& key) {
  std::uint64_t v = 0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty())
    throw ConfigError(where + ": " + key + ": expected a non-negative integer, got '" + text + "'");
  return v;
}

std::vector<double> parse_list(const std::string& text, const std::string& where,
                               const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(parse_double(item, where, key));
  }
  return out;
}

bool parse_bool(const std::string& text, const std::string& where, const std::string& key) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(where + ": " + key + ": expected true or false, got '" + text + "'");
}

KernelSpec parse_kernel(const std::string& text, const std::string& where) {
  if (text == "median") return {KernelMode::Median, {}};
  const std::vector<double> ls = parse_list(text, where, "kernel");
  if (ls.empty()) throw ConfigError(where + ": kernel: empty lengthscale list");
  for (double l : ls)
    if (!(l > 0.0)) throw ConfigError(where + ": kernel: lengthscales must be > 0");
  if (text.find(',') == std::string::npos) return {KernelMode::Fixed, ls};
  return {KernelMode::Mixture, ls};
}

std::string kernel_text(const KernelSpec& k) {
  if (k.mode == KernelMode::Median) return "median";
  std::string s;
  for (std::size_t i = 0; i < k.lengthscales.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", k.lengthscales[i]);
    s += (i ? "," : "") + std::string(buf);
  }
  if (k.mode == KernelMode::Mixture && k.lengthscales.size() == 1) s += ",";
  return s;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

const std::vector<std::string>& setting_keys() {
  static const std::vector<std::string> keys = {
      "model", "estimator", "n",     "dim",    "epsilon",  "alpha",     "T",
      "B",     "steps",     "learning_rate",   "kernel",   "seed",      "threads",
      "objective", "N",     "M",     "restarts", "keep",   "strict",    "output",
      "parameter", "grid",  "runs",  "model_mmd_samples"};
  return keys;
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& raw,
                   const std::string& where) {
  const std::string value = trim(raw);
  ExperimentConfig& e = cfg.experiment;
  auto count = [&](std::uint64_t min) {
    const std::uint64_t v = parse_unsigned(value, where, key);
    if (v < min)
      throw ConfigError(where + ": " + key + ": must be >= " + std::to_string(min));
    return std::size_t(v);
  };
  if (key == "model") {
    const auto& names = model_names();
    if (std::find(names.begin(), names.end(), value) == names.end())
      throw ConfigError(where + ": model: unknown model '" + value + "'");
    e.model = value;
  } else if (key == "estimator") {
    if (value == "mmd") e.estimator = Estimator::Mmd;
    else if (value == "wll") e.estimator = Estimator::Wll;
    else throw ConfigError(where + ": estimator: expected mmd or wll");
  } else if (key == "n") {
    e.n = count(2);
  } else if (key == "dim") {
    e.dim = count(1);
  } else if (key == "epsilon") {
    e.epsilon = parse_double(value, where, key);
    if (e.epsilon < 0.0 || e.epsilon > 1.0)
      throw ConfigError(where + ": epsilon: must lie in [0, 1]");
  } else if (key == "alpha") {
    e.alpha = parse_double(value, where, key);
    if (e.alpha < 0.0) throw ConfigError(where + ": alpha: must be >= 0");
  } else if (key == "T") {
    e.truncation = count(0);
  } else if (key == "B") {
    e.B = count(1);
  } else if (key == "steps") {
    e.steps = count(1);
  } else if (key == "learning_rate") {
    const double lr = parse_double(value, where, key);
    if (!(lr > 0.0)) throw ConfigError(where + ": learning_rate: must be > 0");
    e.learning_rate = lr;
  } else if (key == "kernel") {
    e.kernel = parse_kernel(value, where);
  } else if (key == "seed") {
    e.seed = parse_unsigned(value, where, key);
  } else if (key == "threads") {
    e.threads = count(0);
  } else if (key == "objective") {
    if (value == "resample") e.objective = Objective::Resample;
    else if (value == "weighted") e.objective = Objective::Weighted;
    else throw ConfigError(where + ": objective: expected resample or weighted");
  } else if (key == "N") {
    e.resample_size = count(2);
  } else if (key == "M") {
    e.latent_size = count(2);
  } else if (key == "restarts") {
    e.restarts = count(0);
  } else if (key == "keep") {
    e.keep = count(1);
  } else if (key == "strict") {
    e.strict = parse_bool(value, where, key);
  } else if (key == "output") {
    if (value.empty()) throw ConfigError(where + ": output: empty path");
    cfg.output_dir = value;
  } else if (key == "parameter") {
    try {
      parse_sweep_parameter(value);
    } catch (const std::invalid_argument& ex) {
      throw ConfigError(where + ": parameter: " + ex.what());
    }
    cfg.parameter = value;
  } else if (key == "grid") {
    cfg.grid = parse_list(value, where, key);
  } else if (key == "runs") {
    cfg.runs = count(1);
  } else if (key == "model_mmd_samples") {
    const std::size_t s = count(0);
    if (s == 1) throw ConfigError(where + ": model_mmd_samples: must be 0 or >= 2");
    cfg.model_mmd_samples = s;
  } else {
    throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

void load_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = path + ":" + std::to_string(lineno);
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(where + ": missing key");
    apply_setting(cfg, key, line.substr(eq + 1), where);
  }
}

namespace {

json config_snapshot(const std::string& command, const RunConfig& cfg, const ModelSetup& setup) {
  const ExperimentConfig& e = cfg.experiment;
  json j;
  j["command"] = command;
  j["model"] = e.model;
  j["estimator"] = e.estimator == Estimator::Mmd ? "mmd" : "wll";
  j["n"] = setup.contamination.n;
  if (setup.simulator->name() == "gaussian") j["dim"] = setup.simulator->param_dim();
  j["epsilon"] = e.epsilon;
  j["alpha"] = e.alpha;
  j["T"] = e.truncation == 0 ? setup.contamination.n : e.truncation;
  j["B"] = e.B;
  j["steps"] = setup.optim.steps;
  j["learning_rate"] = setup.optim.learning_rate;
  j["kernel"] = kernel_text(setup.kernel);
  j["seed"] = e.seed;
  j["threads"] = e.threads;
  j["objective"] = e.objective == Objective::Resample ? "resample" : "weighted";
  j["N"] = setup.optim.resolved_resample_size(setup.contamination.n);
  j["M"] = setup.optim.resolved_latent_size(setup.contamination.n);
  j["restarts"] = setup.optim.restarts.candidates;
  j["keep"] = setup.optim.restarts.keep;
  j["strict"] = e.strict;
  j["theta_true"] = setup.theta_true;
  if (!setup.theta_init.empty() && setup.optim.restarts.candidates == 0)
    j["theta_init"] = setup.theta_init;
  if (command == "run") j["model_mmd_samples"] = cfg.model_mmd_samples;
  if (command == "bound-check")
    j["model_mmd_samples"] = cfg.model_mmd_samples > 0 ? cfg.model_mmd_samples : kModelMmdSampleSize;
  if (command == "sweep") {
    j["parameter"] = cfg.parameter;
    j["grid"] = cfg.grid;
  }
  if (command == "bound-check") {
    j["grid"] = cfg.grid;
    j["runs"] = cfg.runs;
  }
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string posterior_csv(const PosteriorSample& sample) {
  std::string s = "b";
  for (std::size_t k = 0; k < sample.param_dim(); ++k) s += ",theta_" + std::to_string(k);
  s += ",loss,seed\n";
  for (std::size_t b = 0; b < sample.size(); ++b) {
    s += std::to_string(b);
    for (double v : sample.thetas[b]) s += "," + fmt(v);
    s += "," + fmt(sample.losses[b]) + "," + std::to_string(sample.seeds[b]) + "\n";
  }
  return s;
}

json summary_json(const ExperimentRun& run) {
  const PosteriorSummary& s = run.summary;
  const ExperimentResult& r = run.result;
  json j;
  j["run_id"] = r.run_id;
  j["model"] = r.model;
  j["n"] = r.n;
  j["epsilon"] = r.epsilon;
  j["alpha"] = r.alpha;
  j["T"] = r.truncation;
  j["B"] = r.B;
  j["lengthscales"] = r.lengthscales;
  j["nmse"] = r.nmse;
  j["model_mmd"] = r.model_mmd ? json(*r.model_mmd) : json(nullptr);
  j["wall_time_seconds"] = r.wall_time_seconds;
  j["failures"] = r.failures;
  j["draws_used"] = s.draws;
  j["theta_true"] = run.theta_true;
  j["mean"] = s.mean;
  j["sd"] = s.sd;
  json q;
  const char* names[] = {"q05", "q25", "q50", "q75", "q95"};
  for (std::size_t i = 0; i < s.quantiles.size(); ++i) q[names[i]] = s.quantiles[i];
  j["quantiles"] = q;
  json failed = json::array();
  for (std::size_t b = 0; b < run.posterior.size(); ++b)
    if (run.posterior.failed[b]) failed.push_back({{"b", b}, {"message", run.posterior.messages[b]}});
  j["failed_draws"] = failed;
  return j;
}

fs::path prepare_output(const RunConfig& cfg) {
  fs::path dir = cfg.output_dir;
  if (dir.empty()) {
    const char* env = std::getenv(kOutputDirEnv);
    dir = env && *env ? fs::path(env) : fs::path(".");
  }
  fs::create_directories(dir);
  return dir;
}

int cmd_run(const RunConfig& cfg, std::ostream& out) {
  const ModelSetup setup = make_model(cfg.experiment);
  const fs::path dir = prepare_output(cfg);
  ExperimentRun run = run_experiment_on(cfg.experiment, setup, make_dataset(setup, cfg.experiment.seed));
  if (cfg.model_mmd_samples > 0) {
    const Kernel kernel = setup.kernel.build(run.data.points);
    Rng rng(split_seed(cfg.experiment.seed, 0x6d6d64));
    run.result.model_mmd = estimate_model_mmd(run.summary.mean, setup.theta_true,
                                              *setup.simulator, kernel, cfg.model_mmd_samples, rng);
  }
  write_text(dir / "posterior.csv", posterior_csv(run.posterior));
  write_text(dir / "summary.json", summary_json(run).dump(2) + "\n");
  write_text(dir / "config.json", config_snapshot("run", cfg, setup).dump(2) + "\n");
  out << "model " << cfg.experiment.model << ", B = " << run.posterior.size()
      << ", failures = " << run.result.failures << ", nmse = " << fmt(run.result.nmse) << "\n";
  out << "posterior mean:";
  for (double m : run.summary.mean) out << " " << fmt(m);
  out << "\nwrote " << (dir / "posterior.csv").string() << "\n";
  if (run.result.failures > 0)
    out << "warning: " << run.result.failures << " draws failed; see summary.json\n";
  return kExitOk;
}

int cmd_sweep(const RunConfig& cfg, std::ostream& out) {
  if (cfg.parameter.empty()) throw ConfigError("sweep: 'parameter' is required");
  if (cfg.grid.empty()) throw ConfigError("sweep: 'grid' must list at least one value");
  const ModelSetup setup = make_model(cfg.experiment);
  const SweepParameter parameter = parse_sweep_parameter(cfg.parameter);
  const fs::path dir = prepare_output(cfg);
  std::vector<SweepRow> rows;
  try {
    rows = hyperparameter_sweep(parameter, cfg.grid, cfg.experiment);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("sweep: ") + e.what());
  }
  std::string csv = "parameter,value,nmse\n";
  for (const SweepRow& r : rows) csv += cfg.parameter + "," + fmt(r.value) + "," + fmt(r.nmse) + "\n";
  write_text(dir / "sweep.csv", csv);
  write_text(dir / "config.json", config_snapshot("sweep", cfg, setup).dump(2) + "\n");
  out << "wrote " << rows.size() << " rows to " << (dir / "sweep.csv").string() << "\n";
  return kExitOk;
}

int cmd_bound_check(RunConfig cfg, std::ostream& out) {
  if (cfg.experiment.epsilon != 0.0 || cfg.experiment.alpha != 0.0)
    throw ConfigError("bound-check: needs clean data and alpha = 0 (epsilon = 0, alpha = 0)");
  if (cfg.grid.empty())
    for (std::size_t n : default_bound_grid()) cfg.grid.push_back(double(n));
  std::vector<std::size_t> n_grid;
  for (double v : cfg.grid) {
    if (!(v >= 2.0) || v != std::floor(v))
      throw ConfigError("bound-check: grid values must be integers >= 2");
    n_grid.push_back(std::size_t(v));
  }
  const ModelSetup setup = make_model(cfg.experiment);
  const fs::path dir = prepare_output(cfg);
  const std::size_t samples = cfg.model_mmd_samples > 0 ? cfg.model_mmd_samples : kModelMmdSampleSize;
  const std::vector<BoundRow> rows =
      bound_check_experiment(n_grid, cfg.runs, cfg.experiment, samples);
  std::string csv = "n,mmd_estimate,bound_2_over_sqrt_n\n";
  for (const BoundRow& r : rows)
    csv += std::to_string(r.n) + "," + fmt(r.mmd_estimate) + "," + fmt(r.bound) + "\n";
  write_text(dir / "bound.csv", csv);
  write_text(dir / "config.json", config_snapshot("bound-check", cfg, setup).dump(2) + "\n");
  std::size_t above = 0;
  for (const BoundRow& r : rows) above += r.mmd_estimate > r.bound;
  out << "wrote " << rows.size() << " rows to " << (dir / "bound.csv").string() << "; "
      << above << " above 2/sqrt(n)\n";
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"MMD posterior bootstrap for simulator models"};
  app.require_subcommand(1);
  struct Sub {
    CLI::App* app;
    std::string config_path;
    std::map<std::string, std::string> flags;
  };
  std::vector<Sub> subs;
  const char* names[][2] = {{"run", "Sample the posterior and write posterior.csv"},
                            {"sweep", "Posterior-mean NMSE over a hyperparameter grid"},
                            {"bound-check", "Model MMD against 2/sqrt(n) over a grid of n"}};
  subs.reserve(3);
  for (const auto& [name, help] : names) subs.push_back({app.add_subcommand(name, help), {}, {}});
  for (Sub& sub : subs) {
    sub.app->add_option("--config", sub.config_path, "Flat key = value configuration file");
    for (const std::string& key : setting_keys()) {
      std::string flag = "--" + key;
      if (key.find('_') != std::string::npos) {
        std::string dashed = key;
        std::replace(dashed.begin(), dashed.end(), '_', '-');
        flag += ",--" + dashed;
      }
      sub.app->add_option_function<std::string>(
          flag, [&sub, key](const std::string& v) { sub.flags[key] = v; }, "Setting '" + key + "'");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitConfig;
  }

  try {
    for (std::size_t i = 0; i < subs.size(); ++i) {
      Sub& sub = subs[i];
      if (!sub.app->parsed()) continue;
      const std::string command = names[i][0];
      RunConfig cfg;
      if (command == "bound-check") cfg.experiment.model = "gandk";
      if (!sub.config_path.empty()) load_config_file(cfg, sub.config_path);
      for (const auto& [key, value] : sub.flags) apply_setting(cfg, key, value, "--" + key);
      try {
        make_model(cfg.experiment);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
      if (command == "run") return cmd_run(cfg, out);
      if (command == "sweep") return cmd_sweep(cfg, out);
      return cmd_bound_check(cfg, out);
    }
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace nplmmd::cli
