#include "nplmmd/experiments.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "nplmmd/evaluation.hpp"

namespace nplmmd {

Kernel KernelSpec::build(const Points& data) const {
  switch (mode) {
    case KernelMode::Median:
      return Kernel::gaussian(median_heuristic(data));
    case KernelMode::Fixed:
      if (lengthscales.size() != 1)
        throw std::invalid_argument("kernel: a fixed kernel takes exactly one lengthscale");
      return Kernel::gaussian(lengthscales[0]);
    case KernelMode::Mixture:
      if (lengthscales.empty()) throw std::invalid_argument("kernel: mixture needs lengthscales");
      return Kernel::mixture(lengthscales);
  }
  throw std::invalid_argument("kernel: unknown mode");
}

const std::vector<std::string>& model_names() {
  static const std::vector<std::string> names = {"gaussian", "gandk", "toggleswitch",
                                                 "cauchy-data"};
  return names;
}

std::vector<double> toggle_switch_prior_lower() { return {0, 0, 0, 0, 250, 0, 0}; }
std::vector<double> toggle_switch_prior_upper() { return {50, 50, 7.5, 7.5, 450, 0.5, 0.4}; }

namespace {

using Kind = ContaminationSpec::Kind;

ModelSetup gaussian_setup(std::size_t dim, std::size_t n, Kind kind) {
  ModelSetup s;
  s.simulator = std::make_unique<GaussianLocation>(dim);
  s.theta_true.assign(dim, 1.0);
  s.theta_init.assign(dim, 0.0);
  s.contamination.kind = kind;
  s.contamination.n = n;
  s.contamination.outlier_theta.assign(dim, 20.0);
  s.kernel = {KernelMode::Median, {}};
  s.optim.learning_rate = 0.1;
  s.optim.steps = 1000;
  return s;
}

ModelSetup gandk_setup(std::size_t n) {
  ModelSetup s;
  s.simulator = std::make_unique<GAndK>();
  s.theta_true = {3.0, 1.0, 1.0, -std::log(2.0)};
  s.theta_init.assign(4, 5.0);
  s.contamination.kind = Kind::GnkShift;
  s.contamination.n = n;
  s.contamination.shift = 50.0;
  s.kernel = {KernelMode::Fixed, {0.15}};
  s.optim.learning_rate = 0.1;
  s.optim.steps = 1000;
  return s;
}

ModelSetup toggle_setup(std::size_t n) {
  ModelSetup s;
  s.simulator = std::make_unique<ToggleSwitch>();
  s.theta_true = {22.0, 12.0, 4.0, 4.5, 325.0, 0.25, 0.15};
  s.contamination.kind = Kind::CauchyNoise;
  s.contamination.n = n;
  s.contamination.noise_location = 0.0;
  s.contamination.noise_scale = 10.0;
  s.kernel = {KernelMode::Mixture, {1, 10, 20, 40, 80, 100, 130, 200, 400, 800, 1000}};
  s.optim.learning_rate = 0.04;
  s.optim.steps = 2000;
  s.optim.restarts = {500, 3};
  s.optim.lower_bounds.assign(7, 1e-6);
  s.prior = uniform_box_prior(toggle_switch_prior_lower(), toggle_switch_prior_upper());
  return s;
}

}  // namespace

ModelSetup make_model(const ExperimentConfig& cfg) {
  if (!(cfg.epsilon >= 0.0 && cfg.epsilon <= 1.0))
    throw std::invalid_argument("epsilon must lie in [0, 1]");
  if (!(cfg.alpha >= 0.0) || !std::isfinite(cfg.alpha))
    throw std::invalid_argument("alpha must be finite and >= 0");
  if (cfg.B == 0) throw std::invalid_argument("B must be >= 1");

  ModelSetup s;
  if (cfg.model == "gaussian") {
    s = gaussian_setup(cfg.dim.value_or(4), cfg.n.value_or(200), Kind::GaussianMixture);
  } else if (cfg.model == "cauchy-data") {
    s = gaussian_setup(cfg.dim.value_or(1), cfg.n.value_or(200), Kind::CauchyData);
  } else if (cfg.model == "gandk") {
    s = gandk_setup(cfg.n.value_or(2048));
  } else if (cfg.model == "toggleswitch") {
    s = toggle_setup(cfg.n.value_or(2000));
  } else {
    throw std::invalid_argument("unknown model '" + cfg.model + "'");
  }
  if (cfg.dim && s.simulator->name() != "gaussian")
    throw std::invalid_argument("dim only applies to the Gaussian location models");
  if (s.contamination.n < 2) throw std::invalid_argument("n must be >= 2");
  s.contamination.epsilon = cfg.epsilon;

  if (cfg.steps) s.optim.steps = *cfg.steps;
  if (cfg.learning_rate) s.optim.learning_rate = *cfg.learning_rate;
  if (cfg.kernel) s.kernel = *cfg.kernel;
  if (cfg.restarts) s.optim.restarts.candidates = *cfg.restarts;
  if (cfg.keep) s.optim.restarts.keep = *cfg.keep;
  if (s.optim.restarts.candidates > 0 && !s.prior)
    throw std::invalid_argument("random restarts are only available for the toggle switch");
  if (s.optim.restarts.candidates == 0 && s.theta_init.empty())
    throw std::invalid_argument("this model needs random restarts (restarts >= 1)");
  s.optim.resample_size = cfg.resample_size;
  s.optim.latent_size = cfg.latent_size;
  s.optim.objective = cfg.objective;
  s.optim.validate();
  if (cfg.estimator == Estimator::Wll && s.simulator->name() != "gaussian")
    throw std::invalid_argument("the WLL estimator needs a Gaussian location model");
  return s;
}

std::uint64_t data_seed(std::uint64_t seed) { return split_seed(seed ^ 0x64617461ULL, 0); }
std::uint64_t bootstrap_seed(std::uint64_t seed) { return split_seed(seed ^ 0x626f6f74ULL, 0); }

Dataset make_dataset(const ModelSetup& setup, std::uint64_t seed) {
  Rng rng(data_seed(seed));
  return generate_dataset(setup.contamination, *setup.simulator, setup.theta_true, rng);
}

BootstrapConfig make_bootstrap_config(const ExperimentConfig& cfg, const ModelSetup& setup,
                                      const Dataset& data) {
  BootstrapConfig b;
  b.B = cfg.B;
  b.dp.alpha = cfg.alpha;
  b.dp.truncation = cfg.truncation == 0 ? data.size() : cfg.truncation;
  b.optim = setup.optim;
  b.kernel = setup.kernel.build(data.points);
  b.master_seed = bootstrap_seed(cfg.seed);
  b.parallelism = cfg.threads;
  b.strict = cfg.strict;
  b.theta_init = setup.theta_init;
  b.prior = setup.prior;
  return b;
}

ExperimentRun run_experiment_on(const ExperimentConfig& cfg, const ModelSetup& setup,
                                Dataset data) {
  const auto start = std::chrono::steady_clock::now();
  const BootstrapConfig boot = make_bootstrap_config(cfg, setup, data);
  ExperimentRun run;
  run.theta_true = setup.theta_true;
  run.posterior = cfg.estimator == Estimator::Wll
                      ? npl_wll_gaussian(data, boot)
                      : mmd_posterior_bootstrap(data, *setup.simulator, boot);
  run.summary = posterior_summary(run.posterior);
  run.data = std::move(data);

  ExperimentResult& r = run.result;
  r.run_id = cfg.model + "-" + std::to_string(cfg.seed);
  r.model = cfg.model;
  r.n = run.data.size();
  r.epsilon = cfg.epsilon;
  r.alpha = cfg.alpha;
  r.truncation = boot.dp.truncation;
  r.B = cfg.B;
  r.lengthscales = boot.kernel.lengthscales();
  r.nmse = nmse(run.summary.mean, setup.theta_true);
  r.failures = run.posterior.failure_count();
  r.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return run;
}

ExperimentRun run_experiment(const ExperimentConfig& cfg) {
  const ModelSetup setup = make_model(cfg);
  return run_experiment_on(cfg, setup, make_dataset(setup, cfg.seed));
}

}  // namespace nplmmd
