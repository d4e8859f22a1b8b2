#include "nplmmd/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nplmmd {

double nmse(std::span<const double> theta_hat, std::span<const double> theta_true) {
  if (theta_hat.size() != theta_true.size())
    throw std::invalid_argument("nmse: dimension mismatch");
  double err = 0.0, norm = 0.0;
  for (std::size_t k = 0; k < theta_true.size(); ++k) {
    err += (theta_hat[k] - theta_true[k]) * (theta_hat[k] - theta_true[k]);
    norm += theta_true[k] * theta_true[k];
  }
  if (norm == 0.0) throw std::invalid_argument("nmse: true parameter is the zero vector");
  return err / norm;
}

double estimate_model_mmd2(std::span<const double> theta_hat, std::span<const double> theta_true,
                           const Simulator& simulator, const Kernel& kernel,
                           std::size_t sample_size, Rng& rng) {
  if (sample_size < 2) throw std::invalid_argument("estimate_model_mmd: sample_size must be >= 2");
  const Points xs = simulator.sample(theta_hat, sample_size, rng);
  const Points ys = simulator.sample(theta_true, sample_size, rng);
  return mmd2_u(xs, ys, kernel);
}

double estimate_model_mmd(std::span<const double> theta_hat, std::span<const double> theta_true,
                          const Simulator& simulator, const Kernel& kernel,
                          std::size_t sample_size, Rng& rng) {
  return std::sqrt(std::max(
      0.0, estimate_model_mmd2(theta_hat, theta_true, simulator, kernel, sample_size, rng)));
}

double theorem1_bound(double n, double alpha) {
  if (!(n >= 1.0)) throw std::invalid_argument("theorem1_bound: n must be >= 1");
  if (!(alpha >= 0.0)) throw std::invalid_argument("theorem1_bound: alpha must be >= 0");
  const double an = alpha + n;
  return 2.0 / std::sqrt(n) +
         2.0 * std::sqrt((2.0 * (n - 1.0) + alpha * (alpha + 1.0)) / (an * (an + 1.0))) +
         2.0 * std::sqrt(alpha * (1.0 + alpha) / (an * (an + 1.0)));
}

std::vector<std::size_t> default_bound_grid() {
  std::vector<std::size_t> grid;
  for (int i = 0; i < 5; ++i)
    grid.push_back(std::size_t(std::llround(250.0 * std::pow(16.0, i / 4.0))));
  return grid;
}

std::vector<BoundRow> bound_check_experiment(const std::vector<std::size_t>& n_grid,
                                             std::size_t runs, const ExperimentConfig& base,
                                             std::size_t mmd_sample_size) {
  if (n_grid.empty()) throw std::invalid_argument("bound_check: empty n grid");
  if (runs == 0) throw std::invalid_argument("bound_check: runs must be >= 1");
  std::vector<BoundRow> rows;
  for (std::size_t g = 0; g < n_grid.size(); ++g) {
    ExperimentConfig cfg = base;
    cfg.n = n_grid[g];
    double total = 0.0;
    for (std::size_t r = 0; r < runs; ++r) {
      cfg.seed = split_seed(base.seed, g * runs + r);
      const ModelSetup setup = make_model(cfg);
      const ExperimentRun run = run_experiment_on(cfg, setup, make_dataset(setup, cfg.seed));
      const Kernel kernel = setup.kernel.build(run.data.points);
      Rng rng(split_seed(cfg.seed, 0xb0));
      total += estimate_model_mmd2(run.summary.mean, setup.theta_true, *setup.simulator, kernel,
                                   mmd_sample_size, rng);
    }
    const double n = double(n_grid[g]);
    rows.push_back({n_grid[g], std::sqrt(std::max(0.0, total / double(runs))), 2.0 / std::sqrt(n)});
  }
  return rows;
}

SweepParameter parse_sweep_parameter(const std::string& name) {
  if (name == "alpha") return SweepParameter::Alpha;
  if (name == "T") return SweepParameter::Truncation;
  if (name == "lengthscale") return SweepParameter::Lengthscale;
  throw std::invalid_argument("unknown sweep parameter '" + name +
                              "' (expected alpha, T or lengthscale)");
}

std::string to_string(SweepParameter parameter) {
  switch (parameter) {
    case SweepParameter::Alpha: return "alpha";
    case SweepParameter::Truncation: return "T";
    case SweepParameter::Lengthscale: return "lengthscale";
  }
  return "?";
}

std::vector<SweepRow> hyperparameter_sweep(SweepParameter parameter,
                                           const std::vector<double>& grid,
                                           const ExperimentConfig& base) {
  if (grid.empty()) throw std::invalid_argument("sweep: empty grid");
  std::vector<ExperimentConfig> configs;
  for (double v : grid) {
    ExperimentConfig cfg = base;
    switch (parameter) {
      case SweepParameter::Alpha:
        if (!(v >= 0.0)) throw std::invalid_argument("sweep: alpha values must be >= 0");
        cfg.alpha = v;
        break;
      case SweepParameter::Truncation:
        if (!(v >= 1.0) || v != std::floor(v))
          throw std::invalid_argument("sweep: T values must be positive integers");
        cfg.truncation = std::size_t(v);
        break;
      case SweepParameter::Lengthscale:
        if (!(v > 0.0)) throw std::invalid_argument("sweep: lengthscales must be > 0");
        cfg.kernel = KernelSpec{KernelMode::Fixed, {v}};
        break;
    }
    configs.push_back(std::move(cfg));
  }
  const ModelSetup setup = make_model(configs[0]);
  const Dataset data = make_dataset(setup, base.seed);
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const ModelSetup s = make_model(configs[i]);
    rows.push_back({grid[i], run_experiment_on(configs[i], s, data).result.nmse});
  }
  return rows;
}

}  // namespace nplmmd
