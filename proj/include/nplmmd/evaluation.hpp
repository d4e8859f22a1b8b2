#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "nplmmd/experiments.hpp"
#include "nplmmd/kernels.hpp"
#include "nplmmd/random.hpp"
#include "nplmmd/simulators.hpp"

namespace nplmmd {

/// |theta_hat - theta_true|^2 / |theta_true|^2.
double nmse(std::span<const double> theta_hat, std::span<const double> theta_true);

/// Raw U-statistic MMD^2 between sample_size draws from each model; may be
/// negative.
double estimate_model_mmd2(std::span<const double> theta_hat, std::span<const double> theta_true,
                           const Simulator& simulator, const Kernel& kernel,
                           std::size_t sample_size, Rng& rng);

/// sqrt(max(0, estimate_model_mmd2)).
double estimate_model_mmd(std::span<const double> theta_hat, std::span<const double> theta_true,
                          const Simulator& simulator, const Kernel& kernel,
                          std::size_t sample_size, Rng& rng);

inline constexpr std::size_t kModelMmdSampleSize = 15000;

/// Excess of the generalisation bound over inf_theta MMD(P*, P_theta).
double theorem1_bound(double n, double alpha);

struct BoundRow {
  std::size_t n = 0;
  double mmd_estimate = 0.0;
  double bound = 0.0;  // 2 / sqrt(n)
};

/// For each n: `runs` bootstrap runs on fresh clean data, the squared model
/// MMD of each posterior mean averaged over runs, then clamped and rooted.
std::vector<BoundRow> bound_check_experiment(const std::vector<std::size_t>& n_grid,
                                             std::size_t runs, const ExperimentConfig& base,
                                             std::size_t mmd_sample_size = kModelMmdSampleSize);

/// Five log-spaced sample sizes in [250, 4000].
std::vector<std::size_t> default_bound_grid();

enum class SweepParameter { Alpha, Truncation, Lengthscale };

SweepParameter parse_sweep_parameter(const std::string& name);
std::string to_string(SweepParameter parameter);

struct SweepRow {
  double value = 0.0;
  double nmse = 0.0;
};

/// Runs `base` once per grid value with the chosen parameter replaced. The
/// dataset is generated once and shared across the grid.
std::vector<SweepRow> hyperparameter_sweep(SweepParameter parameter,
                                           const std::vector<double>& grid,
                                           const ExperimentConfig& base);

}  // namespace nplmmd
