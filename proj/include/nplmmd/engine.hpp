#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "nplmmd/kernels.hpp"
#include "nplmmd/measures.hpp"
#include "nplmmd/optimizer.hpp"
#include "nplmmd/simulators.hpp"

namespace nplmmd {

struct BootstrapConfig {
  std::size_t B = 512;
  DPConfig dp;
  OptimConfig optim;
  Kernel kernel = Kernel::gaussian(1.0);
  std::uint64_t master_seed = 0;
  std::size_t parallelism = 1;  // 0 means all hardware threads
  /// Rethrow the first failure instead of flagging it.
  bool strict = false;
  /// Starting point, used when optim.restarts is disabled.
  std::vector<double> theta_init;
  /// Restart prior, used when optim.restarts.candidates > 0.
  PriorSampler prior;

  void validate() const;
};

struct PosteriorSample {
  std::vector<std::vector<double>> thetas;
  std::vector<double> losses;
  std::vector<std::uint64_t> seeds;
  /// failed[j] marks a draw whose optimisation threw; its theta is NaN.
  std::vector<bool> failed;
  std::vector<std::string> messages;
  BootstrapConfig config;

  std::size_t size() const noexcept { return thetas.size(); }
  std::size_t param_dim() const noexcept { return thetas.empty() ? 0 : thetas[0].size(); }
  std::size_t failure_count() const;
};

/// The MMD posterior bootstrap. Draw j uses its own generator seeded with
/// split_seed(master_seed, j), so results do not depend on scheduling.
PosteriorSample mmd_posterior_bootstrap(const Dataset& data, const Simulator& simulator,
                                        const BootstrapConfig& cfg);

/// sum_i w_i z_i over the atoms; the Gaussian location weighted MLE.
std::vector<double> weighted_mean(const WeightedMeasure& measure);

/// Weighted log-likelihood NPL for the Gaussian location model: each draw is
/// the weighted mean of the DP measure's atoms.
PosteriorSample npl_wll_gaussian(const Dataset& data, const BootstrapConfig& cfg);

struct PosteriorSummary {
  std::size_t draws = 0;  // non-failed draws used
  std::vector<double> mean;
  std::vector<double> sd;
  /// quantiles[q][k] for levels kQuantileLevels[q].
  std::vector<std::vector<double>> quantiles;

  static constexpr double kQuantileLevels[5] = {0.05, 0.25, 0.5, 0.75, 0.95};
};

/// Per-coordinate summary over the non-failed draws.
PosteriorSummary posterior_summary(const PosteriorSample& sample);

/// Runs body(j) for j in [0, count) on `workers` threads (0 = all cores).
/// The first exception is rethrown after all workers stop.
void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& body);

std::size_t resolve_workers(std::size_t requested);

}  // namespace nplmmd
