#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nplmmd/engine.hpp"
#include "nplmmd/kernels.hpp"
#include "nplmmd/measures.hpp"
#include "nplmmd/optimizer.hpp"
#include "nplmmd/simulators.hpp"

namespace nplmmd {

enum class KernelMode { Fixed, Median, Mixture };

struct KernelSpec {
  KernelMode mode = KernelMode::Median;
  std::vector<double> lengthscales;  // one value for Fixed, several for Mixture

  /// Resolves against the observed data (needed for Median).
  Kernel build(const Points& data) const;
};

/// Posterior estimator: the MMD posterior bootstrap, or the weighted
/// log-likelihood baseline (Gaussian location models only).
enum class Estimator { Mmd, Wll };

/// One experiment. Unset optionals take the model's defaults.
struct ExperimentConfig {
  std::string model = "gaussian";
  Estimator estimator = Estimator::Mmd;
  std::optional<std::size_t> n;
  std::optional<std::size_t> dim;  // Gaussian location dimension
  double epsilon = 0.0;
  double alpha = 0.0;
  std::size_t truncation = 0;  // 0 means T = n
  std::size_t B = 512;
  std::optional<std::size_t> steps;
  std::optional<double> learning_rate;
  std::optional<KernelSpec> kernel;
  std::optional<std::size_t> restarts;
  std::optional<std::size_t> keep;
  std::size_t resample_size = 0;
  std::size_t latent_size = 0;
  Objective objective = Objective::Resample;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  bool strict = false;
};

/// Everything model-specific that an experiment needs.
struct ModelSetup {
  std::unique_ptr<Simulator> simulator;
  std::vector<double> theta_true;
  std::vector<double> theta_init;
  ContaminationSpec contamination;
  KernelSpec kernel;
  OptimConfig optim;
  PriorSampler prior;
};

const std::vector<std::string>& model_names();

/// Builds the setup for cfg.model with cfg's overrides applied. Throws
/// std::invalid_argument for unknown models or invalid settings.
ModelSetup make_model(const ExperimentConfig& cfg);

/// Default uniform restart prior for the toggle switch, in the order
/// (alpha1, alpha2, beta1, beta2, mu, sigma, gamma).
std::vector<double> toggle_switch_prior_lower();
std::vector<double> toggle_switch_prior_upper();

std::uint64_t data_seed(std::uint64_t seed);
std::uint64_t bootstrap_seed(std::uint64_t seed);

Dataset make_dataset(const ModelSetup& setup, std::uint64_t seed);

BootstrapConfig make_bootstrap_config(const ExperimentConfig& cfg, const ModelSetup& setup,
                                      const Dataset& data);

struct ExperimentResult {
  std::string run_id;
  std::string model;
  std::size_t n = 0;
  double epsilon = 0.0;
  double alpha = 0.0;
  std::size_t truncation = 0;
  std::size_t B = 0;
  std::vector<double> lengthscales;
  double nmse = 0.0;
  std::optional<double> model_mmd;
  double wall_time_seconds = 0.0;
  std::size_t failures = 0;
};

struct ExperimentRun {
  Dataset data;
  std::vector<double> theta_true;
  PosteriorSample posterior;
  PosteriorSummary summary;
  ExperimentResult result;
};

/// Generates data from cfg.seed, runs the chosen estimator and scores the
/// posterior mean against the true parameter.
ExperimentRun run_experiment(const ExperimentConfig& cfg);

/// As run_experiment, on a dataset supplied by the caller.
ExperimentRun run_experiment_on(const ExperimentConfig& cfg, const ModelSetup& setup,
                                Dataset data);

}  // namespace nplmmd
