#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nplmmd/kernels.hpp"
#include "nplmmd/measures.hpp"
#include "nplmmd/random.hpp"
#include "nplmmd/simulators.hpp"

namespace nplmmd {

enum class StepMethod { Adam, Sgd };

/// Resample: fresh multinomial y_{1:N} from the measure every step.
/// Weighted: exact cross term against all weighted atoms.
enum class Objective { Resample, Weighted };

struct RestartConfig {
  std::size_t candidates = 0;  // 0 disables random restarts
  std::size_t keep = 1;
};

struct OptimConfig {
  StepMethod method = StepMethod::Adam;
  double learning_rate = 0.1;
  std::size_t steps = 1000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_hat = 1e-8;
  std::size_t resample_size = 0;  // N per step; 0 means min(atoms, 1024)
  std::size_t latent_size = 0;    // M per step; 0 means N
  Objective objective = Objective::Resample;
  RestartConfig restarts;
  bool record_trace = false;
  /// Optional box; iterates are projected onto it after every step.
  std::vector<double> lower_bounds;
  std::vector<double> upper_bounds;

  void validate() const;
  std::size_t resolved_resample_size(std::size_t atoms) const;
  std::size_t resolved_latent_size(std::size_t atoms) const;
};

struct OptimResult {
  std::vector<double> theta_hat;
  double final_loss = 0.0;
  /// Loss at the starting point, same estimator as final_loss; NaN unless
  /// record_trace was set.
  double initial_loss = 0.0;
  std::vector<double> trace;
  std::size_t steps_taken = 0;
};

class DivergedError : public std::runtime_error {
 public:
  DivergedError(const std::string& what, std::size_t step)
      : std::runtime_error(what + " at step " + std::to_string(step)), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t t = 0;
};

/// One bias-corrected Adam update; returns the new iterate.
std::vector<double> adam_step(const OptimConfig& cfg, AdamState& state,
                              std::span<const double> grad, std::span<const double> theta);

std::vector<double> sgd_step(const OptimConfig& cfg, std::span<const double> grad,
                             std::span<const double> theta);

/// Stochastic-gradient minimisation of MMD^2(measure, P_theta).
OptimResult minimize_mmd(const Simulator& simulator, const WeightedMeasure& measure,
                         const Kernel& kernel, const OptimConfig& cfg,
                         std::span<const double> theta_init, Rng& rng);

using PriorSampler = std::function<void(Rng&, std::span<double>)>;

/// Scores cfg.restarts.candidates prior draws once with mmd2_weighted on a
/// shared latent batch, optimises from the cfg.restarts.keep best and
/// returns the run with the smallest final loss.
OptimResult random_restart_minimize(const Simulator& simulator, const WeightedMeasure& measure,
                                    const Kernel& kernel, const OptimConfig& cfg,
                                    const PriorSampler& prior, Rng& rng);

/// Independent uniform prior on a box.
PriorSampler uniform_box_prior(std::vector<double> lower, std::vector<double> upper);

}  // namespace nplmmd
