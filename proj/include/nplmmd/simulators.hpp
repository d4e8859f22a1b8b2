#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nplmmd/dual.hpp"
#include "nplmmd/measures.hpp"
#include "nplmmd/points.hpp"
#include "nplmmd/random.hpp"

namespace nplmmd {

/// Raised when a simulator cannot produce a finite output.
class SimulationError : public std::runtime_error {
 public:
  SimulationError(const std::string& what, std::size_t step)
      : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// Generative model x = G_theta(u), u ~ U. G is deterministic in (theta, u)
/// and can be evaluated on plain reals or on dual numbers.
class Simulator {
 public:
  virtual ~Simulator() = default;

  virtual std::string_view name() const = 0;
  virtual std::size_t param_dim() const = 0;
  virtual std::size_t latent_dim() const = 0;
  virtual std::size_t output_dim() const = 0;

  virtual void sample_latent(Rng& rng, std::span<double> u) const = 0;
  virtual void simulate(std::span<const double> theta, std::span<const double> u,
                        std::span<double> out) const = 0;
  virtual void simulate_dual(std::span<const Dual> theta, std::span<const double> u,
                             std::span<Dual> out) const = 0;

  /// Output and Jacobian dG/dtheta (output_dim x param_dim, row-major).
  virtual void simulate_with_jacobian(std::span<const double> theta, std::span<const double> u,
                                      std::span<double> out, std::span<double> jacobian) const;

  Points sample_latents(std::size_t count, Rng& rng) const;
  Points simulate_batch(std::span<const double> theta, const Points& us) const;
  /// Draws `count` latents and maps them through G_theta.
  Points sample(std::span<const double> theta, std::size_t count, Rng& rng) const;

 protected:
  void check_theta(std::size_t size) const;
  void check_latent(std::size_t size) const;
};

/// N(theta, I_d) written as G_theta(u) = theta + u with u ~ N(0, I_d).
class GaussianLocation final : public Simulator {
 public:
  explicit GaussianLocation(std::size_t dim);

  std::string_view name() const override { return "gaussian"; }
  std::size_t param_dim() const override { return dim_; }
  std::size_t latent_dim() const override { return dim_; }
  std::size_t output_dim() const override { return dim_; }

  void sample_latent(Rng& rng, std::span<double> u) const override;
  void simulate(std::span<const double> theta, std::span<const double> u,
                std::span<double> out) const override;
  void simulate_dual(std::span<const Dual> theta, std::span<const double> u,
                     std::span<Dual> out) const override;
  void simulate_with_jacobian(std::span<const double> theta, std::span<const double> u,
                              std::span<double> out, std::span<double> jacobian) const override;

 private:
  std::size_t dim_;
};

/// g-and-k quantile distribution, theta = (a, b, g, log k), u ~ Unif(0,1)^2.
class GAndK final : public Simulator {
 public:
  std::string_view name() const override { return "gandk"; }
  std::size_t param_dim() const override { return 4; }
  std::size_t latent_dim() const override { return 2; }
  std::size_t output_dim() const override { return 1; }

  void sample_latent(Rng& rng, std::span<double> u) const override;
  void simulate(std::span<const double> theta, std::span<const double> u,
                std::span<double> out) const override;
  void simulate_dual(std::span<const Dual> theta, std::span<const double> u,
                     std::span<Dual> out) const override;
};

/// Toggle-switch gene network observed through a truncated-normal transform.
/// theta = (alpha1, alpha2, beta1, beta2, mu, sigma, gamma); the latent has
/// 2 * steps + 1 uniforms, two per update and one for the observation.
class ToggleSwitch final : public Simulator {
 public:
  static constexpr double kStateFloor = 1e-6;
  static constexpr double kProbClamp = 1e-12;

  explicit ToggleSwitch(std::size_t steps = 300);

  std::string_view name() const override { return "toggleswitch"; }
  std::size_t param_dim() const override { return 7; }
  std::size_t latent_dim() const override { return 2 * steps_ + 1; }
  std::size_t output_dim() const override { return 1; }
  std::size_t steps() const noexcept { return steps_; }

  void sample_latent(Rng& rng, std::span<double> u) const override;
  void simulate(std::span<const double> theta, std::span<const double> u,
                std::span<double> out) const override;
  void simulate_dual(std::span<const Dual> theta, std::span<const double> u,
                     std::span<Dual> out) const override;

  /// Runs the recursion and returns every state (v_t, w_t), t = 0..steps.
  std::vector<std::pair<double, double>> trajectory(std::span<const double> theta,
                                                    std::span<const double> u) const;

 private:
  std::size_t steps_;
};

// Scalar entry points mirroring the classes above.
std::vector<double> gaussian_location_simulate(std::span<const double> theta,
                                               std::span<const double> u);
double gandk_simulate(std::span<const double> theta, std::span<const double> u);
double toggle_switch_simulate(std::span<const double> theta, std::span<const double> u,
                              std::size_t steps = 300);

/// Huber-style contamination of a clean simulator sample.
struct ContaminationSpec {
  enum class Kind { GaussianMixture, GnkShift, CauchyNoise, CauchyData };
  Kind kind = Kind::GaussianMixture;
  std::size_t n = 0;
  /// Mixture weight (GaussianMixture, GnkShift) or noisy fraction (CauchyNoise).
  double epsilon = 0.0;
  /// Contaminating parameter for GaussianMixture; empty means all 20s.
  std::vector<double> outlier_theta;
  double shift = 50.0;
  double noise_location = 0.0;
  double noise_scale = 10.0;
};

/// Draws a dataset of spec.n points from the contaminated process. The clean
/// component is simulator at true_theta; CauchyData ignores the simulator and
/// draws Cauchy(true_theta, 1) per coordinate.
Dataset generate_dataset(const ContaminationSpec& spec, const Simulator& simulator,
                         std::span<const double> true_theta, Rng& rng);

double sample_cauchy(double location, double scale, Rng& rng);

}  // namespace nplmmd
