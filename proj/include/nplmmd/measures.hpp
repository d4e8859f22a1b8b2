#pragma once

#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "nplmmd/points.hpp"
#include "nplmmd/random.hpp"

namespace nplmmd {

/// Discrete probability measure: atoms in R^d with one weight per atom.
/// Weights are non-negative and sum to one (checked at construction).
class WeightedMeasure {
 public:
  WeightedMeasure(Points atoms, std::vector<double> weights);

  /// Equal weights 1/n on every atom.
  static WeightedMeasure uniform(Points atoms);

  const Points& atoms() const noexcept { return atoms_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  std::size_t size() const noexcept { return weights_.size(); }
  std::size_t dim() const noexcept { return atoms_.dim(); }

 private:
  Points atoms_;
  std::vector<double> weights_;
};

/// Observed data; the mask marks points generated by the contaminant.
struct Dataset {
  Points points;
  std::vector<bool> contamination_mask;

  Dataset() = default;
  explicit Dataset(Points pts);
  Dataset(Points pts, std::vector<bool> mask);

  std::size_t size() const noexcept { return points.size(); }
  std::size_t outlier_count() const;
};

/// Draws one pseudo-atom from the prior centering measure.
using CenteringSampler = std::function<void(Rng&, std::span<double>)>;

struct DPConfig {
  double alpha = 0.0;
  std::size_t truncation = 1;  // T
  /// Empty means Normal(mean(data), diag(std(data)^2)).
  CenteringSampler centering;
};

/// Dirichlet(concentrations) via normalised Gamma draws. Shapes below one use
/// Gamma(a) = Gamma(a + 1) * U^(1/a), evaluated in log space.
std::vector<double> sample_dirichlet(std::span<const double> concentrations, Rng& rng);

/// Approximate DP posterior draw. With alpha > 0 the result has the n data
/// atoms followed by T fresh pseudo-atoms, weighted by
/// Dir(1, ..., 1, alpha/T, ..., alpha/T). With alpha == 0 it is the Bayesian
/// bootstrap over the data atoms only.
WeightedMeasure sample_dp_measure(const Dataset& data, const DPConfig& cfg, Rng& rng);

/// Normal(mean, diag(std^2)) fitted to the data, as a centering sampler.
CenteringSampler empirical_normal_centering(const Points& data);

/// Reusable multinomial sampler over the atoms of a measure.
class MeasureSampler {
 public:
  explicit MeasureSampler(const WeightedMeasure& measure);
  std::size_t draw_index(Rng& rng) { return dist_(rng); }
  /// Overwrites `out` with `count` i.i.d. atoms.
  void draw(std::size_t count, Rng& rng, Points& out);

 private:
  const WeightedMeasure* measure_;
  std::discrete_distribution<std::size_t> dist_;
};

/// N i.i.d. draws from the measure (N >= 2).
Points resample(const WeightedMeasure& measure, std::size_t count, Rng& rng);

/// First K stick-breaking weights w_k = b_k prod_{i<k} (1 - b_i) with
/// b_i ~ Beta(1, alpha_prime).
std::vector<double> sample_gem_weights(double alpha_prime, std::size_t count, Rng& rng);

}  // namespace nplmmd
