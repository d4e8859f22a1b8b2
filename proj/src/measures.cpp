#include "nplmmd/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace nplmmd {

WeightedMeasure::WeightedMeasure(Points atoms, std::vector<double> weights)
    : atoms_(std::move(atoms)), weights_(std::move(weights)) {
  if (weights_.empty() || atoms_.size() != weights_.size())
    throw std::invalid_argument("WeightedMeasure: need one weight per atom and at least one atom");
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0)) throw std::invalid_argument("WeightedMeasure: negative or NaN weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw std::invalid_argument("WeightedMeasure: weights sum to " + std::to_string(total));
}

WeightedMeasure WeightedMeasure::uniform(Points atoms) {
  const std::size_t n = atoms.size();
  if (n == 0) throw std::invalid_argument("WeightedMeasure::uniform: no atoms");
  return WeightedMeasure(std::move(atoms), std::vector<double>(n, 1.0 / double(n)));
}

Dataset::Dataset(Points pts) : points(std::move(pts)), contamination_mask(points.size(), false) {}

Dataset::Dataset(Points pts, std::vector<bool> mask)
    : points(std::move(pts)), contamination_mask(std::move(mask)) {
  if (contamination_mask.size() != points.size())
    throw std::invalid_argument("Dataset: mask length differs from point count");
}

std::size_t Dataset::outlier_count() const {
  return static_cast<std::size_t>(
      std::count(contamination_mask.begin(), contamination_mask.end(), true));
}

namespace {

// log of a Gamma(shape, 1) variate.
double log_gamma_variate(double shape, Rng& rng) {
  if (shape >= 1.0) return std::log(std::gamma_distribution<double>(shape, 1.0)(rng));
  const double boosted = std::gamma_distribution<double>(shape + 1.0, 1.0)(rng);
  return std::log(boosted) + std::log(uniform_open01(rng)) / shape;
}

// Normalises log-weights in place into probabilities that sum to one.
void normalise_log_weights(std::vector<double>& w) {
  const double top = *std::max_element(w.begin(), w.end());
  double total = 0.0;
  for (double& x : w) {
    x = std::exp(x - top);
    total += x;
  }
  for (double& x : w) x /= total;
  // One correction pass brings the sum within an ulp or two of one.
  const double residual = 1.0 - std::accumulate(w.begin(), w.end(), 0.0);
  auto biggest = std::max_element(w.begin(), w.end());
  *biggest += residual;
}

}  // namespace

std::vector<double> sample_dirichlet(std::span<const double> concentrations, Rng& rng) {
  if (concentrations.empty()) throw std::invalid_argument("sample_dirichlet: empty concentrations");
  std::vector<double> logs(concentrations.size());
  for (std::size_t i = 0; i < concentrations.size(); ++i) {
    const double a = concentrations[i];
    if (!(a > 0.0) || !std::isfinite(a))
      throw std::invalid_argument("sample_dirichlet: concentration must be positive, got " +
                                  std::to_string(a));
    logs[i] = log_gamma_variate(a, rng);
  }
  normalise_log_weights(logs);
  return logs;
}

CenteringSampler empirical_normal_centering(const Points& data) {
  const std::size_t d = data.dim();
  const std::size_t n = data.size();
  if (n == 0) throw std::invalid_argument("empirical_normal_centering: empty data");
  std::vector<double> mean(d, 0.0), sd(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) mean[k] += data[i][k];
  for (double& m : mean) m /= double(n);
  if (n > 1) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < d; ++k) sd[k] += (data[i][k] - mean[k]) * (data[i][k] - mean[k]);
    for (double& s : sd) s = std::sqrt(s / double(n - 1));
  }
  return [mean = std::move(mean), sd = std::move(sd)](Rng& rng, std::span<double> out) {
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = mean[k] + sd[k] * standard_normal(rng);
  };
}

WeightedMeasure sample_dp_measure(const Dataset& data, const DPConfig& cfg, Rng& rng) {
  const std::size_t n = data.size();
  if (n == 0) throw std::invalid_argument("sample_dp_measure: empty dataset");
  if (!(cfg.alpha >= 0.0)) throw std::invalid_argument("sample_dp_measure: alpha must be >= 0");
  if (cfg.truncation == 0) throw std::invalid_argument("sample_dp_measure: T must be >= 1");

  if (cfg.alpha == 0.0) {
    std::vector<double> conc(n, 1.0);
    return WeightedMeasure(data.points, sample_dirichlet(conc, rng));
  }

  const std::size_t t = cfg.truncation;
  Points atoms = data.points;
  atoms.resize(n + t);
  const CenteringSampler centering =
      cfg.centering ? cfg.centering : empirical_normal_centering(data.points);
  for (std::size_t k = 0; k < t; ++k) centering(rng, atoms[n + k]);

  std::vector<double> conc(n + t, 1.0);
  std::fill(conc.begin() + std::ptrdiff_t(n), conc.end(), cfg.alpha / double(t));
  return WeightedMeasure(std::move(atoms), sample_dirichlet(conc, rng));
}

MeasureSampler::MeasureSampler(const WeightedMeasure& measure)
    : measure_(&measure), dist_(measure.weights().begin(), measure.weights().end()) {}

void MeasureSampler::draw(std::size_t count, Rng& rng, Points& out) {
  const Points& atoms = measure_->atoms();
  const std::size_t d = atoms.dim();
  if (out.dim() != d) out = Points(d);
  out.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto src = atoms[dist_(rng)];
    std::copy(src.begin(), src.end(), out[i].begin());
  }
}

Points resample(const WeightedMeasure& measure, std::size_t count, Rng& rng) {
  if (count < 2) throw std::invalid_argument("resample: need N >= 2");
  MeasureSampler sampler(measure);
  Points out(measure.dim());
  sampler.draw(count, rng, out);
  return out;
}

std::vector<double> sample_gem_weights(double alpha_prime, std::size_t count, Rng& rng) {
  if (!(alpha_prime > 0.0)) throw std::invalid_argument("sample_gem_weights: alpha' must be > 0");
  if (count == 0) throw std::invalid_argument("sample_gem_weights: K must be >= 1");
  std::vector<double> w(count);
  double remaining = 1.0;
  for (std::size_t k = 0; k < count; ++k) {
    // Beta(1, a) by inversion: 1 - U^(1/a).
    const double beta = -std::expm1(std::log(uniform_open01(rng)) / alpha_prime);
    w[k] = beta * remaining;
    remaining *= 1.0 - beta;
  }
  return w;
}

}  // namespace nplmmd
