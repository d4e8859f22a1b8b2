#include "nplmmd/simulators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "nplmmd/special.hpp"

namespace nplmmd {

void Simulator::check_theta(std::size_t size) const {
  if (size != param_dim())
    throw std::invalid_argument(std::string(name()) + ": expected " +
                                std::to_string(param_dim()) + " parameters, got " +
                                std::to_string(size));
}

void Simulator::check_latent(std::size_t size) const {
  if (size != latent_dim())
    throw std::invalid_argument(std::string(name()) + ": expected latent of size " +
                                std::to_string(latent_dim()) + ", got " + std::to_string(size));
}

void Simulator::simulate_with_jacobian(std::span<const double> theta, std::span<const double> u,
                                       std::span<double> out,
                                       std::span<double> jacobian) const {
  const std::size_t p = param_dim();
  const std::size_t q = output_dim();
  check_theta(theta.size());
  std::array<Dual, Dual::kMaxTangents> th;
  if (p > th.size()) throw std::invalid_argument("simulate_with_jacobian: too many parameters");
  for (std::size_t i = 0; i < p; ++i) th[i] = Dual::variable(theta[i], p, i);
  std::vector<Dual> res(q);
  simulate_dual(std::span<const Dual>(th.data(), p), u, res);
  for (std::size_t r = 0; r < q; ++r) {
    out[r] = res[r].value();
    for (std::size_t c = 0; c < p; ++c) jacobian[r * p + c] = res[r].partial(c);
  }
}

Points Simulator::sample_latents(std::size_t count, Rng& rng) const {
  Points us(latent_dim(), count);
  for (std::size_t i = 0; i < count; ++i) sample_latent(rng, us[i]);
  return us;
}

Points Simulator::simulate_batch(std::span<const double> theta, const Points& us) const {
  Points out(output_dim(), us.size());
  for (std::size_t i = 0; i < us.size(); ++i) simulate(theta, us[i], out[i]);
  return out;
}

Points Simulator::sample(std::span<const double> theta, std::size_t count, Rng& rng) const {
  return simulate_batch(theta, sample_latents(count, rng));
}

// ---------------------------------------------------------------------------
// Gaussian location

GaussianLocation::GaussianLocation(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw std::invalid_argument("GaussianLocation: dimension must be >= 1");
}

void GaussianLocation::sample_latent(Rng& rng, std::span<double> u) const {
  for (double& x : u) x = standard_normal(rng);
}

void GaussianLocation::simulate(std::span<const double> theta, std::span<const double> u,
                                std::span<double> out) const {
  check_theta(theta.size());
  check_latent(u.size());
  for (std::size_t k = 0; k < dim_; ++k) out[k] = theta[k] + u[k];
}

void GaussianLocation::simulate_dual(std::span<const Dual> theta, std::span<const double> u,
                                     std::span<Dual> out) const {
  check_theta(theta.size());
  check_latent(u.size());
  for (std::size_t k = 0; k < dim_; ++k) out[k] = theta[k] + Dual(u[k]);
}

void GaussianLocation::simulate_with_jacobian(std::span<const double> theta,
                                              std::span<const double> u, std::span<double> out,
                                              std::span<double> jacobian) const {
  simulate(theta, u, out);
  std::fill(jacobian.begin(), jacobian.end(), 0.0);
  for (std::size_t k = 0; k < dim_; ++k) jacobian[k * dim_ + k] = 1.0;
}

// ---------------------------------------------------------------------------
// g-and-k

namespace {

void check_open_unit(std::span<const double> u) {
  for (std::size_t i = 0; i < u.size(); ++i)
    if (!(u[i] > 0.0 && u[i] < 1.0))
      throw std::invalid_argument("latent component " + std::to_string(i) + " = " +
                                  std::to_string(u[i]) + " is outside (0, 1)");
}

template <class S>
S gandk_map(std::span<const S> th, std::span<const double> u) {
  using std::exp;
  using std::tanh;
  const double z = std::sqrt(-2.0 * std::log(u[0])) * std::cos(2.0 * std::numbers::pi * u[1]);
  const S kappa = exp(th[3]);
  // (1 - e^{-gz}) / (1 + e^{-gz}) written as tanh(gz / 2) so it stays finite.
  const S skew = S(1.0) + S(0.8) * tanh(th[2] * S(0.5 * z));
  const S tail = exp(kappa * S(std::log1p(z * z)));
  return th[0] + th[1] * skew * tail * S(z);
}

}  // namespace

void GAndK::sample_latent(Rng& rng, std::span<double> u) const {
  u[0] = uniform_open01(rng);
  u[1] = uniform_open01(rng);
}

void GAndK::simulate(std::span<const double> theta, std::span<const double> u,
                     std::span<double> out) const {
  check_theta(theta.size());
  check_latent(u.size());
  check_open_unit(u);
  out[0] = gandk_map<double>(theta, u);
}

void GAndK::simulate_dual(std::span<const Dual> theta, std::span<const double> u,
                          std::span<Dual> out) const {
  check_theta(theta.size());
  check_latent(u.size());
  check_open_unit(u);
  out[0] = gandk_map<Dual>(theta, u);
}

// ---------------------------------------------------------------------------
// Toggle switch

namespace {

template <class S>
S positive_power(const S& base, const S& exponent) {
  using std::exp;
  using std::log;
  return exp(exponent * log(clamp_below(base, ToggleSwitch::kStateFloor)));
}

// Truncated-normal quantile transform: quantile(cdf(lo) + u (1 - cdf(lo))).
template <class S>
S truncated_quantile(const S& lower, double u) {
  const S cut = normal_cdf(lower);
  const S arg = cut + S(u) * (S(1.0) - cut);
  return normal_quantile(clamp_to(arg, ToggleSwitch::kProbClamp, 1.0 - ToggleSwitch::kProbClamp));
}

template <class S>
S toggle_map(std::span<const S> th, std::span<const double> u, std::size_t steps,
             std::vector<std::pair<double, double>>* trace) {
  const S& alpha1 = th[0];
  const S& alpha2 = th[1];
  const S& beta1 = th[2];
  const S& beta2 = th[3];
  const S& mu = th[4];
  const S& sigma = th[5];
  const S& gamma = th[6];
  if (!(value_of(mu) > 0.0) || !(value_of(sigma) > 0.0))
    throw SimulationError("toggle switch: mu and sigma must be positive", 0);
  for (std::size_t i = 0; i < u.size(); ++i)
    if (!(u[i] > 0.0 && u[i] < 1.0))
      throw SimulationError("toggle switch: latent component " + std::to_string(i) +
                                " outside (0, 1)",
                            i / 2);

  S v(10.0);
  S w(10.0);
  if (trace) trace->emplace_back(value_of(v), value_of(w));
  for (std::size_t t = 0; t < steps; ++t) {
    const S v_mean = v + alpha1 / (S(1.0) + positive_power(w, beta1)) - (S(1.0) + S(0.03) * v);
    const S w_mean = w + alpha2 / (S(1.0) + positive_power(v, beta2)) - (S(1.0) + S(0.03) * w);
    const S v_next = v_mean + S(0.5) * truncated_quantile(S(-2.0) * v_mean, u[2 * t]);
    const S w_next = w_mean + S(0.5) * truncated_quantile(S(-2.0) * w_mean, u[2 * t + 1]);
    v = clamp_below(v_next, ToggleSwitch::kStateFloor);
    w = clamp_below(w_next, ToggleSwitch::kStateFloor);
    if (!std::isfinite(value_of(v)) || !std::isfinite(value_of(w)))
      throw SimulationError("toggle switch: non-finite state", t + 1);
    if (trace) trace->emplace_back(value_of(v), value_of(w));
  }
  if (!(value_of(v) > 0.0)) throw SimulationError("toggle switch: v_T <= 0", steps);

  const S v_gamma = positive_power(v, gamma);
  const S location = mu + v;
  const S scale = mu * sigma / v_gamma;
  const S out = truncated_quantile(-location / scale, u[2 * steps]) * scale + location;
  if (!std::isfinite(value_of(out))) throw SimulationError("toggle switch: non-finite output", steps);
  return out;
}

}  // namespace

ToggleSwitch::ToggleSwitch(std::size_t steps) : steps_(steps) {
  if (steps == 0) throw std::invalid_argument("ToggleSwitch: need at least one step");
}

void ToggleSwitch::sample_latent(Rng& rng, std::span<double> u) const {
  for (double& x : u) x = uniform_open01(rng);
}

void ToggleSwitch::simulate(std::span<const double> theta, std::span<const double> u,
                            std::span<double> out) const {
  check_theta(theta.size());
  check_latent(u.size());
  out[0] = toggle_map<double>(theta, u, steps_, nullptr);
}

void ToggleSwitch::simulate_dual(std::span<const Dual> theta, std::span<const double> u,
                                 std::span<Dual> out) const {
  check_theta(theta.size());
  check_latent(u.size());
  out[0] = toggle_map<Dual>(theta, u, steps_, nullptr);
}

std::vector<std::pair<double, double>> ToggleSwitch::trajectory(
    std::span<const double> theta, std::span<const double> u) const {
  check_theta(theta.size());
  check_latent(u.size());
  std::vector<std::pair<double, double>> trace;
  trace.reserve(steps_ + 1);
  toggle_map<double>(theta, u, steps_, &trace);
  return trace;
}

// ---------------------------------------------------------------------------

std::vector<double> gaussian_location_simulate(std::span<const double> theta,
                                               std::span<const double> u) {
  GaussianLocation sim(theta.size());
  std::vector<double> out(theta.size());
  sim.simulate(theta, u, out);
  return out;
}

double gandk_simulate(std::span<const double> theta, std::span<const double> u) {
  double out = 0.0;
  GAndK().simulate(theta, u, std::span<double>(&out, 1));
  return out;
}

double toggle_switch_simulate(std::span<const double> theta, std::span<const double> u,
                              std::size_t steps) {
  double out = 0.0;
  ToggleSwitch(steps).simulate(theta, u, std::span<double>(&out, 1));
  return out;
}

double sample_cauchy(double location, double scale, Rng& rng) {
  return location + scale * std::tan(std::numbers::pi * (uniform_open01(rng) - 0.5));
}

namespace {

std::vector<std::size_t> choose_indices(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Partial Fisher-Yates: the first k entries are a uniform k-subset.
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  return idx;
}

void check_fraction(double x, const char* what) {
  if (!(x >= 0.0 && x <= 1.0))
    throw std::invalid_argument(std::string("generate_dataset: ") + what + " must lie in [0, 1]");
}

}  // namespace

Dataset generate_dataset(const ContaminationSpec& spec, const Simulator& simulator,
                         std::span<const double> true_theta, Rng& rng) {
  using Kind = ContaminationSpec::Kind;
  const std::size_t n = spec.n;
  if (n < 2) throw std::invalid_argument("generate_dataset: need n >= 2");
  check_fraction(spec.epsilon, "epsilon");

  if (spec.kind == Kind::CauchyData) {
    Points pts(true_theta.size(), n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < true_theta.size(); ++k)
        pts[i][k] = sample_cauchy(true_theta[k], 1.0, rng);
    return Dataset(std::move(pts));
  }

  std::vector<double> u(simulator.latent_dim());
  Points pts(simulator.output_dim(), n);
  std::vector<bool> mask(n, false);

  if (spec.kind == Kind::GaussianMixture) {
    std::vector<double> outlier = spec.outlier_theta;
    if (outlier.empty()) outlier.assign(simulator.param_dim(), 20.0);
    for (std::size_t i = 0; i < n; ++i) {
      mask[i] = uniform01(rng) < spec.epsilon;
      simulator.sample_latent(rng, u);
      simulator.simulate(mask[i] ? std::span<const double>(outlier) : true_theta, u, pts[i]);
    }
    return Dataset(std::move(pts), std::move(mask));
  }

  for (std::size_t i = 0; i < n; ++i) {
    simulator.sample_latent(rng, u);
    simulator.simulate(true_theta, u, pts[i]);
  }

  if (spec.kind == Kind::GnkShift) {
    const auto half = static_cast<std::size_t>(std::floor(spec.epsilon * double(n) / 2.0 + 1e-9));
    const auto chosen = choose_indices(n, 2 * half, rng);
    for (std::size_t j = 0; j < chosen.size(); ++j) {
      const double delta = j < half ? spec.shift : -spec.shift;
      for (double& x : pts[chosen[j]]) x += delta;
      mask[chosen[j]] = true;
    }
  } else {  // CauchyNoise
    const auto count = static_cast<std::size_t>(std::floor(spec.epsilon * double(n) + 1e-9));
    for (std::size_t i : choose_indices(n, count, rng)) {
      for (double& x : pts[i]) x += sample_cauchy(spec.noise_location, spec.noise_scale, rng);
      mask[i] = true;
    }
  }
  return Dataset(std::move(pts), std::move(mask));
}

}  // namespace nplmmd
