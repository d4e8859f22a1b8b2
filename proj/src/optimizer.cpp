#include "nplmmd/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace nplmmd {

void OptimConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("OptimConfig: learning_rate must be > 0");
  if (steps == 0) throw std::invalid_argument("OptimConfig: steps must be >= 1");
  if (resample_size == 1) throw std::invalid_argument("OptimConfig: N must be >= 2");
  if (latent_size == 1) throw std::invalid_argument("OptimConfig: M must be >= 2");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw std::invalid_argument("OptimConfig: Adam betas must lie in [0, 1)");
  if (!(eps_hat > 0.0)) throw std::invalid_argument("OptimConfig: eps_hat must be > 0");
  if (restarts.candidates > 0 && (restarts.keep == 0 || restarts.keep > restarts.candidates))
    throw std::invalid_argument("OptimConfig: restarts need 1 <= keep <= candidates");
}

std::size_t OptimConfig::resolved_resample_size(std::size_t atoms) const {
  if (resample_size != 0) return resample_size;
  return std::max<std::size_t>(2, std::min<std::size_t>(atoms, 1024));
}

std::size_t OptimConfig::resolved_latent_size(std::size_t atoms) const {
  return latent_size != 0 ? latent_size : resolved_resample_size(atoms);
}

std::vector<double> adam_step(const OptimConfig& cfg, AdamState& state,
                              std::span<const double> grad, std::span<const double> theta) {
  const std::size_t p = theta.size();
  if (state.m.size() != p) {
    state.m.assign(p, 0.0);
    state.v.assign(p, 0.0);
    state.t = 0;
  }
  ++state.t;
  const double bias1 = 1.0 - std::pow(cfg.beta1, double(state.t));
  const double bias2 = 1.0 - std::pow(cfg.beta2, double(state.t));
  std::vector<double> next(theta.begin(), theta.end());
  for (std::size_t i = 0; i < p; ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / bias1;
    const double v_hat = state.v[i] / bias2;
    next[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.eps_hat);
  }
  return next;
}

std::vector<double> sgd_step(const OptimConfig& cfg, std::span<const double> grad,
                             std::span<const double> theta) {
  std::vector<double> next(theta.begin(), theta.end());
  for (std::size_t i = 0; i < next.size(); ++i) next[i] -= cfg.learning_rate * grad[i];
  return next;
}

namespace {

void project(const OptimConfig& cfg, std::vector<double>& theta) {
  for (std::size_t i = 0; i < theta.size(); ++i) {
    if (i < cfg.lower_bounds.size()) theta[i] = std::max(theta[i], cfg.lower_bounds[i]);
    if (i < cfg.upper_bounds.size()) theta[i] = std::min(theta[i], cfg.upper_bounds[i]);
  }
}

// Reporting estimate of MMD^2(measure, P_theta) on a fresh, larger draw.
double evaluate_loss(const Simulator& simulator, const WeightedMeasure& measure,
                     const Kernel& kernel, const OptimConfig& cfg, std::span<const double> theta,
                     MeasureSampler& sampler, Rng& rng) {
  const std::size_t atoms = measure.size();
  const std::size_t m = 4 * cfg.resolved_latent_size(atoms);
  const Points model = simulator.sample(theta, m, rng);
  if (cfg.objective == Objective::Weighted) return mmd2_weighted(measure, model, kernel);
  Points ys(measure.dim());
  sampler.draw(4 * cfg.resolved_resample_size(atoms), rng, ys);
  return mmd2_u(ys, model, kernel);
}

}  // namespace

OptimResult minimize_mmd(const Simulator& simulator, const WeightedMeasure& measure,
                         const Kernel& kernel, const OptimConfig& cfg,
                         std::span<const double> theta_init, Rng& rng) {
  cfg.validate();
  if (theta_init.size() != simulator.param_dim())
    throw std::invalid_argument("minimize_mmd: theta_init has wrong dimension");
  if (measure.dim() != simulator.output_dim())
    throw std::invalid_argument("minimize_mmd: measure and simulator output dimensions differ");

  const std::size_t atoms = measure.size();
  const std::size_t n = cfg.resolved_resample_size(atoms);
  const std::size_t m = cfg.resolved_latent_size(atoms);

  OptimResult result;
  result.initial_loss = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> theta(theta_init.begin(), theta_init.end());
  project(cfg, theta);

  MeasureSampler sampler(measure);
  if (cfg.record_trace)
    result.initial_loss = evaluate_loss(simulator, measure, kernel, cfg, theta, sampler, rng);

  AdamState adam;
  detail::ModelSample model;
  detail::GradientWorkspace ws(kernel);
  Points ys(measure.dim());
  Points us(simulator.latent_dim(), m);
  std::vector<double> grad(simulator.param_dim());

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    for (std::size_t j = 0; j < m; ++j) simulator.sample_latent(rng, us[j]);
    try {
      detail::simulate_with_jacobians(simulator, theta, us, model);
    } catch (const std::domain_error& e) {
      throw DivergedError(e.what(), step);
    }
    double partial_loss = 0.0;
    if (cfg.objective == Objective::Weighted) {
      detail::mmd2_gradient_weighted(model, measure, kernel, ws, grad);
    } else {
      sampler.draw(n, rng, ys);
      detail::mmd2_gradient(model, ys, kernel, ws, grad, cfg.record_trace ? &partial_loss : nullptr);
      if (cfg.record_trace) {
        const double nn = double(n);
        result.trace.push_back(partial_loss + detail::offdiagonal_sum(ys, kernel) / (nn * (nn - 1.0)));
      }
    }
    for (double g : grad)
      if (!std::isfinite(g)) throw DivergedError("non-finite MMD gradient", step);

    theta = cfg.method == StepMethod::Adam ? adam_step(cfg, adam, grad, theta)
                                           : sgd_step(cfg, grad, theta);
    project(cfg, theta);
    for (double t : theta)
      if (!std::isfinite(t)) throw DivergedError("non-finite parameter", step);
    result.steps_taken = step + 1;
  }

  result.theta_hat = theta;
  result.final_loss = evaluate_loss(simulator, measure, kernel, cfg, theta, sampler, rng);
  if (!std::isfinite(result.final_loss))
    throw DivergedError("non-finite final loss", result.steps_taken);
  return result;
}

OptimResult random_restart_minimize(const Simulator& simulator, const WeightedMeasure& measure,
                                    const Kernel& kernel, const OptimConfig& cfg,
                                    const PriorSampler& prior, Rng& rng) {
  cfg.validate();
  if (cfg.restarts.candidates == 0)
    throw std::invalid_argument("random_restart_minimize: no restart candidates configured");
  const std::size_t p = simulator.param_dim();
  const std::size_t r = cfg.restarts.candidates;
  const std::size_t m = cfg.resolved_latent_size(measure.size());

  std::vector<std::vector<double>> candidates(r, std::vector<double>(p));
  for (auto& c : candidates) prior(rng, c);

  // Common latents so that candidates are compared on the same draw.
  const Points us = simulator.sample_latents(m, rng);
  const double self_term = detail::weighted_self_term(measure, kernel);
  std::vector<double> scores(r, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < r; ++i) {
    try {
      const Points model = simulator.simulate_batch(candidates[i], us);
      const double s = detail::mmd2_weighted_with_self(measure, self_term, model, kernel);
      if (std::isfinite(s)) scores[i] = s;
    } catch (const std::exception&) {
      // Infeasible candidate: keeps an infinite score.
    }
  }

  std::vector<std::size_t> order(r);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  OptimConfig inner = cfg;
  inner.restarts = {};
  OptimResult best;
  bool have_best = false;
  std::string last_error = "no feasible restart candidate";
  for (std::size_t k = 0; k < cfg.restarts.keep; ++k) {
    try {
      OptimResult res = minimize_mmd(simulator, measure, kernel, inner, candidates[order[k]], rng);
      if (!have_best || res.final_loss < best.final_loss) {
        best = std::move(res);
        have_best = true;
      }
    } catch (const std::exception& e) {
      last_error = e.what();
    }
  }
  if (!have_best) throw DivergedError("all restarts failed: " + last_error, 0);
  return best;
}

PriorSampler uniform_box_prior(std::vector<double> lower, std::vector<double> upper) {
  if (lower.size() != upper.size())
    throw std::invalid_argument("uniform_box_prior: bound vectors differ in length");
  for (std::size_t i = 0; i < lower.size(); ++i)
    if (!(lower[i] <= upper[i])) throw std::invalid_argument("uniform_box_prior: empty interval");
  return [lower = std::move(lower), upper = std::move(upper)](Rng& rng, std::span<double> out) {
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = lower[i] + (upper[i] - lower[i]) * uniform01(rng);
  };
}

}  // namespace nplmmd
