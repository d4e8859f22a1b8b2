#include "nplmmd/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

namespace nplmmd {

void BootstrapConfig::validate() const {
  if (B == 0) throw std::invalid_argument("BootstrapConfig: B must be >= 1");
  if (!(dp.alpha >= 0.0) || !std::isfinite(dp.alpha))
    throw std::invalid_argument("BootstrapConfig: alpha must be finite and >= 0");
  if (dp.alpha > 0.0 && dp.truncation == 0)
    throw std::invalid_argument("BootstrapConfig: T must be >= 1 when alpha > 0");
  optim.validate();
  if (optim.restarts.candidates > 0 && !prior)
    throw std::invalid_argument("BootstrapConfig: random restarts need a prior sampler");
}

std::size_t PosteriorSample::failure_count() const {
  return std::size_t(std::count(failed.begin(), failed.end(), true));
}

std::size_t resolve_workers(std::size_t requested) {
  if (requested != 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& body) {
  workers = std::min(resolve_workers(workers), std::max<std::size_t>(count, 1));
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      if (stop.load()) return;
      const std::size_t j = next.fetch_add(1);
      if (j >= count) return;
      try {
        body(j);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        stop.store(true);
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);
}

namespace {

PosteriorSample empty_sample(const BootstrapConfig& cfg, std::size_t p) {
  PosteriorSample out;
  out.thetas.assign(cfg.B, std::vector<double>(p, std::numeric_limits<double>::quiet_NaN()));
  out.losses.assign(cfg.B, std::numeric_limits<double>::quiet_NaN());
  out.seeds.resize(cfg.B);
  for (std::size_t j = 0; j < cfg.B; ++j) out.seeds[j] = split_seed(cfg.master_seed, j);
  out.failed.assign(cfg.B, false);
  out.messages.assign(cfg.B, std::string());
  out.config = cfg;
  return out;
}

DPConfig resolved_dp(const Dataset& data, const DPConfig& dp) {
  DPConfig out = dp;
  if (out.alpha > 0.0 && !out.centering) out.centering = empirical_normal_centering(data.points);
  return out;
}

}  // namespace

PosteriorSample mmd_posterior_bootstrap(const Dataset& data, const Simulator& simulator,
                                        const BootstrapConfig& cfg) {
  cfg.validate();
  if (data.size() == 0) throw std::invalid_argument("mmd_posterior_bootstrap: empty data");
  if (data.points.dim() != simulator.output_dim())
    throw std::invalid_argument("mmd_posterior_bootstrap: data dimension does not match the model");
  const bool restarts = cfg.optim.restarts.candidates > 0;
  if (!restarts && cfg.theta_init.size() != simulator.param_dim())
    throw std::invalid_argument("mmd_posterior_bootstrap: theta_init has wrong dimension");

  const DPConfig dp = resolved_dp(data, cfg.dp);
  PosteriorSample out = empty_sample(cfg, simulator.param_dim());
  std::vector<char> failed(cfg.B, 0);

  parallel_for(cfg.B, cfg.parallelism, [&](std::size_t j) {
    Rng rng(out.seeds[j]);
    try {
      const WeightedMeasure measure = sample_dp_measure(data, dp, rng);
      OptimResult res =
          restarts ? random_restart_minimize(simulator, measure, cfg.kernel, cfg.optim, cfg.prior, rng)
                   : minimize_mmd(simulator, measure, cfg.kernel, cfg.optim, cfg.theta_init, rng);
      out.thetas[j] = std::move(res.theta_hat);
      out.losses[j] = res.final_loss;
    } catch (const std::invalid_argument&) {
      throw;
    } catch (const std::exception& e) {
      if (cfg.strict) throw;
      failed[j] = 1;
      out.messages[j] = e.what();
    }
  });
  for (std::size_t j = 0; j < cfg.B; ++j) out.failed[j] = failed[j] != 0;
  return out;
}

std::vector<double> weighted_mean(const WeightedMeasure& measure) {
  std::vector<double> mean(measure.dim(), 0.0);
  for (std::size_t i = 0; i < measure.size(); ++i) {
    const auto atom = measure.atoms()[i];
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += measure.weights()[i] * atom[k];
  }
  return mean;
}

PosteriorSample npl_wll_gaussian(const Dataset& data, const BootstrapConfig& cfg) {
  cfg.validate();
  if (data.size() == 0) throw std::invalid_argument("npl_wll_gaussian: empty data");
  const DPConfig dp = resolved_dp(data, cfg.dp);
  PosteriorSample out = empty_sample(cfg, data.points.dim());

  parallel_for(cfg.B, cfg.parallelism, [&](std::size_t j) {
    Rng rng(out.seeds[j]);
    out.thetas[j] = weighted_mean(sample_dp_measure(data, dp, rng));
    out.losses[j] = 0.0;
  });
  return out;
}

PosteriorSummary posterior_summary(const PosteriorSample& sample) {
  const std::size_t p = sample.param_dim();
  std::vector<std::size_t> used;
  for (std::size_t j = 0; j < sample.size(); ++j)
    if (sample.failed.empty() || !sample.failed[j]) used.push_back(j);
  if (used.empty()) throw std::invalid_argument("posterior_summary: no successful draws");

  PosteriorSummary s;
  s.draws = used.size();
  s.mean.assign(p, 0.0);
  s.sd.assign(p, 0.0);
  s.quantiles.assign(std::size(PosteriorSummary::kQuantileLevels), std::vector<double>(p));
  const double b = double(used.size());
  std::vector<double> column(used.size());
  for (std::size_t k = 0; k < p; ++k) {
    for (std::size_t i = 0; i < used.size(); ++i) column[i] = sample.thetas[used[i]][k];
    double sum = 0.0;
    for (double x : column) sum += x;
    s.mean[k] = sum / b;
    if (used.size() > 1) {
      double ss = 0.0;
      for (double x : column) ss += (x - s.mean[k]) * (x - s.mean[k]);
      s.sd[k] = std::sqrt(ss / (b - 1.0));
    }
    // Linear interpolation between order statistics.
    std::sort(column.begin(), column.end());
    for (std::size_t q = 0; q < s.quantiles.size(); ++q) {
      const double pos = PosteriorSummary::kQuantileLevels[q] * (b - 1.0);
      const std::size_t lo = std::size_t(std::floor(pos));
      const std::size_t hi = std::min(lo + 1, column.size() - 1);
      const double frac = pos - double(lo);
      s.quantiles[q][k] = column[lo] + frac * (column[hi] - column[lo]);
    }
  }
  return s;
}

}  // namespace nplmmd
