#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "nplmmd/optimizer.hpp"
#include "test_support.hpp"

using namespace nplmmd;

namespace {

const std::vector<double> kGnkTheta{3.0, 1.0, 1.0, -std::log(2.0)};
const std::vector<double> kToggleTheta{22, 12, 4, 4.5, 325, 0.25, 0.15};

WeightedMeasure normal_data(double mean, std::size_t n, Rng& rng) {
  std::vector<double> xs(n);
  for (double& x : xs) x = mean + standard_normal(rng);
  return WeightedMeasure::uniform(Points::scalars(xs));
}

// Location model whose output turns NaN once theta passes 1.
class Exploding final : public Simulator {
 public:
  std::string_view name() const override { return "exploding"; }
  std::size_t param_dim() const override { return 1; }
  std::size_t latent_dim() const override { return 1; }
  std::size_t output_dim() const override { return 1; }
  void sample_latent(Rng& rng, std::span<double> u) const override { u[0] = standard_normal(rng); }
  void simulate(std::span<const double> theta, std::span<const double> u,
                std::span<double> out) const override {
    out[0] = theta[0] > 1.0 ? std::numeric_limits<double>::quiet_NaN() : theta[0] + u[0];
  }
  void simulate_dual(std::span<const Dual> theta, std::span<const double> u,
                     std::span<Dual> out) const override {
    out[0] = theta[0] + u[0];
    if (theta[0].value() > 1.0) out[0] = out[0] * std::numeric_limits<double>::quiet_NaN();
  }
};

double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t h = xs.size() / 2;
  return xs.size() % 2 ? xs[h] : 0.5 * (xs[h - 1] + xs[h]);
}

}  // namespace

TEST_CASE("adam step examples") {
  OptimConfig cfg;
  AdamState state;
  const std::vector<double> theta{1.0, -2.0, 3.0};
  const std::vector<double> zero(3, 0.0);
  CHECK(adam_step(cfg, state, zero, theta) == theta);
  CHECK(state.t == 1);

  AdamState fresh;
  const std::vector<double> g{0.3, -4.0, 1e-3};
  const auto next = adam_step(cfg, fresh, g, theta);
  for (std::size_t i = 0; i < 3; ++i) {
    const double expected = cfg.learning_rate * g[i] / (std::abs(g[i]) + cfg.eps_hat);
    CHECK(std::abs((theta[i] - next[i]) - expected) <= 1e-6);
  }

  AdamState a, b;
  CHECK(adam_step(cfg, a, g, theta) == adam_step(cfg, b, g, theta));
  CHECK(a.m == b.m);
  CHECK(a.v == b.v);
}

// |m_hat| / sqrt(v_hat) can exceed one by a few percent on noisy gradients.
TEST_CASE("adam coordinate updates stay within the learning rate") {
  const double tolerance = 0.1;
  OptimConfig cfg;
  cfg.learning_rate = 0.05;
  Rng rng(1);
  for (int rep = 0; rep < 100; ++rep) {
    AdamState state;
    std::vector<double> theta(5, 0.0), g(5);
    const double scale = std::exp(6.0 * standard_normal(rng));
    for (int t = 0; t < 200; ++t) {
      for (double& x : g) x = scale * standard_normal(rng);
      const auto next = adam_step(cfg, state, g, theta);
      for (std::size_t i = 0; i < 5; ++i)
        CHECK(std::abs(next[i] - theta[i]) <= cfg.learning_rate * (1.0 + tolerance));
      theta = next;
    }
  }
}

TEST_CASE("sgd step") {
  OptimConfig cfg;
  cfg.learning_rate = 0.5;
  const std::vector<double> theta{1.0, 2.0}, g{2.0, -4.0};
  CHECK(sgd_step(cfg, g, theta) == std::vector<double>{0.0, 4.0});
}

TEST_CASE("config validation") {
  OptimConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  auto bad = [](auto mutate) {
    OptimConfig c;
    mutate(c);
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  };
  bad([](OptimConfig& c) { c.learning_rate = 0.0; });
  bad([](OptimConfig& c) { c.steps = 0; });
  bad([](OptimConfig& c) { c.resample_size = 1; });
  bad([](OptimConfig& c) { c.latent_size = 1; });
  bad([](OptimConfig& c) { c.beta2 = 1.0; });
  bad([](OptimConfig& c) { c.restarts = {5, 0}; });
  bad([](OptimConfig& c) { c.restarts = {2, 3}; });
  CHECK(cfg.resolved_resample_size(5000) == 1024);
  CHECK(cfg.resolved_resample_size(200) == 200);
  CHECK(cfg.resolved_latent_size(200) == 200);
  cfg.latent_size = 16;
  CHECK(cfg.resolved_latent_size(200) == 16);
}

TEST_CASE("gaussian location converges to the data centre") {
  Rng rng(2);
  const auto measure = normal_data(2.0, 500, rng);
  const GaussianLocation sim(1);
  OptimConfig cfg;
  cfg.steps = 300;
  cfg.resample_size = cfg.latent_size = 128;
  const std::vector<double> init{0.0};
  const auto res = minimize_mmd(sim, measure, Kernel::gaussian(1.0), cfg, init, rng);
  CHECK(res.theta_hat.size() == 1);
  CHECK(res.steps_taken == 300);
  CHECK(std::abs(res.theta_hat[0] - 2.0) < 0.15);
  CHECK(std::isfinite(res.final_loss));
}

TEST_CASE("single repeated atom") {
  Rng rng(3);
  const GaussianLocation sim(1);
  const auto measure = WeightedMeasure::uniform(Points::scalars({-1.3, -1.3, -1.3}));
  OptimConfig cfg;
  cfg.steps = 400;
  cfg.resample_size = cfg.latent_size = 128;
  const std::vector<double> init{0.5};
  const auto res = minimize_mmd(sim, measure, Kernel::gaussian(1.0), cfg, init, rng);
  CHECK(std::abs(res.theta_hat[0] + 1.3) < 0.05);
}

TEST_CASE("weighted objective agrees with resampling") {
  Rng rng(4);
  const auto measure = normal_data(-1.0, 300, rng);
  double centre = 0.0;
  for (double x : measure.atoms().values()) centre += x / 300.0;
  const GaussianLocation sim(1);
  OptimConfig cfg;
  cfg.steps = 300;
  cfg.latent_size = 128;
  cfg.objective = Objective::Weighted;
  const std::vector<double> init{0.0};
  const auto res = minimize_mmd(sim, measure, Kernel::gaussian(1.0), cfg, init, rng);
  CHECK(std::abs(res.theta_hat[0] - centre) < 0.15);
}

TEST_CASE("g-and-k loss drops at least tenfold from the midpoint") {
  const GAndK sim;
  Rng rng(5);
  const auto measure = WeightedMeasure::uniform(sim.sample(kGnkTheta, 2048, rng));
  OptimConfig cfg;
  cfg.steps = 1000;
  cfg.resample_size = cfg.latent_size = 128;
  cfg.record_trace = true;
  const std::vector<double> init(4, 5.0);
  const auto res = minimize_mmd(sim, measure, Kernel::gaussian(0.15), cfg, init, rng);
  CHECK(res.trace.size() == 1000);
  CAPTURE(res.initial_loss);
  CAPTURE(res.final_loss);
  CHECK(res.final_loss * 10.0 <= res.initial_loss);
  double err = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    err += (res.theta_hat[i] - kGnkTheta[i]) * (res.theta_hat[i] - kGnkTheta[i]);
    scale += kGnkTheta[i] * kGnkTheta[i];
  }
  CHECK(err / scale < 0.05);
}

TEST_CASE("minimize_mmd is deterministic in its seed") {
  const GAndK sim;
  Rng data_rng(6);
  const auto measure = WeightedMeasure::uniform(sim.sample(kGnkTheta, 256, data_rng));
  OptimConfig cfg;
  cfg.steps = 50;
  cfg.resample_size = cfg.latent_size = 32;
  const std::vector<double> init(4, 5.0);
  Rng a(7), b(7);
  const auto ra = minimize_mmd(sim, measure, Kernel::gaussian(0.15), cfg, init, a);
  const auto rb = minimize_mmd(sim, measure, Kernel::gaussian(0.15), cfg, init, b);
  CHECK(ra.theta_hat == rb.theta_hat);
  CHECK(ra.final_loss == rb.final_loss);
}

TEST_CASE("projection keeps iterates inside the box") {
  Rng rng(8);
  const auto measure = normal_data(2.0, 200, rng);
  const GaussianLocation sim(1);
  OptimConfig cfg;
  cfg.steps = 200;
  cfg.resample_size = cfg.latent_size = 64;
  cfg.upper_bounds = {1.0};
  const std::vector<double> init{5.0};
  const auto res = minimize_mmd(sim, measure, Kernel::gaussian(1.0), cfg, init, rng);
  CHECK(res.theta_hat[0] == 1.0);
}

TEST_CASE("divergence reports the step") {
  Rng rng(9);
  const auto measure = normal_data(5.0, 100, rng);
  const Exploding sim;
  OptimConfig cfg;
  cfg.steps = 100;
  cfg.learning_rate = 0.3;
  cfg.resample_size = cfg.latent_size = 16;
  const std::vector<double> init{0.0};
  try {
    minimize_mmd(sim, measure, Kernel::gaussian(1.0), cfg, init, rng);
    FAIL("expected divergence");
  } catch (const DivergedError& e) {
    CHECK(e.step() >= 3);
    CHECK(e.step() <= 10);
  }
  const std::vector<double> wrong{0.0, 0.0};
  CHECK_THROWS_AS(minimize_mmd(sim, measure, Kernel::gaussian(1.0), cfg, wrong, rng),
                  std::invalid_argument);
}

TEST_CASE("random restarts with keep = 1 follow the best candidate") {
  const GAndK sim;
  Rng data_rng(10);
  const auto measure = WeightedMeasure::uniform(sim.sample(kGnkTheta, 256, data_rng));
  const Kernel kernel = Kernel::gaussian(0.15);
  OptimConfig cfg;
  cfg.steps = 30;
  cfg.resample_size = cfg.latent_size = 32;
  cfg.restarts = {20, 1};
  const auto prior = uniform_box_prior({0, 0, 0, -2}, {10, 10, 10, 2});

  Rng rng(11);
  const auto res = random_restart_minimize(sim, measure, kernel, cfg, prior, rng);

  Rng replay(11);
  std::vector<std::vector<double>> cands(20, std::vector<double>(4));
  for (auto& c : cands) prior(replay, c);
  const Points us = sim.sample_latents(32, replay);
  std::size_t best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const double s = mmd2_weighted(measure, sim.simulate_batch(cands[i], us), kernel);
    if (s < best_score) {
      best_score = s;
      best = i;
    }
  }
  OptimConfig plain = cfg;
  plain.restarts = {};
  const auto direct = minimize_mmd(sim, measure, kernel, plain, cands[best], replay);
  CHECK(res.theta_hat == direct.theta_hat);
  CHECK(res.final_loss == direct.final_loss);

  Rng again(11);
  CHECK(random_restart_minimize(sim, measure, kernel, cfg, prior, again).theta_hat ==
        res.theta_hat);
}

TEST_CASE("a prior concentrated at the truth stays there") {
  Rng rng(12);
  const auto measure = normal_data(2.0, 500, rng);
  const GaussianLocation sim(1);
  OptimConfig cfg;
  cfg.steps = 300;
  cfg.resample_size = cfg.latent_size = 128;
  cfg.restarts = {10, 3};
  const auto prior = uniform_box_prior({1.999}, {2.001});
  const auto res = random_restart_minimize(sim, measure, Kernel::gaussian(1.0), cfg, prior, rng);
  CHECK(std::abs(res.theta_hat[0] - 2.0) < 0.15);

  OptimConfig none = cfg;
  none.restarts = {};
  CHECK_THROWS_AS(random_restart_minimize(sim, measure, Kernel::gaussian(1.0), none, prior, rng),
                  std::invalid_argument);
  CHECK_THROWS_AS(uniform_box_prior({1.0}, {0.0}), std::invalid_argument);
}

TEST_CASE("all restarts failing raises a divergence error") {
  Rng rng(13);
  const auto measure = normal_data(5.0, 100, rng);
  const Exploding sim;
  OptimConfig cfg;
  cfg.steps = 100;
  cfg.learning_rate = 0.3;
  cfg.resample_size = cfg.latent_size = 16;
  cfg.restarts = {4, 2};
  const auto prior = uniform_box_prior({-0.5}, {0.5});
  CHECK_THROWS_AS(random_restart_minimize(sim, measure, Kernel::gaussian(1.0), cfg, prior, rng),
                  DivergedError);
}

TEST_CASE("median final loss falls below median initial loss") {
  struct Case {
    std::unique_ptr<Simulator> sim;
    std::vector<double> truth, init;
    Kernel kernel;
    double lr;
    std::size_t steps, batch;
    std::vector<double> lower;
  };
  std::vector<Case> cases;
  cases.push_back({std::make_unique<GaussianLocation>(4), {1, 1, 1, 1}, {0, 0, 0, 0},
                   Kernel::gaussian(2.0), 0.1, 200, 64, {}});
  cases.push_back({std::make_unique<GAndK>(), kGnkTheta, {5, 5, 5, 5}, Kernel::gaussian(0.15),
                   0.1, 200, 64, {}});
  // Start the toggle switch off the truth in the emission parameters.
  std::vector<double> toggle_init = kToggleTheta;
  toggle_init[4] = 345.0;
  toggle_init[5] = 0.35;
  cases.push_back({std::make_unique<ToggleSwitch>(), kToggleTheta, toggle_init,
                   Kernel::mixture({1, 10, 20, 40, 80, 100, 130, 200, 400, 800, 1000}), 0.04, 100,
                   32, std::vector<double>(7, 1e-6)});

  for (auto& c : cases) {
    std::vector<double> initial, final;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(split_seed(99, seed));
      const auto measure = WeightedMeasure::uniform(c.sim->sample(c.truth, 200, rng));
      OptimConfig cfg;
      cfg.learning_rate = c.lr;
      cfg.steps = c.steps;
      cfg.resample_size = cfg.latent_size = c.batch;
      cfg.record_trace = true;
      cfg.lower_bounds = c.lower;
      const auto res = minimize_mmd(*c.sim, measure, c.kernel, cfg, c.init, rng);
      initial.push_back(res.initial_loss);
      final.push_back(res.final_loss);
    }
    CAPTURE(c.sim->name());
    CAPTURE(median(initial));
    CAPTURE(median(final));
    CHECK(median(final) < median(initial));
  }
}
