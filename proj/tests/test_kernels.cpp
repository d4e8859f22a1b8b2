#include <doctest.h>

#include <cmath>

#include "nplmmd/kernels.hpp"
#include "nplmmd/simulators.hpp"
#include "test_support.hpp"

using namespace nplmmd;

namespace {

const std::vector<double> kToggleScales{1, 10, 20, 40, 80, 100, 130, 200, 400, 800, 1000};

Points random_points(std::size_t count, std::size_t dim, Rng& rng, double spread = 1.0) {
  Points p(dim, count);
  for (std::size_t i = 0; i < count; ++i)
    for (double& x : p[i]) x = spread * standard_normal(rng);
  return p;
}

WeightedMeasure random_measure(std::size_t count, std::size_t dim, Rng& rng) {
  std::vector<double> w(count);
  double s = 0.0;
  for (double& x : w) s += (x = uniform01(rng) + 1e-3);
  for (double& x : w) x /= s;
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < count; ++i) total += w[i];
  w.back() = 1.0 - total;
  return WeightedMeasure(random_points(count, dim, rng), w);
}

// Central-difference gradient of mmd2_u(G_theta(us), ys) with common latents.
std::vector<double> fd_gradient(const Simulator& sim, std::vector<double> theta, const Points& us,
                                const Points& ys, const Kernel& kernel, double h = 1e-5) {
  std::vector<double> g(theta.size());
  for (std::size_t k = 0; k < theta.size(); ++k) {
    const double t = theta[k];
    theta[k] = t + h;
    const double up = mmd2_u(sim.simulate_batch(theta, us), ys, kernel);
    theta[k] = t - h;
    const double down = mmd2_u(sim.simulate_batch(theta, us), ys, kernel);
    theta[k] = t;
    g[k] = (up - down) / (2.0 * h);
  }
  return g;
}

}  // namespace

TEST_CASE("kernel evaluation examples") {
  const Kernel k = Kernel::gaussian(std::sqrt(2.0));
  const std::vector<double> zero{0.0}, two{2.0};
  CHECK(k(zero, zero) == 1.0);
  CHECK(k(zero, two) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  const Kernel mix = Kernel::mixture(kToggleScales);
  CHECK(mix(two, two) == 11.0);
  CHECK(mix.bound() == 11.0);
  CHECK(k.bound() == 1.0);
  const std::vector<double> pair{0.0, 1.0};
  CHECK_THROWS_AS(k(zero, pair), std::invalid_argument);
  CHECK_THROWS_AS(Kernel::gaussian(0.0), std::invalid_argument);
  CHECK_THROWS_AS(Kernel::gaussian(-1.0), std::invalid_argument);
  CHECK_THROWS_AS(Kernel::mixture({}), std::invalid_argument);
  CHECK_THROWS_AS(Kernel::mixture({1.0, std::nan("")}), std::invalid_argument);
}

TEST_CASE("kernel symmetry and bounds on random pairs") {
  Rng rng(1);
  const Kernel k = Kernel::gaussian(0.7);
  const Kernel mix = Kernel::mixture({0.5, 2.0, 9.0});
  for (int rep = 0; rep < 1000; ++rep) {
    const Points p = random_points(2, 3, rng, 2.0);
    const double a = k(p[0], p[1]);
    CHECK(a == k(p[1], p[0]));
    CHECK(a > 0.0);
    CHECK(a <= 1.0);
    const double b = mix(p[0], p[1]);
    CHECK(b == mix(p[1], p[0]));
    CHECK(b > 0.0);
    CHECK(b <= 3.0);
  }
}

TEST_CASE("kernel gradient matches finite differences") {
  Rng rng(2);
  const Kernel mix = Kernel::mixture({0.5, 2.0});
  for (int rep = 0; rep < 100; ++rep) {
    Points p = random_points(2, 3, rng);
    std::vector<double> g(3), fd(3);
    mix.gradient_first(p[0], p[1], g);
    std::vector<double> x(p[0].begin(), p[0].end());
    for (std::size_t k = 0; k < 3; ++k) {
      const double t = x[k];
      x[k] = t + 1e-6;
      const double up = mix(x, p[1]);
      x[k] = t - 1e-6;
      const double down = mix(x, p[1]);
      x[k] = t;
      fd[k] = (up - down) / 2e-6;
    }
    CHECK(relative_error(g, fd, 1e-8) < 1e-6);
  }
}

TEST_CASE("median heuristic") {
  CHECK(median_heuristic(Points::scalars({0.0, 1.0})) == 1.0);
  CHECK(median_heuristic(Points::scalars({0.0, 1.0, 3.0})) == doctest::Approx(2.0));
  CHECK_THROWS_AS(median_heuristic(Points::scalars({2.0, 2.0, 2.0})), std::invalid_argument);
  CHECK_THROWS_AS(median_heuristic(Points::scalars({2.0})), std::invalid_argument);
  // Squared distances 1, 4, 9, 16, 36, 49: mean of the middle two.
  CHECK(median_heuristic(Points::scalars({0.0, 1.0, 3.0, 7.0})) == doctest::Approx(std::sqrt(12.5)));
}

TEST_CASE("mmd2_u hand examples") {
  const Kernel k = Kernel::gaussian(std::sqrt(2.0));
  CHECK(mmd2_u(Points::scalars({0, 0}), Points::scalars({0, 0}), k) == doctest::Approx(0.0));
  CHECK(mmd2_u(Points::scalars({0, 2}), Points::scalars({0, 2}), k) ==
        doctest::Approx(std::exp(-1.0) - 1.0).epsilon(1e-14));
  CHECK_THROWS_AS(mmd2_u(Points::scalars({0}), Points::scalars({0, 2}), k), std::invalid_argument);
  CHECK_THROWS_AS(mmd2_u(Points::scalars({0, 1}), Points(2, 3), k), std::invalid_argument);
  CHECK_THROWS_AS(mmd2_u(Points::scalars({0, std::nan("")}), Points::scalars({0, 2}), k),
                  std::invalid_argument);
}

TEST_CASE("mmd2_u is unbiased against the Gaussian closed form") {
  const double l = 1.0;
  const Kernel k = Kernel::gaussian(l);
  // E k for independent N(m, 1), N(m', 1) draws in one dimension.
  auto expected_k = [&](double dm) {
    return l / std::sqrt(l * l + 2.0) * std::exp(-dm * dm / (2.0 * (l * l + 2.0)));
  };
  const double truth = 2.0 * expected_k(0.0) - 2.0 * expected_k(1.0);
  Rng rng(3);
  MeanSE est;
  for (int rep = 0; rep < 50; ++rep) {
    Points xs(1, 2000), ys(1, 2000);
    for (std::size_t i = 0; i < 2000; ++i) {
      xs[i][0] = standard_normal(rng);
      ys[i][0] = 1.0 + standard_normal(rng);
    }
    est.add(mmd2_u(xs, ys, k));
  }
  CHECK(est.within(truth));
}

TEST_CASE("mmd2_weighted examples") {
  const Kernel k = Kernel::gaussian(1.0);
  const WeightedMeasure one(Points::scalars({0.5}), {1.0});
  CHECK(mmd2_weighted(one, Points::scalars({0.5, 0.5}), k) == doctest::Approx(0.0));

  Rng rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    const Points xs = random_points(5, 2, rng);
    const Points ys = random_points(5, 2, rng);
    double v = 0.0, cross = 0.0, u = 0.0;
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j) {
        v += k(xs[i], xs[j]) / 25.0;
        cross += k(xs[i], ys[j]) / 25.0;
        if (i != j) u += k(ys[i], ys[j]) / 20.0;
      }
    CHECK(mmd2_weighted(WeightedMeasure::uniform(xs), ys, k) ==
          doctest::Approx(v - 2.0 * cross + u).epsilon(1e-12));
  }
}

TEST_CASE("weighted MMD between weighted measures is non-negative") {
  Rng rng(5);
  const Kernel k = Kernel::gaussian(0.8);
  const Kernel mix = Kernel::mixture({0.3, 3.0});
  std::uniform_int_distribution<int> size(1, 12);
  for (int rep = 0; rep < 1000; ++rep) {
    const auto a = random_measure(size(rng), 2, rng);
    const auto b = random_measure(size(rng), 2, rng);
    CHECK(mmd2_weighted_pair(a, b, k) >= -1e-12);
    CHECK(mmd2_weighted_pair(a, b, mix) >= -1e-12);
  }
  const auto a = random_measure(6, 2, rng);
  CHECK(mmd2_weighted_pair(a, a, k) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("mmd2_grad_u symmetry and sign") {
  const GaussianLocation sim(1);
  const Kernel k = Kernel::gaussian(1.0);
  const double theta = 0.7, c = 0.4;
  const std::vector<double> th{theta};
  const auto g = mmd2_grad_u(th, Points::scalars({-c, c}), Points::scalars({theta - c, theta + c}),
                             sim, k);
  CHECK(std::abs(g[0]) < 1e-15);

  const std::vector<double> far{5.0};
  const auto g2 = mmd2_grad_u(far, Points::scalars({-0.3, 0.1, 0.5}),
                              Points::scalars({-1.0, 0.0, 1.0}), sim, k);
  CHECK(g2[0] > 0.0);

  CHECK_THROWS_AS(mmd2_grad_u(th, Points::scalars({0.0}), Points::scalars({0.0}), sim, k),
                  std::invalid_argument);
}

TEST_CASE("mmd2_grad_u matches finite differences for every simulator") {
  Rng rng(6);
  SUBCASE("gaussian location") {
    const GaussianLocation sim(3);
    const Kernel k = Kernel::gaussian(1.5);
    for (int rep = 0; rep < 100; ++rep) {
      std::vector<double> th(3);
      for (double& x : th) x = standard_normal(rng);
      const Points us = sim.sample_latents(6, rng);
      const Points ys = random_points(5, 3, rng);
      const auto g = mmd2_grad_u(th, us, ys, sim, k);
      CHECK(relative_error(g, fd_gradient(sim, th, us, ys, k), 1e-8) <= 1e-4);
    }
  }
  SUBCASE("g-and-k") {
    const GAndK sim;
    const Kernel k = Kernel::gaussian(1.0);
    for (int rep = 0; rep < 100; ++rep) {
      std::vector<double> th{3.0 + standard_normal(rng), 0.5 + uniform01(rng),
                             2.0 * uniform01(rng) - 1.0, -1.5 + uniform01(rng)};
      const Points us = sim.sample_latents(6, rng);
      const std::vector<double> th0{3.0, 1.0, 1.0, -std::log(2.0)};
      const Points ys = sim.sample(th0, 5, rng);
      const auto g = mmd2_grad_u(th, us, ys, sim, k);
      CHECK(relative_error(g, fd_gradient(sim, th, us, ys, k), 1e-8) <= 1e-4);
    }
  }
  SUBCASE("toggle switch") {
    const ToggleSwitch sim;
    const Kernel k = Kernel::mixture({40.0, 200.0});
    const std::vector<double> th0{22, 12, 4, 4.5, 325, 0.25, 0.15};
    const Points ys = sim.sample(th0, 5, rng);
    for (int rep = 0; rep < 100; ++rep) {
      std::vector<double> th = th0;
      for (double& x : th) x *= 0.9 + 0.2 * uniform01(rng);
      const Points us = sim.sample_latents(4, rng);
      const auto g = mmd2_grad_u(th, us, ys, sim, k);
      CHECK(relative_error(g, fd_gradient(sim, th, us, ys, k), 1e-8) <= 1e-4);
    }
  }
}

TEST_CASE("gradient internals agree with the public estimators") {
  Rng rng(7);
  const GAndK sim;
  const Kernel k = Kernel::mixture({0.5, 2.0});
  const std::vector<double> th{3.0, 1.0, 1.0, -0.7};
  const Points us = sim.sample_latents(9, rng);
  const Points ys = sim.sample(th, 7, rng);

  detail::ModelSample model;
  detail::simulate_with_jacobians(sim, th, us, model);
  detail::GradientWorkspace ws(k);
  std::vector<double> grad(4);
  double partial = 0.0;
  detail::mmd2_gradient(model, ys, k, ws, grad, &partial);
  const double full = partial + detail::offdiagonal_sum(ys, k) / (7.0 * 6.0);
  CHECK(full == doctest::Approx(mmd2_u(model.outputs, ys, k)).epsilon(1e-12));
  CHECK(max_abs_diff(grad, mmd2_grad_u(th, us, ys, sim, k)) == 0.0);

  // Weighted objective: gradient of mmd2_weighted under common latents.
  const auto measure = random_measure(6, 1, rng);
  detail::mmd2_gradient_weighted(model, measure, k, ws, grad);
  std::vector<double> fd(4), t = th;
  for (std::size_t i = 0; i < 4; ++i) {
    t[i] = th[i] + 1e-5;
    const double up = mmd2_weighted(measure, sim.simulate_batch(t, us), k);
    t[i] = th[i] - 1e-5;
    const double down = mmd2_weighted(measure, sim.simulate_batch(t, us), k);
    t[i] = th[i];
    fd[i] = (up - down) / 2e-5;
  }
  CHECK(relative_error(grad, fd, 1e-8) <= 1e-4);

  const double self = detail::weighted_self_term(measure, k);
  CHECK(detail::mmd2_weighted_with_self(measure, self, ys, k) ==
        doctest::Approx(mmd2_weighted(measure, ys, k)));
}

TEST_CASE("overflowed model outputs contribute nothing") {
  const Kernel k = Kernel::gaussian(1.0);
  const double inf = std::numeric_limits<double>::infinity();
  const Points xs = Points::scalars({inf, inf, 0.0});
  const Points ys = Points::scalars({0.0, 1.0});
  const double v = mmd2_u(xs, ys, k);
  CHECK(std::isfinite(v));
}
