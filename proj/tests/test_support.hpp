#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

/// Running mean and standard error of a Monte Carlo estimand.
struct MeanSE {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t count = 0;

  void add(double x) {
    sum += x;
    sum_sq += x * x;
    ++count;
  }
  double mean() const { return sum / double(count); }
  double se() const {
    const double m = mean();
    const double var = (sum_sq - double(count) * m * m) / double(count - 1);
    return std::sqrt(var / double(count));
  }
  bool within(double target, double k = 3.0) const { return std::abs(mean() - target) <= k * se(); }
};

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double norm2(const std::vector<double>& a) {
  double s = 0.0;
  for (double x : a) s += x * x;
  return std::sqrt(s);
}

/// |a - b| / |b| over whole vectors, with a small absolute floor.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b,
                             double floor = 1e-12) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return norm2(d) / std::max(norm2(b), floor);
}
