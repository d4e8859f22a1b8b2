#include "nplmmd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "nplmmd/simulators.hpp"

namespace nplmmd {

namespace {

constexpr double kMinExpArg = -1000.0;

void require_same_dim(std::size_t a, std::size_t b, const char* where) {
  if (a != b)
    throw std::invalid_argument(std::string(where) + ": dimension mismatch (" + std::to_string(a) +
                                " vs " + std::to_string(b) + ")");
}

void require_at_least_two(const Points& p, const char* where) {
  if (p.size() < 2) throw std::invalid_argument(std::string(where) + ": need at least 2 points");
}

void require_no_nan(const Points& p, const char* where) {
  for (double x : p.values())
    if (std::isnan(x)) throw std::invalid_argument(std::string(where) + ": NaN coordinate");
}

}  // namespace

Kernel::Kernel(std::vector<double> lengthscales) : lengthscales_(std::move(lengthscales)) {
  if (lengthscales_.empty()) throw std::invalid_argument("Kernel: no lengthscales");
  for (double l : lengthscales_) {
    if (!(l > 0.0) || !std::isfinite(l))
      throw std::invalid_argument("Kernel: lengthscale must be positive and finite, got " +
                                  std::to_string(l));
    inv_sq_.push_back(1.0 / (l * l));
    half_inv_sq_.push_back(0.5 / (l * l));
  }
}

Kernel Kernel::gaussian(double lengthscale) { return Kernel({lengthscale}); }

Kernel Kernel::mixture(std::vector<double> lengthscales) { return Kernel(std::move(lengthscales)); }

Kernel::Terms Kernel::terms_from_sqdist(double sqdist) const noexcept {
  Terms t{0.0, 0.0};
  for (std::size_t c = 0; c < lengthscales_.size(); ++c) {
    const double e = std::exp(-sqdist * half_inv_sq_[c]);
    t.value += e;
    t.slope += e * inv_sq_[c];
  }
  return t;
}

double Kernel::operator()(std::span<const double> x, std::span<const double> y) const {
  require_same_dim(x.size(), y.size(), "kernel_eval");
  double r2 = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) r2 += (x[k] - y[k]) * (x[k] - y[k]);
  return terms_from_sqdist(r2).value;
}

void Kernel::gradient_first(std::span<const double> x, std::span<const double> y,
                            std::span<double> out) const {
  require_same_dim(x.size(), y.size(), "kernel_gradient");
  require_same_dim(x.size(), out.size(), "kernel_gradient");
  double r2 = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) r2 += (x[k] - y[k]) * (x[k] - y[k]);
  const double slope = terms_from_sqdist(r2).slope;
  for (std::size_t k = 0; k < x.size(); ++k) out[k] = slope == 0.0 ? 0.0 : -(x[k] - y[k]) * slope;
}

double median_heuristic(const Points& points) {
  const std::size_t n = points.size();
  if (n < 2) throw std::invalid_argument("median_heuristic: need at least 2 points");
  std::vector<double> d2;
  d2.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double r2 = 0.0;
      for (std::size_t k = 0; k < points.dim(); ++k) {
        const double diff = points[i][k] - points[j][k];
        r2 += diff * diff;
      }
      d2.push_back(r2);
    }
  // Lower median for an even number of pairs.
  const auto mid = d2.begin() + std::ptrdiff_t((d2.size() - 1) / 2);
  std::nth_element(d2.begin(), mid, d2.end());
  double med = *mid;
  if (d2.size() % 2 == 0) {
    const double upper = *std::min_element(mid + 1, d2.end());
    med = 0.5 * (med + upper);
  }
  if (!(med > 0.0))
    throw std::invalid_argument("median_heuristic: median pairwise distance is zero");
  return std::sqrt(med);
}

namespace detail {

void CompensatedSum::add(double x) noexcept {
  const double t = sum + x;
  if (std::abs(sum) >= std::abs(x))
    carry += (sum - t) + x;
  else
    carry += (x - t) + sum;
  sum = t;
}

namespace {

template <std::size_t D>
void squared_distances(const double* x, const double* ys, std::size_t count, double* r2) {
  for (std::size_t j = 0; j < count; ++j) {
    const double* y = ys + j * D;
    double acc = 0.0;
    for (std::size_t k = 0; k < D; ++k) {
      const double diff = x[k] - y[k];
      acc += diff * diff;
    }
    r2[j] = acc;
  }
}

void squared_distances(const double* x, const double* ys, std::size_t count, std::size_t dim,
                       double* r2) {
  switch (dim) {
    case 1: return squared_distances<1>(x, ys, count, r2);
    case 2: return squared_distances<2>(x, ys, count, r2);
    case 3: return squared_distances<3>(x, ys, count, r2);
    case 4: return squared_distances<4>(x, ys, count, r2);
    default: break;
  }
  for (std::size_t j = 0; j < count; ++j) {
    const double* y = ys + j * dim;
    double acc = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      const double diff = x[k] - y[k];
      acc += diff * diff;
    }
    r2[j] = acc;
  }
}

}  // namespace

void RowEvaluator::evaluate(const double* x, const double* ys, std::size_t count,
                            std::size_t dim, bool want_slopes) {
  count_ = count;
  if (sqdist_.size() < count) {
    sqdist_.resize(count);
    scratch_.resize(count);
    values_.resize(count);
    slopes_.resize(count);
  }
  double* r2 = sqdist_.data();
  squared_distances(x, ys, count, dim, r2);

  const auto& half = kernel_->half_inv_sq();
  const auto& inv = kernel_->inv_sq();
  double* vals = values_.data();
  double* slopes = slopes_.data();
  double* tmp = half.size() == 1 ? vals : scratch_.data();
  for (std::size_t c = 0; c < half.size(); ++c) {
    const double h = half[c];
    // A NaN distance (inf - inf between overflowed outputs) fails the
    // comparison and lands on the floor, so the pair contributes nothing.
    for (std::size_t j = 0; j < count; ++j) {
      const double a = -r2[j] * h;
      tmp[j] = a >= kMinExpArg ? a : kMinExpArg;
    }
    exp_inplace(tmp, count);
    if (c == 0) {
      if (tmp != vals) std::copy(tmp, tmp + count, vals);
      if (want_slopes)
        for (std::size_t j = 0; j < count; ++j) slopes[j] = tmp[j] * inv[c];
    } else {
      for (std::size_t j = 0; j < count; ++j) vals[j] += tmp[j];
      if (want_slopes)
        for (std::size_t j = 0; j < count; ++j) slopes[j] += tmp[j] * inv[c];
    }
  }
}

double offdiagonal_sum(const Points& xs, const Kernel& kernel) {
  RowEvaluator rows(kernel);
  CompensatedSum total;
  const std::size_t n = xs.size();
  const std::size_t d = xs.dim();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    rows.evaluate(xs[i].data(), xs[i + 1].data(), n - i - 1, d, false);
    CompensatedSum row;
    for (double v : rows.values()) row.add(v);
    total.add(row.value());
  }
  return 2.0 * total.value();
}

double cross_sum(const Points& xs, const Points& ys, const Kernel& kernel) {
  RowEvaluator rows(kernel);
  CompensatedSum total;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    rows.evaluate(xs[i].data(), ys.data(), ys.size(), ys.dim(), false);
    CompensatedSum row;
    for (double v : rows.values()) row.add(v);
    total.add(row.value());
  }
  return total.value();
}

double weighted_self_term(const WeightedMeasure& measure, const Kernel& kernel) {
  const Points& z = measure.atoms();
  const auto& w = measure.weights();
  RowEvaluator rows(kernel);
  CompensatedSum total;
  const std::size_t n = z.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (w[i] == 0.0) continue;
    CompensatedSum row;
    if (i + 1 < n) {
      rows.evaluate(z[i].data(), z[i + 1].data(), n - i - 1, z.dim(), false);
      const auto vals = rows.values();
      for (std::size_t j = 0; j < vals.size(); ++j) row.add(w[i + 1 + j] * vals[j]);
    }
    total.add(w[i] * (2.0 * row.value() + w[i] * kernel.bound()));
  }
  return total.value();
}

double mmd2_weighted_with_self(const WeightedMeasure& measure, double self_term, const Points& ys,
                               const Kernel& kernel) {
  const Points& z = measure.atoms();
  const auto& w = measure.weights();
  const double m = double(ys.size());
  RowEvaluator rows(kernel);
  CompensatedSum cross;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (w[i] == 0.0) continue;
    rows.evaluate(z[i].data(), ys.data(), ys.size(), ys.dim(), false);
    CompensatedSum row;
    for (double v : rows.values()) row.add(v);
    cross.add(w[i] * row.value());
  }
  return self_term - 2.0 / m * cross.value() + offdiagonal_sum(ys, kernel) / (m * (m - 1.0));
}

void simulate_with_jacobians(const Simulator& simulator, std::span<const double> theta,
                             const Points& us, ModelSample& out) {
  const std::size_t m = us.size();
  const std::size_t q = simulator.output_dim();
  const std::size_t p = simulator.param_dim();
  if (out.outputs.dim() != q) out.outputs = Points(q);
  out.outputs.resize(m);
  out.param_dim = p;
  out.jacobians.resize(m * q * p);
  for (std::size_t j = 0; j < m; ++j) {
    simulator.simulate_with_jacobian(theta, us[j], out.outputs[j],
                                     std::span<double>(out.jacobians.data() + j * q * p, q * p));
    for (double v : out.outputs[j])
      if (std::isnan(v)) throw std::domain_error("simulator produced NaN output");
  }
}

namespace {

// grad = sum_j J_j^T c_j, skipping samples with no kernel contact.
void contract_jacobians(const ModelSample& model, std::span<const double> coeffs,
                        std::span<double> grad) {
  const std::size_t q = model.outputs.dim();
  const std::size_t p = model.param_dim;
  std::fill(grad.begin(), grad.end(), 0.0);
  for (std::size_t j = 0; j < model.outputs.size(); ++j) {
    const double* c = coeffs.data() + j * q;
    bool touched = false;
    for (std::size_t r = 0; r < q; ++r) touched = touched || c[r] != 0.0;
    if (!touched) continue;
    const auto jac = model.jacobian(j);
    for (std::size_t r = 0; r < q; ++r) {
      if (c[r] == 0.0) continue;
      for (std::size_t col = 0; col < p; ++col) grad[col] += jac[r * p + col] * c[r];
    }
  }
}

// coeffs_j += scale * sum_i w_i slope_ij (x_j - y_i) over a row of slopes.
// Zero slopes are masked out so that an infinite difference cannot give NaN.
void accumulate_cross(const double* x, const double* ys, std::span<const double> slopes,
                      std::span<const double> weights, std::size_t dim, double scale,
                      double* coeff) {
  const std::size_t n = slopes.size();
  const double* w = weights.empty() ? nullptr : weights.data();
  for (std::size_t k = 0; k < dim; ++k) {
    const double xk = x[k];
    double lane[4] = {0.0, 0.0, 0.0, 0.0};
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
      for (std::size_t l = 0; l < 4; ++l) {
        const double s = w ? w[i + l] * slopes[i + l] : slopes[i + l];
        const double t = s * (xk - ys[(i + l) * dim + k]);
        lane[l] += s == 0.0 ? 0.0 : t;
      }
    for (; i < n; ++i) {
      const double s = w ? w[i] * slopes[i] : slopes[i];
      const double t = s * (xk - ys[i * dim + k]);
      lane[0] += s == 0.0 ? 0.0 : t;
    }
    coeff[k] += scale * ((lane[0] + lane[1]) + (lane[2] + lane[3]));
  }
}

// Model-model term over unordered pairs: grad_1 k(a, b) = -grad_1 k(b, a).
void accumulate_self(const ModelSample& model, GradientWorkspace& ws, double scale,
                     double* self_sum) {
  const Points& g = model.outputs;
  const std::size_t m = g.size();
  const std::size_t q = g.dim();
  CompensatedSum total;
  for (std::size_t j = 0; j + 1 < m; ++j) {
    const double* a = g[j].data();
    const double* rest = g[j + 1].data();
    const std::size_t count = m - j - 1;
    ws.rows.evaluate(a, rest, count, q, true);
    const auto slopes = ws.rows.slopes();
    accumulate_cross(a, rest, slopes, {}, q, -scale, ws.coeffs.data() + j * q);
    double* tail = ws.coeffs.data() + (j + 1) * q;
    for (std::size_t jj = 0; jj < count; ++jj) {
      const double s = scale * slopes[jj];
      for (std::size_t k = 0; k < q; ++k) {
        const double t = s * (a[k] - rest[jj * q + k]);
        tail[jj * q + k] += s == 0.0 ? 0.0 : t;
      }
    }
    if (self_sum) {
      CompensatedSum row;
      for (double v : ws.rows.values()) row.add(v);
      total.add(row.value());
    }
  }
  if (self_sum) *self_sum = 2.0 * total.value();
}

}  // namespace

void mmd2_gradient(const ModelSample& model, const Points& ys, const Kernel& kernel,
                   GradientWorkspace& ws, std::span<double> grad, double* loss) {
  (void)kernel;
  const std::size_t m = model.outputs.size();
  const std::size_t n = ys.size();
  const std::size_t q = model.outputs.dim();
  ws.coeffs.assign(m * q, 0.0);
  const double self_scale = 2.0 / (double(m) * double(m - 1));
  const double cross_scale = 2.0 / (double(n) * double(m));

  double self_sum = 0.0;
  accumulate_self(model, ws, self_scale, loss ? &self_sum : nullptr);

  CompensatedSum cross;
  for (std::size_t j = 0; j < m; ++j) {
    ws.rows.evaluate(model.outputs[j].data(), ys.data(), n, q, true);
    accumulate_cross(model.outputs[j].data(), ys.data(), ws.rows.slopes(), {}, q, cross_scale,
                     ws.coeffs.data() + j * q);
    if (loss) {
      CompensatedSum row;
      for (double v : ws.rows.values()) row.add(v);
      cross.add(row.value());
    }
  }
  contract_jacobians(model, ws.coeffs, grad);
  if (loss)
    *loss = self_sum / (double(m) * double(m - 1)) - 2.0 * cross.value() / (double(n) * double(m));
}

void mmd2_gradient_weighted(const ModelSample& model, const WeightedMeasure& measure,
                            const Kernel& kernel, GradientWorkspace& ws,
                            std::span<double> grad) {
  (void)kernel;
  const std::size_t m = model.outputs.size();
  const std::size_t q = model.outputs.dim();
  ws.coeffs.assign(m * q, 0.0);
  accumulate_self(model, ws, 2.0 / (double(m) * double(m - 1)), nullptr);
  const Points& z = measure.atoms();
  for (std::size_t j = 0; j < m; ++j) {
    ws.rows.evaluate(model.outputs[j].data(), z.data(), z.size(), q, true);
    accumulate_cross(model.outputs[j].data(), z.data(), ws.rows.slopes(), measure.weights(), q,
                     2.0 / double(m), ws.coeffs.data() + j * q);
  }
  contract_jacobians(model, ws.coeffs, grad);
}

}  // namespace detail

double mmd2_u(const Points& xs, const Points& ys, const Kernel& kernel) {
  require_at_least_two(xs, "mmd2_u");
  require_at_least_two(ys, "mmd2_u");
  require_same_dim(xs.dim(), ys.dim(), "mmd2_u");
  require_no_nan(xs, "mmd2_u");
  require_no_nan(ys, "mmd2_u");
  const double n = double(xs.size());
  const double m = double(ys.size());
  return detail::offdiagonal_sum(xs, kernel) / (n * (n - 1.0)) -
         2.0 * detail::cross_sum(xs, ys, kernel) / (n * m) +
         detail::offdiagonal_sum(ys, kernel) / (m * (m - 1.0));
}

double mmd2_weighted(const WeightedMeasure& measure, const Points& ys, const Kernel& kernel) {
  require_at_least_two(ys, "mmd2_weighted");
  require_same_dim(measure.dim(), ys.dim(), "mmd2_weighted");
  require_no_nan(ys, "mmd2_weighted");
  return detail::mmd2_weighted_with_self(measure, detail::weighted_self_term(measure, kernel), ys,
                                         kernel);
}

double mmd2_weighted_pair(const WeightedMeasure& a, const WeightedMeasure& b,
                          const Kernel& kernel) {
  require_same_dim(a.dim(), b.dim(), "mmd2_weighted_pair");
  detail::RowEvaluator rows(kernel);
  detail::CompensatedSum cross;
  for (std::size_t i = 0; i < a.size(); ++i) {
    rows.evaluate(a.atoms()[i].data(), b.atoms().data(), b.size(), b.dim(), false);
    detail::CompensatedSum row;
    const auto vals = rows.values();
    for (std::size_t j = 0; j < vals.size(); ++j) row.add(b.weights()[j] * vals[j]);
    cross.add(a.weights()[i] * row.value());
  }
  return detail::weighted_self_term(a, kernel) + detail::weighted_self_term(b, kernel) -
         2.0 * cross.value();
}

std::vector<double> mmd2_grad_u(std::span<const double> theta, const Points& us, const Points& ys,
                                const Simulator& simulator, const Kernel& kernel) {
  if (us.size() < 2) throw std::invalid_argument("mmd2_grad_u: need M >= 2 latents");
  if (ys.empty()) throw std::invalid_argument("mmd2_grad_u: need N >= 1 data points");
  require_same_dim(ys.dim(), simulator.output_dim(), "mmd2_grad_u");
  detail::ModelSample model;
  detail::simulate_with_jacobians(simulator, theta, us, model);
  detail::GradientWorkspace ws(kernel);
  std::vector<double> grad(simulator.param_dim());
  detail::mmd2_gradient(model, ys, kernel, ws, grad);
  return grad;
}

}  // namespace nplmmd
