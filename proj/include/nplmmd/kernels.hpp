#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nplmmd/measures.hpp"
#include "nplmmd/points.hpp"

namespace nplmmd {

/// Gaussian kernel exp(-|x - y|^2 / (2 l^2)), or an unweighted sum of such
/// kernels over several lengthscales. The sum is not normalised, so its
/// bound is the number of components.
class Kernel {
 public:
  static Kernel gaussian(double lengthscale);
  static Kernel mixture(std::vector<double> lengthscales);

  const std::vector<double>& lengthscales() const noexcept { return lengthscales_; }
  std::size_t components() const noexcept { return lengthscales_.size(); }
  bool is_mixture() const noexcept { return lengthscales_.size() > 1; }
  /// sup |k(x, y)|.
  double bound() const noexcept { return double(lengthscales_.size()); }

  double operator()(std::span<const double> x, std::span<const double> y) const;

  /// Gradient in the first argument, written to `out` (size dim).
  void gradient_first(std::span<const double> x, std::span<const double> y,
                      std::span<double> out) const;

  /// k and the scalar c with grad_1 k(x, y) = -c (x - y), from |x - y|^2.
  struct Terms {
    double value;
    double slope;
  };
  Terms terms_from_sqdist(double sqdist) const noexcept;

  // Component c contributes exp(-sqdist * half_inv_sq()[c]) to the value and
  // that term times inv_sq()[c] to the slope.
  const std::vector<double>& half_inv_sq() const noexcept { return half_inv_sq_; }
  const std::vector<double>& inv_sq() const noexcept { return inv_sq_; }

 private:
  explicit Kernel(std::vector<double> lengthscales);
  std::vector<double> lengthscales_;
  std::vector<double> half_inv_sq_;
  std::vector<double> inv_sq_;
};

/// sqrt(median{|x_i - x_j|^2 : i < j}). Throws when fewer than two points or
/// when every pair coincides.
double median_heuristic(const Points& points);

/// Unbiased U-statistic estimate of MMD^2 between the laws of xs and ys.
double mmd2_u(const Points& xs, const Points& ys, const Kernel& kernel);

/// MMD^2 between a weighted measure (exact V-form over its atoms) and a
/// sample ys (U-form).
double mmd2_weighted(const WeightedMeasure& measure, const Points& ys, const Kernel& kernel);

/// MMD^2 between two weighted measures; a squared RKHS norm, hence >= 0.
double mmd2_weighted_pair(const WeightedMeasure& a, const WeightedMeasure& b,
                          const Kernel& kernel);

class Simulator;

/// U-statistic estimate of grad_theta MMD^2(P, P_theta) from latents `us`
/// (M >= 2) and a sample `ys` (N >= 1) of P.
std::vector<double> mmd2_grad_u(std::span<const double> theta, const Points& us,
                                const Points& ys, const Simulator& simulator,
                                const Kernel& kernel);

namespace detail {

/// Pairwise sums over one "row" point against a block of points. Kept in a
/// small workspace object so the hot loops do not allocate.
class RowEvaluator {
 public:
  explicit RowEvaluator(const Kernel& kernel) : kernel_(&kernel) {}

  /// Fills values()[j] = k(x, ys_j) and slopes()[j] for j in [begin, end).
  void evaluate(const double* x, const double* ys, std::size_t count, std::size_t dim,
                bool want_slopes);

  std::span<const double> values() const noexcept { return {values_.data(), count_}; }
  std::span<const double> slopes() const noexcept { return {slopes_.data(), count_}; }

 private:
  const Kernel* kernel_;
  std::size_t count_ = 0;
  std::vector<double> sqdist_, scratch_, values_, slopes_;
};

/// Sum of k(x_i, x_j) over ordered pairs i != j.
double offdiagonal_sum(const Points& xs, const Kernel& kernel);
/// Sum over all (i, j) of k(x_i, y_j).
double cross_sum(const Points& xs, const Points& ys, const Kernel& kernel);

/// Neumaier compensated summation.
struct CompensatedSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double x) noexcept;
  double value() const noexcept { return sum + carry; }
};

/// exp() applied in place; built as a separate vectorised unit.
void exp_inplace(double* values, std::size_t count) noexcept;

/// Model outputs G_theta(u_j) with their Jacobians (param_dim columns each).
struct ModelSample {
  Points outputs;
  std::vector<double> jacobians;
  std::size_t param_dim = 0;

  std::span<const double> jacobian(std::size_t j) const noexcept {
    const std::size_t block = outputs.dim() * param_dim;
    return {jacobians.data() + j * block, block};
  }
};

/// Fills `out` from one latent batch. Throws std::domain_error on NaN output.
void simulate_with_jacobians(const Simulator& simulator, std::span<const double> theta,
                             const Points& us, ModelSample& out);

/// Reusable buffers for the gradient estimators.
struct GradientWorkspace {
  explicit GradientWorkspace(const Kernel& kernel) : rows(kernel) {}
  RowEvaluator rows;
  std::vector<double> coeffs;
};

/// U-statistic gradient of MMD^2 between a sample ys and the model sample.
/// When `loss` is non-null it receives the theta-dependent part of the
/// U-statistic (model-model minus twice model-data).
void mmd2_gradient(const ModelSample& model, const Points& ys, const Kernel& kernel,
                   GradientWorkspace& ws, std::span<double> grad, double* loss = nullptr);

/// Gradient of the exact weighted objective against all atoms of a measure.
void mmd2_gradient_weighted(const ModelSample& model, const WeightedMeasure& measure,
                            const Kernel& kernel, GradientWorkspace& ws,
                            std::span<double> grad);

/// theta-independent part of mmd2_weighted: sum_{i,i'} w_i w_i' k(z_i, z_i').
double weighted_self_term(const WeightedMeasure& measure, const Kernel& kernel);

/// mmd2_weighted given a precomputed weighted_self_term.
double mmd2_weighted_with_self(const WeightedMeasure& measure, double self_term,
                               const Points& ys, const Kernel& kernel);

}  // namespace detail

}  // namespace nplmmd
