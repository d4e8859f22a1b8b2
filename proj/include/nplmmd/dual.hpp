#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nplmmd {

/// Thrown when an elementary function is evaluated outside its domain.
class DomainError : public std::invalid_argument {
 public:
  DomainError(const std::string& function, double value)
      : std::invalid_argument(function + ": argument " + std::to_string(value) +
                              " outside domain"),
        value_(value) {}
  double value() const noexcept { return value_; }

 private:
  double value_;
};

/// Forward-mode dual number with up to kMaxTangents partial derivatives.
///
/// A dual of width 0 is a constant and combines with any width; two
/// non-constant duals must share the same width.
class Dual {
 public:
  static constexpr std::size_t kMaxTangents = 8;

  constexpr Dual() = default;
  constexpr Dual(double value) : value_(value) {}  // NOLINT: implicit constant

  static Dual variable(double value, std::size_t width, std::size_t index) {
    check_width(width);
    if (index >= width) throw std::invalid_argument("Dual::variable: index out of range");
    Dual d(value);
    d.width_ = width;
    d.partials_[index] = 1.0;
    return d;
  }

  double value() const noexcept { return value_; }
  std::size_t width() const noexcept { return width_; }
  double partial(std::size_t i) const noexcept { return i < width_ ? partials_[i] : 0.0; }
  std::span<const double> partials() const noexcept { return {partials_.data(), width_}; }

  /// Same partials, new value, scaled by the local derivative.
  Dual chain(double new_value, double derivative) const noexcept {
    Dual r(new_value);
    r.width_ = width_;
    for (std::size_t i = 0; i < width_; ++i) r.partials_[i] = derivative * partials_[i];
    return r;
  }

  Dual& operator+=(const Dual& o) {
    const std::size_t w = joint_width(*this, o);
    value_ += o.value_;
    for (std::size_t i = 0; i < w; ++i) partials_[i] += o.partials_[i];
    width_ = w;
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    const std::size_t w = joint_width(*this, o);
    value_ -= o.value_;
    for (std::size_t i = 0; i < w; ++i) partials_[i] -= o.partials_[i];
    width_ = w;
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    const std::size_t w = joint_width(*this, o);
    for (std::size_t i = 0; i < w; ++i)
      partials_[i] = partials_[i] * o.value_ + value_ * o.partials_[i];
    value_ *= o.value_;
    width_ = w;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    const std::size_t w = joint_width(*this, o);
    const double q = value_ / o.value_;
    for (std::size_t i = 0; i < w; ++i)
      partials_[i] = (partials_[i] - q * o.partials_[i]) / o.value_;
    value_ = q;
    width_ = w;
    return *this;
  }

  friend Dual operator+(Dual a, const Dual& b) { return a += b; }
  friend Dual operator-(Dual a, const Dual& b) { return a -= b; }
  friend Dual operator*(Dual a, const Dual& b) { return a *= b; }
  friend Dual operator/(Dual a, const Dual& b) { return a /= b; }
  friend Dual operator-(const Dual& a) { return a.chain(-a.value_, -1.0); }

  friend bool operator<(const Dual& a, const Dual& b) noexcept { return a.value_ < b.value_; }

 private:
  static void check_width(std::size_t width) {
    if (width > kMaxTangents)
      throw std::invalid_argument("Dual: tangent width " + std::to_string(width) +
                                  " exceeds the supported maximum");
  }
  static std::size_t joint_width(const Dual& a, const Dual& b) {
    if (a.width_ == b.width_ || b.width_ == 0) return a.width_;
    if (a.width_ == 0) return b.width_;
    throw std::invalid_argument("Dual: mixing tangent widths " + std::to_string(a.width_) +
                                " and " + std::to_string(b.width_));
  }

  double value_ = 0.0;
  std::size_t width_ = 0;
  std::array<double, kMaxTangents> partials_{};
};

// Elementary functions. Each computes the value with the same double
// expression the plain overload uses, so value slots match bit for bit.

inline Dual exp(const Dual& x) {
  const double e = std::exp(x.value());
  return x.chain(e, e);
}

inline Dual log(const Dual& x) {
  if (!(x.value() > 0.0)) throw DomainError("log", x.value());
  return x.chain(std::log(x.value()), 1.0 / x.value());
}

inline Dual log1p(const Dual& x) {
  if (!(x.value() > -1.0)) throw DomainError("log1p", x.value());
  return x.chain(std::log1p(x.value()), 1.0 / (1.0 + x.value()));
}

inline Dual sqrt(const Dual& x) {
  if (!(x.value() >= 0.0)) throw DomainError("sqrt", x.value());
  const double s = std::sqrt(x.value());
  return x.chain(s, s > 0.0 ? 0.5 / s : 0.0);
}

inline Dual cos(const Dual& x) { return x.chain(std::cos(x.value()), -std::sin(x.value())); }
inline Dual sin(const Dual& x) { return x.chain(std::sin(x.value()), std::cos(x.value())); }

inline Dual tanh(const Dual& x) {
  const double t = std::tanh(x.value());
  return x.chain(t, 1.0 - t * t);
}

/// x^p for a real constant exponent.
inline Dual pow(const Dual& x, double p) {
  const double v = std::pow(x.value(), p);
  if (!std::isfinite(v) && std::isfinite(x.value())) throw DomainError("pow", x.value());
  return x.chain(v, p * std::pow(x.value(), p - 1.0));
}

inline Dual erf(const Dual& x) {
  constexpr double two_over_sqrt_pi = 1.1283791670955126;
  const double v = x.value();
  return x.chain(std::erf(v), two_over_sqrt_pi * std::exp(-v * v));
}

/// max(x, floor) where values below the floor become the constant floor.
inline double clamp_below(double x, double floor) noexcept { return x < floor ? floor : x; }
inline Dual clamp_below(const Dual& x, double floor) {
  return x.value() < floor ? Dual(floor) : x;
}

/// Restricts x to [lo, hi]; clamped values become constants.
inline double clamp_to(double x, double lo, double hi) noexcept {
  return x < lo ? lo : (x > hi ? hi : x);
}
inline Dual clamp_to(const Dual& x, double lo, double hi) {
  if (x.value() < lo) return Dual(lo);
  if (x.value() > hi) return Dual(hi);
  return x;
}

inline double value_of(double x) noexcept { return x; }
inline double value_of(const Dual& x) noexcept { return x.value(); }

/// Gradient of a scalar function of p parameters by seeding unit tangents.
std::vector<double> gradient(const std::function<Dual(std::span<const Dual>)>& f,
                             std::span<const double> theta);

}  // namespace nplmmd
