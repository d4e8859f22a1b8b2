#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <vector>

namespace nplmmd {

/// A set of points in R^d stored row-major in one contiguous buffer.
class Points {
 public:
  Points() = default;
  explicit Points(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw std::invalid_argument("Points: dimension must be >= 1");
  }
  Points(std::size_t dim, std::size_t count) : Points(dim) {
    values_.assign(dim * count, 0.0);
  }
  Points(std::size_t dim, std::vector<double> values) : Points(dim) {
    if (values.size() % dim != 0)
      throw std::invalid_argument("Points: buffer size is not a multiple of dim");
    values_ = std::move(values);
  }

  /// One-dimensional points from a list of scalars.
  static Points scalars(std::initializer_list<double> xs) {
    return Points(1, std::vector<double>(xs));
  }
  static Points scalars(std::vector<double> xs) { return Points(1, std::move(xs)); }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return dim_ == 0 ? 0 : values_.size() / dim_; }
  bool empty() const noexcept { return values_.empty(); }

  std::span<const double> operator[](std::size_t i) const noexcept {
    return {values_.data() + i * dim_, dim_};
  }
  std::span<double> operator[](std::size_t i) noexcept {
    return {values_.data() + i * dim_, dim_};
  }

  void push_back(std::span<const double> p) {
    if (p.size() != dim_) throw std::invalid_argument("Points: dimension mismatch");
    values_.insert(values_.end(), p.begin(), p.end());
  }
  void resize(std::size_t count) { values_.resize(count * dim_); }
  void reserve(std::size_t count) { values_.reserve(count * dim_); }

  const std::vector<double>& values() const noexcept { return values_; }
  const double* data() const noexcept { return values_.data(); }
  double* data() noexcept { return values_.data(); }

  friend bool operator==(const Points&, const Points&) = default;

 private:
  std::size_t dim_ = 1;
  std::vector<double> values_;
};

}  // namespace nplmmd
