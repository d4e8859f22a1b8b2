#pragma once

#include "nplmmd/dual.hpp"

namespace nplmmd {

/// Standard normal CDF.
double normal_cdf(double x);

/// Standard normal quantile for p in (0, 1); rational approximation polished
/// by a Newton step. Throws DomainError outside (0, 1).
double normal_quantile(double p);

/// Standard normal density.
double normal_pdf(double x);

Dual normal_cdf(const Dual& x);
/// d/dp quantile(p) = 1 / pdf(quantile(p)).
Dual normal_quantile(const Dual& p);

}  // namespace nplmmd
