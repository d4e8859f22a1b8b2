// Compiled with -ffast-math so the loop maps onto the vector exp routines.
// Callers guarantee finite arguments in [-1000, 0].
#include <cmath>
#include <cstddef>

#include "nplmmd/kernels.hpp"

namespace nplmmd::detail {

void exp_inplace(double* values, std::size_t count) noexcept {
  for (std::size_t i = 0; i < count; ++i) values[i] = std::exp(values[i]);
}

}  // namespace nplmmd::detail
