#include "nplmmd/dual.hpp"

namespace nplmmd {

std::vector<double> gradient(const std::function<Dual(std::span<const Dual>)>& f,
                             std::span<const double> theta) {
  const std::size_t p = theta.size();
  std::vector<Dual> args(p);
  for (std::size_t i = 0; i < p; ++i) args[i] = Dual::variable(theta[i], p, i);
  const Dual out = f(args);
  std::vector<double> g(p);
  for (std::size_t i = 0; i < p; ++i) g[i] = out.partial(i);
  return g;
}

}  // namespace nplmmd
