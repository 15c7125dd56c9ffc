#include "qbar/grid.hpp"

#include "qbar/errors.hpp"

namespace qbar {

std::vector<double> linspace(double start, double stop, std::size_t n) {
  if (n == 0) throw ArgumentError("linspace: point count must be positive");
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = start;
    return out;
  }
  const double step = (stop - start) / static_cast<double>(n - 1);
  for (std::size_t k = 0; k < n; ++k) out[k] = start + step * static_cast<double>(k);
  out[n - 1] = stop;
  return out;
}

}  // namespace qbar
