#pragma once

#include <cstddef>
#include <vector>

namespace qbar {

// n evenly spaced points from start to stop inclusive. n == 1 yields {start}.
std::vector<double> linspace(double start, double stop, std::size_t n);

// Row-major 2D map: values[i0 * axis1.size() + i1].
struct GridMap {
  std::vector<double> axis0;
  std::vector<double> axis1;
  std::vector<double> values;

  double at(std::size_t i0, std::size_t i1) const { return values[i0 * axis1.size() + i1]; }
  double& at(std::size_t i0, std::size_t i1) { return values[i0 * axis1.size() + i1]; }
};

}  // namespace qbar
