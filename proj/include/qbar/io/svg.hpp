#pragma once

// Minimal self-contained SVG plots.

#include <string>
#include <vector>

#include "qbar/grid.hpp"

namespace qbar::io {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  bool markers = false;  // points instead of a polyline
};

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  bool equal_aspect = false;  // same scale on both axes (complex plane)
};

struct Heatmap {
  std::string title;
  std::string x_label;  // axis0
  std::string y_label;  // axis1
  std::string value_label;
  GridMap map;
};

// Stacks several plots vertically in one document.
std::string render_svg(const std::vector<LinePlot>& plots);
std::string render_svg(const Heatmap& heatmap);

}  // namespace qbar::io
