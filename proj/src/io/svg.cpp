#include "qbar/io/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>

#include "qbar/errors.hpp"

namespace qbar::io {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 90.0;
constexpr double kRight = 30.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 60.0;

const std::array<const char*, 6> kColors = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

// Enough significant digits to tell neighbouring ticks apart.
std::string label(double v, double step = 0.0) {
  int digits = 4;
  if (step > 0.0 && v != 0.0) {
    digits = std::clamp(static_cast<int>(std::ceil(std::log10(std::abs(v) / step))) + 1, 1, 12);
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '&':
        out += "&amp;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!(lo <= hi)) {
      lo = 0.0;
      hi = 1.0;
    }
    if (hi == lo) {
      const double pad = lo == 0.0 ? 1.0 : 0.05 * std::abs(lo);
      lo -= pad;
      hi += pad;
    }
  }
};

std::vector<double> ticks(const Range& r) {
  const double raw = (r.hi - r.lo) / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (step >= raw) break;
  }
  std::vector<double> out;
  for (double t = std::ceil(r.lo / step) * step; t <= r.hi + 1e-9 * step; t += step) {
    out.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
  }
  return out;
}

struct Frame {
  double x0, y0, w, h;
  Range xr, yr;

  double px(double x) const { return x0 + (x - xr.lo) / (xr.hi - xr.lo) * w; }
  double py(double y) const { return y0 + h - (y - yr.lo) / (yr.hi - yr.lo) * h; }
};

void axes(std::string& out, const Frame& f, const std::string& title, const std::string& xl, const std::string& yl) {
  out += "<rect x=\"" + num(f.x0) + "\" y=\"" + num(f.y0) + "\" width=\"" + num(f.w) + "\" height=\"" + num(f.h) +
         "\" fill=\"none\" stroke=\"#000\"/>\n";
  const auto xt = ticks(f.xr);
  const auto yt = ticks(f.yr);
  const double xs = xt.size() > 1 ? xt[1] - xt[0] : 0.0;
  const double ys = yt.size() > 1 ? yt[1] - yt[0] : 0.0;
  for (double t : xt) {
    const double x = f.px(t);
    out += "<line x1=\"" + num(x) + "\" y1=\"" + num(f.y0 + f.h) + "\" x2=\"" + num(x) + "\" y2=\"" +
           num(f.y0 + f.h + 5) + "\" stroke=\"#000\"/>\n";
    out += "<text x=\"" + num(x) + "\" y=\"" + num(f.y0 + f.h + 18) + "\" text-anchor=\"middle\">" + label(t, xs) +
           "</text>\n";
  }
  for (double t : yt) {
    const double y = f.py(t);
    out += "<line x1=\"" + num(f.x0 - 5) + "\" y1=\"" + num(y) + "\" x2=\"" + num(f.x0) + "\" y2=\"" + num(y) +
           "\" stroke=\"#000\"/>\n";
    out += "<text x=\"" + num(f.x0 - 8) + "\" y=\"" + num(y + 4) + "\" text-anchor=\"end\">" + label(t, ys) +
           "</text>\n";
  }
  out += "<text x=\"" + num(f.x0 + f.w / 2) + "\" y=\"" + num(f.y0 - 12) +
         "\" text-anchor=\"middle\" font-weight=\"bold\">" + escape(title) + "</text>\n";
  out += "<text x=\"" + num(f.x0 + f.w / 2) + "\" y=\"" + num(f.y0 + f.h + 40) + "\" text-anchor=\"middle\">" +
         escape(xl) + "</text>\n";
  const double ly = f.y0 + f.h / 2;
  out += "<text x=\"20\" y=\"" + num(ly) + "\" text-anchor=\"middle\" transform=\"rotate(-90 20 " + num(ly) + ")\">" +
         escape(yl) + "</text>\n";
}

std::string header(double height) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(height) +
         "\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n";
}

// Piecewise-linear dark-blue to yellow scale.
std::string color(double t) {
  static const std::array<std::array<double, 3>, 5> stops = {
      {{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};
  t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0) * 4.0;
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(t), 3);
  const double u = t - static_cast<double>(k);
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(std::lround(stops[k][0] * (1 - u) + stops[k + 1][0] * u)),
                static_cast<int>(std::lround(stops[k][1] * (1 - u) + stops[k + 1][1] * u)),
                static_cast<int>(std::lround(stops[k][2] * (1 - u) + stops[k + 1][2] * u)));
  return buf;
}

// Cell edges halfway between grid points.
std::vector<double> edges(const std::vector<double>& axis) {
  std::vector<double> e(axis.size() + 1);
  if (axis.size() == 1) {
    e[0] = axis[0] - 0.5;
    e[1] = axis[0] + 0.5;
    return e;
  }
  for (std::size_t i = 1; i < axis.size(); ++i) e[i] = 0.5 * (axis[i - 1] + axis[i]);
  e.front() = axis.front() - (e[1] - axis.front());
  e.back() = axis.back() + (axis.back() - e[axis.size() - 1]);
  return e;
}

}  // namespace

std::string render_svg(const std::vector<LinePlot>& plots) {
  std::string out = header(kHeight * static_cast<double>(std::max<std::size_t>(plots.size(), 1)));
  for (std::size_t p = 0; p < plots.size(); ++p) {
    const LinePlot& plot = plots[p];
    Frame f{kLeft, kTop + kHeight * static_cast<double>(p), kWidth - kLeft - kRight, kHeight - kTop - kBottom, {}, {}};
    for (const auto& s : plot.series) {
      if (s.x.size() != s.y.size()) throw ArgumentError("series '" + s.name + "' has mismatched sizes");
      for (double x : s.x) f.xr.add(x);
      for (double y : s.y) f.yr.add(y);
    }
    f.xr.finish();
    f.yr.finish();
    if (plot.equal_aspect) {
      const double scale = std::max((f.xr.hi - f.xr.lo) / f.w, (f.yr.hi - f.yr.lo) / f.h);
      const double cx = 0.5 * (f.xr.lo + f.xr.hi);
      const double cy = 0.5 * (f.yr.lo + f.yr.hi);
      f.xr = {cx - 0.5 * scale * f.w, cx + 0.5 * scale * f.w};
      f.yr = {cy - 0.5 * scale * f.h, cy + 0.5 * scale * f.h};
    }
    axes(out, f, plot.title, plot.x_label, plot.y_label);
    for (std::size_t k = 0; k < plot.series.size(); ++k) {
      const Series& s = plot.series[k];
      const char* c = kColors[k % kColors.size()];
      if (s.markers) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
          if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
          out += "<circle cx=\"" + num(f.px(s.x[i])) + "\" cy=\"" + num(f.py(s.y[i])) + "\" r=\"1.8\" fill=\"" + c +
                 "\"/>\n";
        }
      } else {
        out += "<polyline fill=\"none\" stroke=\"" + std::string(c) + "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
          if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
          out += num(f.px(s.x[i])) + "," + num(f.py(s.y[i])) + " ";
        }
        out += "\"/>\n";
      }
      const double ly = f.y0 + 14.0 * static_cast<double>(k + 1);
      out += "<text x=\"" + num(f.x0 + f.w - 8) + "\" y=\"" + num(ly) + "\" text-anchor=\"end\" fill=\"" + c + "\">" +
             escape(s.name) + "</text>\n";
    }
  }
  out += "</svg>\n";
  return out;
}

std::string render_svg(const Heatmap& hm) {
  const GridMap& m = hm.map;
  if (m.axis0.empty() || m.axis1.empty() || m.values.size() != m.axis0.size() * m.axis1.size()) {
    throw ArgumentError("heatmap grid is empty or inconsistent");
  }
  std::string out = header(kHeight);
  const auto ex = edges(m.axis0);
  const auto ey = edges(m.axis1);
  Frame f{kLeft, kTop, kWidth - kLeft - kRight - 70.0, kHeight - kTop - kBottom, {}, {}};
  f.xr.add(ex.front());
  f.xr.add(ex.back());
  f.yr.add(ey.front());
  f.yr.add(ey.back());
  f.xr.finish();
  f.yr.finish();
  Range vr;
  for (double v : m.values) vr.add(v);
  vr.finish();
  for (std::size_t i = 0; i < m.axis0.size(); ++i) {
    for (std::size_t j = 0; j < m.axis1.size(); ++j) {
      const double x = f.px(std::min(ex[i], ex[i + 1]));
      const double w = std::abs(f.px(ex[i + 1]) - f.px(ex[i]));
      const double y = f.py(std::max(ey[j], ey[j + 1]));
      const double h = std::abs(f.py(ey[j + 1]) - f.py(ey[j]));
      out += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w + 0.3) + "\" height=\"" +
             num(h + 0.3) + "\" fill=\"" + color((m.at(i, j) - vr.lo) / (vr.hi - vr.lo)) + "\"/>\n";
    }
  }
  axes(out, f, hm.title, hm.x_label, hm.y_label);
  // Colour bar.
  const double bx = f.x0 + f.w + 20.0;
  for (int k = 0; k < 50; ++k) {
    const double y = f.y0 + f.h * (1.0 - (k + 1) / 50.0);
    out += "<rect x=\"" + num(bx) + "\" y=\"" + num(y) + "\" width=\"14\" height=\"" + num(f.h / 50.0 + 0.3) +
           "\" fill=\"" + color((k + 0.5) / 50.0) + "\"/>\n";
  }
  out += "<text x=\"" + num(bx + 18) + "\" y=\"" + num(f.y0 + 8) + "\">" + label(vr.hi) + "</text>\n";
  out += "<text x=\"" + num(bx + 18) + "\" y=\"" + num(f.y0 + f.h) + "\">" + label(vr.lo) + "</text>\n";
  out += "<text x=\"" + num(bx) + "\" y=\"" + num(f.y0 - 6) + "\">" + escape(hm.value_label) + "</text>\n";
  out += "</svg>\n";
  return out;
}

}  // namespace qbar::io
