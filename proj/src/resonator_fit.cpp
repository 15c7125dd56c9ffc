#include "qbar/resonator_fit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "qbar/errors.hpp"
#include "qbar/least_squares.hpp"

namespace qbar::fit {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::size_t kMinTraceLength = 16;
constexpr std::size_t kMinEdgeSamples = 8;
constexpr double kRayleighMedian = 1.1774100225154747;  // sqrt(2 ln 2)

struct InverseModel {
  cplx value;
  std::array<cplx, 4> grad;  // d/d(f0, Qi, Qc, phi)
};

InverseModel inverse_model_with_grad(const ResonanceParams& p, double f) {
  const cplx i{0.0, 1.0};
  const double x = (f - p.f0) / p.f0;
  const cplx e = std::polar(1.0, p.phi);
  const double q = p.Qi / p.Qc;
  const cplx d{1.0, 2.0 * p.Qi * x};
  const cplx term = e * q / d;
  InverseModel m;
  m.value = 1.0 + term;
  m.grad[0] = term * (2.0 * i * p.Qi * f / (p.f0 * p.f0 * d));
  m.grad[1] = e / (p.Qc * d * d);
  m.grad[2] = -term / p.Qc;
  m.grad[3] = i * term;
  return m;
}

ResonanceParams params_from(const Eigen::VectorXd& v) { return {v(0), v(1), v(2), v(3)}; }

bool feasible(const ResonanceParams& p) {
  return std::isfinite(p.f0) && p.f0 > 0.0 && p.Qi > 0.0 && p.Qc > 0.0 && std::isfinite(p.phi);
}

// Solves the small dense linear least-squares problem a x = b.
Eigen::VectorXd solve_linear(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  return a.colPivHouseholderQr().solve(b);
}

std::vector<double> unwrap(std::vector<double> phase) {
  for (std::size_t k = 1; k < phase.size(); ++k) {
    const double d = phase[k] - phase[k - 1];
    phase[k] -= 2.0 * kPi * std::round(d / (2.0 * kPi));
  }
  return phase;
}

std::vector<double> sqrt_weights(const ComplexTrace& trace, const ResonanceParams& p, Weighting w,
                                 const BaselineModel* baseline) {
  std::vector<double> s(trace.size(), 1.0);
  if (w == Weighting::uniform) return s;
  for (std::size_t k = 0; k < trace.size(); ++k) {
    const double m = std::abs(bvd::s21_inverse_model(p, trace.freqs[k]));
    s[k] = 1.0 / (m * m);
    if (baseline) s[k] *= std::abs(baseline->evaluate(trace.freqs[k]));
  }
  return s;
}

void fill_result_common(FitResult& out, const lsq::Result& lm, const ComplexTrace& trace, double edge_fraction) {
  out.params = params_from(lm.params.head(4));
  out.params.phi = bvd::wrap_phase(out.params.phi);
  const auto m = static_cast<double>(lm.residuals.size());
  out.residual_rms = std::sqrt(lm.residuals.squaredNorm() / (0.5 * m));
  out.converged = lm.converged;
  out.stop_reason = lm.stop_reason;
  out.rms_history.clear();
  for (double r : lm.rms_history) out.rms_history.push_back(r * std::sqrt(2.0));
  out.window = {trace.freqs.front(), trace.freqs.back(), trace.size(), edge_fraction};
  out.freqs = trace.freqs;

  const double dof = m - static_cast<double>(lm.params.size());
  const double variance = dof > 0.0 ? lm.residuals.squaredNorm() / dof : 0.0;
  const Eigen::MatrixXd cov = lsq::covariance(lm.jacobian, variance);
  out.covariance = cov.topLeftCorner<4, 4>();
  for (int k = 0; k < 4; ++k) out.uncertainties[k] = std::sqrt(std::max(0.0, out.covariance(k, k)));
}

}  // namespace

void ComplexTrace::validate() const {
  if (freqs.size() != values.size()) throw DataError("trace frequency and value arrays differ in length");
  if (freqs.size() < kMinTraceLength) {
    throw DataError("trace needs at least " + std::to_string(kMinTraceLength) + " samples");
  }
  for (std::size_t k = 0; k < freqs.size(); ++k) {
    if (!std::isfinite(freqs[k]) || !std::isfinite(values[k].real()) || !std::isfinite(values[k].imag())) {
      throw DataError("trace contains a non-finite sample at index " + std::to_string(k));
    }
    if (k > 0 && !(freqs[k] > freqs[k - 1])) {
      throw DataError("trace frequencies are not strictly increasing at index " + std::to_string(k));
    }
  }
}

cplx BaselineModel::evaluate(double f) const {
  const double u = f - reference_freq;
  return std::polar(amplitude_offset + amplitude_slope * u, phase_offset - 2.0 * kPi * u * group_delay);
}

void BaselineModel::validate() const {
  if (!(amplitude_offset > 0.0) || !std::isfinite(amplitude_offset)) {
    throw DomainError("baseline amplitude offset must be positive");
  }
  if (!std::isfinite(amplitude_slope) || !std::isfinite(phase_offset) || !std::isfinite(group_delay)) {
    throw DomainError("baseline parameters must be finite");
  }
}

NormalizedTrace normalize_trace(const ComplexTrace& raw, double edge_fraction) {
  if (!(edge_fraction > 0.0 && edge_fraction <= 0.4)) {
    throw ArgumentError("edge_fraction must lie in (0, 0.4]");
  }
  raw.validate();
  for (std::size_t k = 0; k < raw.size(); ++k) {
    if (std::abs(raw.values[k]) == 0.0) throw DataError("zero-magnitude sample at index " + std::to_string(k));
  }
  const std::size_t n = raw.size();
  const auto n_edge = static_cast<std::size_t>(std::floor(edge_fraction * static_cast<double>(n)));
  if (n_edge < kMinEdgeSamples) {
    throw NormalizationError("window too narrow: " + std::to_string(n_edge) + " edge samples per side, need " +
                             std::to_string(kMinEdgeSamples));
  }

  BaselineModel b;
  b.reference_freq = 0.5 * (raw.freqs.front() + raw.freqs.back());

  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < n_edge; ++k) idx.push_back(k);
  for (std::size_t k = n - n_edge; k < n; ++k) idx.push_back(k);
  const auto m = static_cast<Eigen::Index>(idx.size());
  const auto ne = static_cast<Eigen::Index>(n_edge);

  // Amplitude: linear in frequency.
  Eigen::MatrixXd a(m, 2);
  Eigen::VectorXd rhs(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    a(r, 0) = 1.0;
    a(r, 1) = raw.freqs[idx[r]] - b.reference_freq;
    rhs(r) = std::abs(raw.values[idx[r]]);
  }
  // Column 1 is in Hz; scale it for conditioning.
  const double uscale = std::max(std::abs(a(0, 1)), std::abs(a(m - 1, 1)));
  a.col(1) /= uscale;
  Eigen::VectorXd amp = solve_linear(a, rhs);
  b.amplitude_offset = amp(0);
  b.amplitude_slope = amp(1) / uscale;
  if (!(b.amplitude_offset > 0.0)) throw NormalizationError("fitted baseline amplitude is not positive");

  // Phase: unwrap each edge, fit a common slope with separate offsets, then
  // align the right edge by the nearest multiple of 2 pi.
  std::vector<double> left, right;
  for (std::size_t k = 0; k < n_edge; ++k) left.push_back(std::arg(raw.values[k]));
  for (std::size_t k = n - n_edge; k < n; ++k) right.push_back(std::arg(raw.values[k]));
  left = unwrap(std::move(left));
  right = unwrap(std::move(right));
  Eigen::MatrixXd ap = Eigen::MatrixXd::Zero(m, 3);
  for (Eigen::Index r = 0; r < m; ++r) {
    ap(r, r < ne ? 0 : 1) = 1.0;
    ap(r, 2) = a(r, 1);
    rhs(r) = r < ne ? left[r] : right[r - ne];
  }
  const Eigen::VectorXd sep = solve_linear(ap, rhs);
  const double wraps = std::round((sep(1) - sep(0)) / (2.0 * kPi));
  Eigen::MatrixXd aj(m, 2);
  for (Eigen::Index r = 0; r < m; ++r) {
    aj(r, 0) = 1.0;
    aj(r, 1) = a(r, 1);
    if (r >= ne) rhs(r) -= 2.0 * kPi * wraps;
  }
  const Eigen::VectorXd ph = solve_linear(aj, rhs);
  b.phase_offset = bvd::wrap_phase(ph(0));
  b.group_delay = -ph(1) / uscale / (2.0 * kPi);

  NormalizedTrace out;
  out.trace = raw;
  out.baseline = b;
  out.edge_fraction = edge_fraction;
  for (std::size_t k = 0; k < n; ++k) out.trace.values[k] = raw.values[k] / b.evaluate(raw.freqs[k]);
  return out;
}

Circle fit_circle(std::span<const cplx> points) {
  const auto m = static_cast<Eigen::Index>(points.size());
  if (m < 3) throw NoResonanceError("circle fit needs at least three points");
  // Centre the data for conditioning.
  cplx mean{0.0, 0.0};
  for (const auto& z : points) mean += z;
  mean /= static_cast<double>(m);
  Eigen::MatrixXd a(m, 3);
  Eigen::VectorXd rhs(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const cplx z = points[r] - mean;
    a(r, 0) = z.real();
    a(r, 1) = z.imag();
    a(r, 2) = 1.0;
    rhs(r) = -std::norm(z);
  }
  const Eigen::VectorXd s = solve_linear(a, rhs);
  const cplx centre{-0.5 * s(0), -0.5 * s(1)};
  const double r2 = std::norm(centre) - s(2);
  if (!(r2 > 0.0) || !std::isfinite(r2)) throw NoResonanceError("degenerate circle fit");
  return {centre + mean, std::sqrt(r2)};
}

double estimate_noise_sigma(std::span<const cplx> points) {
  if (points.size() < 3) return 0.0;
  std::vector<double> diffs;
  diffs.reserve(points.size() - 1);
  for (std::size_t k = 1; k < points.size(); ++k) diffs.push_back(std::abs(points[k] - points[k - 1]));
  auto mid = diffs.begin() + static_cast<std::ptrdiff_t>(diffs.size() / 2);
  std::nth_element(diffs.begin(), mid, diffs.end());
  return *mid / kRayleighMedian;
}

ResonanceParams circle_init(const ComplexTrace& norm) {
  norm.validate();
  const std::size_t n = norm.size();
  std::vector<cplx> inv(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (std::abs(norm.values[k]) == 0.0) throw DataError("zero-magnitude sample at index " + std::to_string(k));
    inv[k] = 1.0 / norm.values[k];
  }
  const double sigma = estimate_noise_sigma(inv);

  std::size_t peak = 0;
  double peak_dist = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double d = std::abs(inv[k] - 1.0);
    if (d > peak_dist) {
      peak_dist = d;
      peak = k;
    }
  }
  if (peak_dist < 5.0 * sigma) throw NoResonanceError("no excursion above five noise sigmas in the inverse plane");

  const Circle circle = fit_circle(inv);
  const double diameter = 2.0 * circle.radius;
  if (diameter < 5.0 * sigma) throw NoResonanceError("circle diameter below five noise sigmas");

  // Samples at or above half of the peak |w|^2, contiguous around the peak.
  const double half = 0.5 * peak_dist * peak_dist;
  std::size_t lo = peak, hi = peak;
  while (lo > 0 && std::norm(inv[lo - 1] - 1.0) >= half) --lo;
  while (hi + 1 < n && std::norm(inv[hi + 1] - 1.0) >= half) ++hi;
  if (hi - lo < 2) {
    lo = peak > 0 ? peak - 1 : 0;
    hi = std::min(n - 1, lo + 2);
    lo = hi >= 2 ? hi - 2 : 0;
  }

  // 1/|w|^2 is exactly quadratic in f for the model line shape.
  const double fk = norm.freqs[peak];
  const double h = (norm.freqs[hi] - norm.freqs[lo]) / 2.0;
  const auto m = static_cast<Eigen::Index>(hi - lo + 1);
  Eigen::MatrixXd a(m, 3);
  Eigen::VectorXd rhs(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const std::size_t k = lo + static_cast<std::size_t>(r);
    const double u = (norm.freqs[k] - fk) / h;
    a(r, 0) = 1.0;
    a(r, 1) = u;
    a(r, 2) = u * u;
    rhs(r) = 1.0 / std::norm(inv[k] - 1.0);
  }
  const Eigen::VectorXd c = solve_linear(a, rhs);

  ResonanceParams p;
  double fwhm = 0.0;
  if (c(2) > 0.0) {
    const double u_star = -c(1) / (2.0 * c(2));
    const double q_star = c(0) - c(1) * c(1) / (4.0 * c(2));
    if (q_star > 0.0 && std::abs(u_star) <= static_cast<double>(m)) {
      p.f0 = fk + h * u_star;
      // q(f) = q* (1 + (2 Qi (f - f0)/f0)^2): FWHM = 2 h sqrt(q*/c2).
      fwhm = 2.0 * h * std::sqrt(q_star / c(2));
    }
  }
  if (!(fwhm > 0.0)) {
    // Fallback: linear interpolation of the half-maximum crossings.
    p.f0 = fk;
    auto crossing = [&](std::size_t inside, std::size_t outside) {
      const double wi = std::norm(inv[inside] - 1.0), wo = std::norm(inv[outside] - 1.0);
      const double t = (wi - half) / (wi - wo);
      return norm.freqs[inside] + t * (norm.freqs[outside] - norm.freqs[inside]);
    };
    const double f_lo = lo > 0 ? crossing(lo, lo - 1) : norm.freqs[lo];
    const double f_hi = hi + 1 < n ? crossing(hi, hi + 1) : norm.freqs[hi];
    fwhm = f_hi - f_lo;
  }
  if (!(fwhm > 0.0)) throw NoResonanceError("could not resolve the resonance linewidth");

  p.Qi = p.f0 / fwhm;
  p.Qc = p.Qi / diameter;
  p.phi = bvd::wrap_phase(std::arg(circle.center - 1.0));
  return p;
}

FitResult fit_resonance(const ComplexTrace& norm, const ResonanceParams& init, const FitOptions& options) {
  norm.validate();
  init.validate();
  if (!(options.tol > 0.0)) throw ArgumentError("fit tolerance must be positive");
  const std::size_t n = norm.size();
  std::vector<cplx> y(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (std::abs(norm.values[k]) == 0.0) throw DataError("zero-magnitude sample at index " + std::to_string(k));
    y[k] = 1.0 / norm.values[k];
  }

  lsq::Options lo;
  lo.tol = options.tol;
  lo.max_iter = options.max_iter;
  lo.step_floor = Eigen::Vector4d(0.0, 0.0, 0.0, 1.0);

  Eigen::VectorXd p = Eigen::Vector4d(init.f0, init.Qi, init.Qc, init.phi);
  const int passes = options.weighting == Weighting::uniform ? 1 : std::max(1, options.reweight_passes);
  lsq::Result lm;
  int total_iter = 0;
  for (int pass = 0; pass < passes; ++pass) {
    const auto s = sqrt_weights(norm, params_from(p), options.weighting, nullptr);
    auto residuals = [&](const Eigen::VectorXd& v, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
      const ResonanceParams rp = params_from(v);
      if (!feasible(rp)) return false;
      for (std::size_t k = 0; k < n; ++k) {
        const auto model = inverse_model_with_grad(rp, norm.freqs[k]);
        const cplx res = s[k] * (y[k] - model.value);
        const auto row = static_cast<Eigen::Index>(2 * k);
        r(row) = res.real();
        r(row + 1) = res.imag();
        if (jac) {
          for (int c = 0; c < 4; ++c) {
            const cplx g = -s[k] * model.grad[c];
            (*jac)(row, c) = g.real();
            (*jac)(row + 1, c) = g.imag();
          }
        }
      }
      return true;
    };
    lm = lsq::levenberg_marquardt(residuals, 2 * n, p, lo);
    total_iter += lm.iterations;
    p = lm.params;
  }

  FitResult out;
  fill_result_common(out, lm, norm, 0.0);
  out.iterations = total_iter;
  return out;
}

FitResult fit_trace(const ComplexTrace& raw, const TraceFitOptions& options) {
  const NormalizedTrace normalized = normalize_trace(raw, options.edge_fraction);
  const ResonanceParams init = circle_init(normalized.trace);
  const FitOptions& fo = options.fit;
  if (!(fo.tol > 0.0)) throw ArgumentError("fit tolerance must be positive");

  const std::size_t n = raw.size();
  const double fref = normalized.baseline.reference_freq;
  const double span = raw.freqs.back() - raw.freqs.front();
  std::vector<cplx> inv_raw(n);
  for (std::size_t k = 0; k < n; ++k) inv_raw[k] = 1.0 / raw.values[k];

  auto baseline_from = [&](const Eigen::VectorXd& v) {
    BaselineModel b;
    b.amplitude_offset = v(4);
    b.amplitude_slope = v(5);
    b.phase_offset = v(6);
    b.group_delay = v(7);
    b.reference_freq = fref;
    return b;
  };

  const BaselineModel& b0 = normalized.baseline;
  Eigen::VectorXd p(8);
  p << init.f0, init.Qi, init.Qc, init.phi, b0.amplitude_offset, b0.amplitude_slope, b0.phase_offset,
      b0.group_delay;

  lsq::Options lo;
  lo.tol = fo.tol;
  lo.max_iter = fo.max_iter;
  lo.step_floor.resize(8);
  lo.step_floor << 0.0, 0.0, 0.0, 1.0, 0.0, b0.amplitude_offset / span, 1.0, 1.0 / span;

  const int passes = fo.weighting == Weighting::uniform ? 1 : std::max(1, fo.reweight_passes);
  lsq::Result lm;
  int total_iter = 0;
  for (int pass = 0; pass < passes; ++pass) {
    const BaselineModel bw = baseline_from(p);
    const auto s = sqrt_weights(raw, params_from(p.head(4)), fo.weighting, &bw);
    auto residuals = [&](const Eigen::VectorXd& v, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
      const ResonanceParams rp = params_from(v.head(4));
      if (!feasible(rp) || !(v(4) > 0.0)) return false;
      const BaselineModel b = baseline_from(v);
      const cplx i{0.0, 1.0};
      for (std::size_t k = 0; k < n; ++k) {
        const double f = raw.freqs[k];
        const double u = f - fref;
        const cplx rot = std::polar(1.0, b.phase_offset - 2.0 * kPi * u * b.group_delay);
        const cplx y = (b.amplitude_offset + b.amplitude_slope * u) * rot * inv_raw[k];
        const auto model = inverse_model_with_grad(rp, f);
        const cplx res = s[k] * (y - model.value);
        const auto row = static_cast<Eigen::Index>(2 * k);
        r(row) = res.real();
        r(row + 1) = res.imag();
        if (jac) {
          std::array<cplx, 8> g;
          for (int c = 0; c < 4; ++c) g[c] = -model.grad[c];
          g[4] = rot * inv_raw[k];
          g[5] = u * rot * inv_raw[k];
          g[6] = i * y;
          g[7] = -2.0 * kPi * i * u * y;
          for (int c = 0; c < 8; ++c) {
            (*jac)(row, c) = (s[k] * g[c]).real();
            (*jac)(row + 1, c) = (s[k] * g[c]).imag();
          }
        }
      }
      return true;
    };
    lm = lsq::levenberg_marquardt(residuals, 2 * n, p, lo);
    total_iter += lm.iterations;
    p = lm.params;
  }

  FitResult out;
  fill_result_common(out, lm, raw, options.edge_fraction);
  out.iterations = total_iter;
  BaselineModel fitted = baseline_from(p);
  fitted.phase_offset = bvd::wrap_phase(fitted.phase_offset);
  out.baseline = fitted;
  return out;
}

FitReport fit_report(const FitResult& result) {
  FitReport r;
  r.params = result.params;
  r.uncertainties = result.uncertainties;
  r.residual_rms = result.residual_rms;
  r.iterations = result.iterations;
  r.converged = result.converged;
  r.stop_reason = result.stop_reason;
  r.window = result.window;
  r.baseline = result.baseline;
  r.freqs = result.freqs;
  r.model_normalized.reserve(r.freqs.size());
  for (double f : r.freqs) r.model_normalized.push_back(bvd::s21_model(result.params, f));
  if (result.baseline) {
    r.model_raw.reserve(r.freqs.size());
    for (std::size_t k = 0; k < r.freqs.size(); ++k) {
      r.model_raw.push_back(result.baseline->evaluate(r.freqs[k]) * r.model_normalized[k]);
    }
  }
  return r;
}

}  // namespace qbar::fit
