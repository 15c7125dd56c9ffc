#pragma once

// Inverse problem for a single notch-type resonance: baseline normalization,
// circle-fit initialization in the inverse plane and damped least squares on
// the normalized inverse transmission.

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qbar/bvd_model.hpp"

namespace qbar::fit {

using bvd::cplx;
using bvd::ResonanceParams;

struct ComplexTrace {
  std::vector<double> freqs;  // Hz, strictly increasing
  std::vector<cplx> values;
  std::string source;
  double reference_impedance = 50.0;
  bool is_reflection = false;  // one-port data carries S11, not S21
  std::vector<std::string> comments;

  std::size_t size() const { return freqs.size(); }
  // Throws DataError unless sizes match, N >= 16, freqs strictly increasing
  // and every sample is finite.
  void validate() const;
};

// b(f) = (a0 + a1 (f - fref)) exp(i (theta0 - 2 pi (f - fref) tau)).
struct BaselineModel {
  double amplitude_offset = 1.0;
  double amplitude_slope = 0.0;  // per Hz
  double phase_offset = 0.0;     // radians at reference_freq
  double group_delay = 0.0;      // seconds
  double reference_freq = 0.0;   // Hz

  cplx evaluate(double f) const;
  void validate() const;
};

struct NormalizedTrace {
  ComplexTrace trace;
  BaselineModel baseline;
  double edge_fraction = 0.0;
};

// Fits the complex baseline on the outer edge_fraction of samples at each end
// and divides it out. Requires at least 8 edge samples per side.
NormalizedTrace normalize_trace(const ComplexTrace& raw, double edge_fraction = 0.2);

struct Circle {
  cplx center;
  double radius = 0.0;
};

// Algebraic (Kasa) circle fit. Exact for noise-free points on a circle.
Circle fit_circle(std::span<const cplx> points);

// Per-point complex noise sigma, estimated from successive differences.
double estimate_noise_sigma(std::span<const cplx> points);

// Initial (f0, Qi, Qc, phi) from the inverse-plane circle: diameter Qi/Qc,
// rotation phi about 1, f0 at the farthest excursion (refined by a quadratic
// in 1/|1/S - 1|^2) and Qi = f0 / FWHM. Throws NoResonanceError when the
// circle is not resolved above the noise.
ResonanceParams circle_init(const ComplexTrace& norm);

enum class Weighting {
  uniform,     // every inverse-plane residual counts the same
  propagated,  // weights |S21_model|^2: transmission-domain noise mapped to 1/S21
};

struct FitOptions {
  double tol = 1e-10;
  int max_iter = 200;
  Weighting weighting = Weighting::propagated;
  int reweight_passes = 2;
};

struct FitWindow {
  double f_min = 0.0;
  double f_max = 0.0;
  std::size_t num_points = 0;
  double edge_fraction = 0.0;  // 0 when the input was not normalized here
};

struct FitResult {
  ResonanceParams params;
  std::array<double, 4> uncertainties{};  // one sigma: f0, Qi, Qc, phi
  Eigen::Matrix4d covariance = Eigen::Matrix4d::Zero();
  double residual_rms = 0.0;  // weighted inverse-plane residual
  int iterations = 0;
  bool converged = false;
  std::string stop_reason;
  std::vector<double> rms_history;  // accepted iterations of the final pass
  FitWindow window;
  std::optional<BaselineModel> baseline;  // set when fitted jointly on raw data
  std::vector<double> freqs;
};

// Damped least squares of 1/S21_norm against the inverse model over
// (f0, Qi, Qc, phi). Throws DegenerateFitError on a singular normal matrix.
FitResult fit_resonance(const ComplexTrace& norm, const ResonanceParams& init, const FitOptions& options = {});

struct TraceFitOptions {
  FitOptions fit;
  double edge_fraction = 0.2;
};

// Full pipeline on a raw trace: normalize, circle_init, then a joint fit of
// the resonance and the baseline so that resonance tails in the edge windows
// do not bias the result.
FitResult fit_trace(const ComplexTrace& raw, const TraceFitOptions& options = {});

struct FitReport {
  ResonanceParams params;
  std::array<double, 4> uncertainties{};
  double residual_rms = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string stop_reason;
  FitWindow window;
  std::optional<BaselineModel> baseline;
  std::vector<double> freqs;
  std::vector<cplx> model_normalized;  // S21 model on the input grid
  std::vector<cplx> model_raw;         // baseline * model, when a baseline exists
};

FitReport fit_report(const FitResult& result);

}  // namespace qbar::fit
