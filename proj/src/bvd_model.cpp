#include "qbar/bvd_model.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "qbar/errors.hpp"

namespace qbar::bvd {

namespace {

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

void BvdParams::validate() const {
  if (!positive_finite(R) || !positive_finite(L) || !positive_finite(C) || !positive_finite(C0)) {
    throw DomainError("BvD parameters R, L, C, C0 must be finite and strictly positive");
  }
}

void ResonanceParams::validate() const {
  if (!positive_finite(f0)) throw DomainError("resonance f0 must be positive");
  if (!positive_finite(Qi)) throw DomainError("resonance Qi must be positive");
  if (!positive_finite(Qc)) throw DomainError("resonance Qc must be positive");
  if (!std::isfinite(phi)) throw DomainError("resonance phi must be finite");
}

void LineImpedance::validate() const {
  if (!positive_finite(Z0)) throw DomainError("reference impedance Z0 must be positive");
}

double wrap_phase(double phi) {
  constexpr double pi = std::numbers::pi;
  double w = std::remainder(phi, 2.0 * pi);  // [-pi, pi]
  if (w <= -pi) w += 2.0 * pi;
  return w;
}

cplx impedance_exact(const BvdParams& p, double f) {
  if (!(f > 0.0)) throw DomainError("impedance_exact: frequency must be positive");
  p.validate();
  const double w = kTwoPi * f;
  const cplx i{0.0, 1.0};
  const cplx z_motional = p.R + i * (w * p.L - 1.0 / (w * p.C));
  const cplx z_shunt = 1.0 / (i * w * p.C0);
  return z_motional * z_shunt / (z_motional + z_shunt);
}

double series_resonance(const BvdParams& p) {
  p.validate();
  return 1.0 / (kTwoPi * std::sqrt(p.L * p.C));
}

double parallel_resonance(const BvdParams& p) {
  p.validate();
  return std::sqrt((p.C + p.C0) / (p.L * p.C * p.C0)) / kTwoPi;
}

double internal_q(const BvdParams& p) {
  p.validate();
  return std::sqrt(p.L * (p.C + p.C0) / (p.C * p.C0)) / p.R;
}

CouplingFactors z1_factor(const BvdParams& p, LineImpedance line) {
  line.validate();
  const double f0 = parallel_resonance(p);
  const double w0 = kTwoPi * f0;
  const cplx numerator{1.0 - w0 * w0 * p.L * p.C, w0 * p.R * p.C};
  const cplx z1 = numerator / (w0 * (p.C + p.C0));
  return {Z1Factor{z1}, std::abs(z1) / (2.0 * line.Z0)};
}

cplx impedance_approx(const ResonanceParams& rp, double z1_mag, double f) {
  if (!(f > 0.0)) throw DomainError("impedance_approx: frequency must be positive");
  const double x = (f - rp.f0) / rp.f0;
  return rp.Qi * z1_mag * std::polar(1.0, rp.phi) / cplx{1.0, 2.0 * rp.Qi * x};
}

cplx s21_inverse_model(const ResonanceParams& rp, double f) {
  if (!(f > 0.0)) throw DomainError("s21_inverse_model: frequency must be positive");
  const double x = (f - rp.f0) / rp.f0;
  return 1.0 + std::polar(rp.Qi / rp.Qc, rp.phi) / cplx{1.0, 2.0 * rp.Qi * x};
}

cplx s21_model(const ResonanceParams& rp, double f) { return 1.0 / s21_inverse_model(rp, f); }

double equivalent_phase(const BvdParams& p) { return std::arg(-z1_factor(p).z1.value); }

ResonanceParams to_resonance_params(const BvdParams& p, LineImpedance line) {
  const auto coupling = z1_factor(p, line);
  return {parallel_resonance(p), internal_q(p), coupling.Qc, std::arg(-coupling.z1.value)};
}

BvdParams bvd_from_resonance(double f0, double Qi, double Qc, double capacitance_ratio,
                             LineImpedance line) {
  line.validate();
  if (!positive_finite(f0) || !positive_finite(Qi) || !positive_finite(Qc) ||
      !positive_finite(capacitance_ratio)) {
    throw DomainError("bvd_from_resonance: all targets must be positive");
  }
  const double k = capacitance_ratio;
  const double w0 = kTwoPi * f0;
  // At the parallel resonance |Z1| = k sqrt(1 + ((1+k)/(k Qi))^2) / (w0 C0 (1+k)).
  const double loss_term = (1.0 + k) / (k * Qi);
  const double z1_mag = 2.0 * line.Z0 * Qc;
  BvdParams p;
  p.C0 = k * std::sqrt(1.0 + loss_term * loss_term) / (w0 * (1.0 + k) * z1_mag);
  p.C = k * p.C0;
  const double c_series = p.C * p.C0 / (p.C + p.C0);
  p.L = 1.0 / (w0 * w0 * c_series);
  p.R = w0 * p.L / Qi;
  return p;
}

BvdParams default_device() { return bvd_from_resonance(4.88e9, 4.3e4, 1.0e4, 0.02); }

}  // namespace qbar::bvd
