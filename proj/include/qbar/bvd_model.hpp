#pragma once

// Butterworth-van Dyke forward models for a piezoelectric resonance: the exact
// lumped-circuit impedance, the Lorentzian approximation near the parallel
// resonance, and the normalized inverse-transmission line shape used for
// fitting. All frequencies are in Hz.

#include <complex>
#include <numbers>

namespace qbar::bvd {

using cplx = std::complex<double>;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Series R-L-C motional branch shunted by C0.
struct BvdParams {
  double R = 0.0;   // ohm
  double L = 0.0;   // henry
  double C = 0.0;   // farad
  double C0 = 0.0;  // farad

  void validate() const;
};

// Phenomenological parameters of the inverse-transmission line shape.
struct ResonanceParams {
  double f0 = 0.0;
  double Qi = 0.0;
  double Qc = 0.0;
  double phi = 0.0;  // radians, kept in (-pi, pi]

  void validate() const;
};

struct LineImpedance {
  double Z0 = 50.0;

  void validate() const;
};

struct Z1Factor {
  cplx value;
};

struct CouplingFactors {
  Z1Factor z1;
  double Qc = 0.0;
};

// Maps any angle into (-pi, pi].
double wrap_phase(double phi);

// (1/(i w C0)) || (R + i w L + 1/(i w C)). Throws DomainError for f <= 0.
cplx impedance_exact(const BvdParams& p, double f);

// 1/(2 pi sqrt(LC)).
double series_resonance(const BvdParams& p);

// sqrt((C + C0)/(L C C0)) / 2 pi; always above the series resonance.
double parallel_resonance(const BvdParams& p);

// sqrt(L (C + C0)/(C C0)) / R.
double internal_q(const BvdParams& p);

// Z1 = (1 + i 2 pi f0 R C - 4 pi^2 f0^2 L C) / (2 pi f0 (C + C0)) evaluated at
// the parallel resonance, and Qc = |Z1| / (2 Z0). The expression is used
// exactly as written; Qc is taken as defined by it.
CouplingFactors z1_factor(const BvdParams& p, LineImpedance line = {});

// Qi |Z1| e^{i phi} / (1 + 2 i Qi (f - f0)/f0).
cplx impedance_approx(const ResonanceParams& rp, double z1_mag, double f);

// 1 + e^{i phi} (Qi/Qc) / (1 + 2 i Qi (f - f0)/f0).
cplx s21_inverse_model(const ResonanceParams& rp, double f);

// Reciprocal of s21_inverse_model.
cplx s21_model(const ResonanceParams& rp, double f);

// Phase that makes impedance_approx coincide with impedance_exact at f0:
// arg(-Z1).
double equivalent_phase(const BvdParams& p);

// f0, Qi and Qc from the circuit; phi from equivalent_phase.
ResonanceParams to_resonance_params(const BvdParams& p, LineImpedance line = {});

// Inverse of to_resonance_params for (f0, Qi, Qc), given the capacitance
// ratio C/C0. Closed form; used to build synthetic circuits.
BvdParams bvd_from_resonance(double f0, double Qi, double Qc, double capacitance_ratio,
                             LineImpedance line = {});

// Synthetic stand-in for the measured device (f0 = 4.88 GHz, Qi = 4.3e4).
// The circuit values themselves are not measured quantities.
BvdParams default_device();

}  // namespace qbar::bvd
