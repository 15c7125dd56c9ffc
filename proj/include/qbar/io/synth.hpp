#pragma once

#include <cstdint>
#include <span>
#include <variant>

#include "qbar/bvd_model.hpp"
#include "qbar/resonator_fit.hpp"

namespace qbar::io {

// Line-shape source for a synthetic trace. A BvdParams model uses the exact
// circuit impedance mapped onto the normalized inverse transmission with the
// Qc = |Z1|/(2 Z0) convention: 1/S21 = 1 + 2 Z0 Z(f) / |Z1|^2, which
// coincides with the Lorentzian line shape at resonance.
using SynthModel = std::variant<bvd::ResonanceParams, bvd::BvdParams>;

struct SynthOptions {
  fit::BaselineModel baseline;  // identity by default
  double noise_sigma = 0.0;     // per-point complex sigma, E|n|^2 = sigma^2
  std::uint64_t seed = 0;
  bvd::LineImpedance line;
};

// Deterministic for a fixed seed; noise is independent complex Gaussian.
fit::ComplexTrace synth_trace(const SynthModel& model, std::span<const double> freqs, const SynthOptions& options);

}  // namespace qbar::io
