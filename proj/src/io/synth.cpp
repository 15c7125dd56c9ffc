#include "qbar/io/synth.hpp"

#include <cmath>
#include <random>

#include "qbar/errors.hpp"

namespace qbar::io {

fit::ComplexTrace synth_trace(const SynthModel& model, std::span<const double> freqs, const SynthOptions& options) {
  if (freqs.empty()) throw ArgumentError("synth_trace: empty frequency grid");
  if (!(options.noise_sigma >= 0.0)) throw ArgumentError("synth_trace: noise sigma must be non-negative");
  options.baseline.validate();

  fit::ComplexTrace t;
  t.freqs.assign(freqs.begin(), freqs.end());
  t.values.resize(freqs.size());
  t.reference_impedance = options.line.Z0;

  if (const auto* rp = std::get_if<bvd::ResonanceParams>(&model)) {
    rp->validate();
    t.source = "synthetic:resonance";
    for (std::size_t k = 0; k < freqs.size(); ++k) t.values[k] = bvd::s21_model(*rp, freqs[k]);
  } else {
    const auto& bp = std::get<bvd::BvdParams>(model);
    bp.validate();
    t.source = "synthetic:bvd";
    const double z1 = std::abs(bvd::z1_factor(bp, options.line).z1.value);
    const double scale = 2.0 * options.line.Z0 / (z1 * z1);
    for (std::size_t k = 0; k < freqs.size(); ++k) {
      t.values[k] = 1.0 / (1.0 + scale * bvd::impedance_exact(bp, freqs[k]));
    }
  }

  for (std::size_t k = 0; k < freqs.size(); ++k) t.values[k] *= options.baseline.evaluate(freqs[k]);

  if (options.noise_sigma > 0.0) {
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> normal(0.0, options.noise_sigma / std::sqrt(2.0));
    for (auto& v : t.values) {
      const double re = normal(rng);
      const double im = normal(rng);
      v += bvd::cplx{re, im};
    }
  }
  return t;
}

}  // namespace qbar::io
