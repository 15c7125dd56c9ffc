#pragma once

// Pulse sequences over the quantum simulator: spectroscopy map, swap-based
// phonon lifetime measurement, Rabi chevron, and the fits used to read them.

#include <array>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "qbar/grid.hpp"
#include "qbar/quantum_sim.hpp"

namespace qbar::proto {

using sim::DensityState;
using sim::DriveParams;
using sim::EvolveStats;
using sim::HilbertConfig;
using sim::SystemParams;

// Ideal instantaneous pi pulse on the qubit.
struct Excite {};
// Resonant drive on the qubit with the coupler off; evolves in a frame at
// the drive frequency.
struct Drive {
  DriveParams params;
};
struct CouplerOn {
  double g = 0.0;
  double g_spur = 0.0;
  double duration = 0.0;
};
struct Idle {
  double duration = 0.0;
};
struct Measure {};

using Segment = std::variant<Excite, Drive, CouplerOn, Idle, Measure>;

struct Protocol {
  std::vector<Segment> segments;

  // Exactly one Measure, at the end; every duration > 0.
  void validate() const;
  double duration() const;
};

struct ProtocolOptions {
  sim::EvolveOptions evolve;
  // Added to the qubit decay rate (1/s) during CouplerOn segments only.
  double coupler_extra_qubit_decay = 0.0;
};

struct ProtocolResult {
  double pe = 0.0;
  DensityState state;  // in the frame rotating at f_r
  EvolveStats stats;
};

// Evolves from the global ground state; Idle and Drive segments run with the
// coupler off (g = g_spur = 0).
ProtocolResult run_protocol(const Protocol& p, const SystemParams& sp, const HilbertConfig& hc,
                            const ProtocolOptions& options = {});

// Swap time 1 / (2 (2g)) for half splitting g.
double swap_time(double g);

// Drive segment implementing a resonant pi pulse at Rabi rate `amplitude`.
Drive pi_pulse(const SystemParams& sp, double amplitude);

struct ScanOptions {
  ProtocolOptions protocol;
  std::size_t workers = 0;
  std::size_t max_points = 200000;
  // Replace the ideal pi pulse with a resonant drive at this Rabi rate (Hz).
  std::optional<double> pi_pulse_amplitude;
};

struct T1ScanResult {
  std::vector<double> delays;
  std::vector<double> pe;
  double swap_time = 0.0;
  EvolveStats stats;
};

// Excite, swap into the primary mode with the coupler at sp.g (spurious mode
// coupled at sp.g_spur), idle with the coupler off, swap back, measure.
T1ScanResult phonon_t1_scan(const SystemParams& sp, const HilbertConfig& hc, const std::vector<double>& delays,
                            const ScanOptions& options = {});

struct ChevronResult {
  GridMap map;  // axis0 = f_q, axis1 = interaction time
  EvolveStats stats;
};

// Excite at each f_q, hold the coupler on (sp.g, sp.g_spur) for each time,
// measure. One evolution per f_q column.
ChevronResult rabi_chevron(const SystemParams& sp, const HilbertConfig& hc, const std::vector<double>& f_q_grid,
                           const std::vector<double>& times, const ScanOptions& options = {});

struct DecayFit {
  double T1 = 0.0;
  double amplitude = 0.0;
  double offset = 0.0;
  std::array<double, 3> uncertainties{};  // T1, amplitude, offset
  double residual_rms = 0.0;
  bool converged = false;
  bool degenerate = false;  // no resolvable decay
};

// y = offset + amplitude exp(-x / T1) with offset >= 0. Needs >= 5 points
// with y in [0, 1]. Rising or flat data is flagged degenerate.
DecayFit fit_exponential(const std::vector<double>& x, const std::vector<double>& y);

struct OscillationFit {
  double frequency = 0.0;   // Hz
  double visibility = 0.0;  // peak-to-peak
  double mean = 0.0;
  double phase = 0.0;
  double decay_time = 0.0;  // infinite when undamped
  std::array<double, 2> uncertainties{};  // frequency, visibility
  double residual_rms = 0.0;
  bool converged = false;
};

// y = mean + (visibility / 2) cos(2 pi f t + phase). With `damped`, the
// oscillation and a baseline term B both decay:
// y = mean + exp(-t / decay_time) (B + (visibility / 2) cos(2 pi f t + phase)).
// Needs at least one full period in the record.
OscillationFit fit_oscillation(const std::vector<double>& t, const std::vector<double>& y, bool damped = false);

// Q = 2 pi f T1.
double phonon_q_from_t1(double f, double T1);

// Named presets reachable from the command line.
struct SpectroscopyPreset {
  SystemParams sp = SystemParams::spectroscopy_preset();
  HilbertConfig hc;
  DriveParams drive;
  std::vector<double> f_q_grid;
  std::vector<double> f_drive_grid;
};
struct T1SwapPreset {
  SystemParams sp;
  HilbertConfig hc;
  std::vector<double> delays;
};
struct ChevronPreset {
  SystemParams sp;
  HilbertConfig hc;
  std::vector<double> f_q_grid;
  std::vector<double> times;
};

SpectroscopyPreset spectroscopy_preset();
T1SwapPreset t1_swap_preset();
ChevronPreset chevron_preset();
std::vector<std::string> preset_names();

}  // namespace qbar::proto
