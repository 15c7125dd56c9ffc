#include "qbar/io/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

#include "qbar/errors.hpp"
#include "qbar/grid.hpp"

namespace qbar::io {

namespace {

using P = Provenance;

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

const ConfigKey* find_key(std::string_view name) {
  for (const auto& k : config_schema()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

}  // namespace

std::string_view provenance_name(Provenance p) {
  switch (p) {
    case P::reported:
      return "reported";
    case P::derived:
      return "derived";
    case P::chosen:
      return "chosen";
  }
  return "";
}

const std::vector<ConfigKey>& config_schema() {
  static const std::vector<ConfigKey> schema = {
      {"seed", "", P::chosen, "noise seed; required when synth.noise_sigma > 0"},
      {"resonance.f0", "4.88e9", P::reported, "resonance frequency (Hz)"},
      {"resonance.Qi", "4.3e4", P::reported, "internal quality factor"},
      {"resonance.Qc", "1e4", P::chosen, "coupling quality factor"},
      {"resonance.phi", "0", P::chosen, "impedance-mismatch phase (rad)"},
      {"synth.model", "lorentzian", P::chosen, "line shape: lorentzian or bvd"},
      {"synth.capacitance_ratio", "0.02", P::chosen, "C/C0 of the bvd circuit"},
      {"synth.span_linewidths", "20", P::chosen, "sweep width in units of f0/Qi"},
      {"synth.points", "801", P::chosen, "number of frequency points"},
      {"synth.noise_sigma", "0", P::chosen, "complex noise sigma per point"},
      {"baseline.amplitude", "1", P::chosen, "baseline amplitude at f0"},
      {"baseline.slope", "0", P::chosen, "baseline amplitude slope (1/Hz)"},
      {"baseline.phase", "0", P::chosen, "baseline phase at f0 (rad)"},
      {"baseline.delay", "0", P::chosen, "cable delay (s)"},
      {"fit.edge_fraction", "0.2", P::chosen, "fraction of points per side used for the baseline"},
      {"fit.weighting", "propagated", P::chosen, "propagated or uniform"},
      {"system.f_q", "4.86e9", P::reported, "qubit frequency (Hz)"},
      {"system.f_r", "4.86e9", P::reported, "primary mode frequency (Hz)"},
      {"system.f_spur", "4.87e9", P::reported, "spurious mode frequency (Hz)"},
      {"system.g", "5.6e6", P::derived, "half splitting with the primary mode at full coupling (Hz)"},
      {"system.g_spur", "1.75e6", P::derived, "half splitting with the spurious mode (Hz)"},
      {"system.T1_qb", "10e-6", P::reported, "qubit energy relaxation time (s)"},
      {"system.T2_qb", "1e-6", P::reported, "qubit Ramsey dephasing time (s)"},
      {"system.T1_r", "178e-9", P::reported, "primary mode lifetime (s)"},
      {"system.T1_spur", "70e-9", P::reported, "spurious mode lifetime (s)"},
      {"hilbert.primary_levels", "3", P::chosen, "Fock levels of the primary mode"},
      {"hilbert.spur_levels", "3", P::chosen, "Fock levels of the spurious mode"},
      {"sim.dt", "0", P::chosen, "integrator step (s); 0 selects it from the generator norm"},
      {"drive.amplitude", "0.1e6", P::chosen, "spectroscopy drive Rabi rate (Hz)"},
      {"drive.duration", "1e-6", P::reported, "spectroscopy drive duration (s)"},
      {"spectroscopy.g", "4.8e6", P::derived, "coupling for sim-spectroscopy and sim-eigen (Hz)"},
      {"spectroscopy.fq_start", "4.835e9", P::chosen, "first qubit frequency (Hz)"},
      {"spectroscopy.fq_stop", "4.885e9", P::chosen, "last qubit frequency (Hz)"},
      {"spectroscopy.fq_points", "26", P::chosen, "qubit frequency points"},
      {"spectroscopy.drive_start", "4.835e9", P::chosen, "first drive frequency (Hz)"},
      {"spectroscopy.drive_stop", "4.885e9", P::chosen, "last drive frequency (Hz)"},
      {"spectroscopy.drive_points", "51", P::chosen, "drive frequency points"},
      {"eigen.fq_start", "4.82e9", P::chosen, "first qubit frequency (Hz)"},
      {"eigen.fq_stop", "4.91e9", P::chosen, "last qubit frequency (Hz)"},
      {"eigen.fq_points", "901", P::chosen, "qubit frequency points"},
      {"t1.delay_max", "1e-6", P::chosen, "longest idle delay (s)"},
      {"t1.points", "41", P::chosen, "number of delays"},
      {"t1.pi_pulse_amplitude", "", P::chosen, "finite pi pulse Rabi rate (Hz); unset: ideal flip"},
      {"chevron.detuning_span", "25e6", P::chosen, "qubit detuning range +- around f_r (Hz)"},
      {"chevron.fq_points", "51", P::chosen, "qubit frequency points"},
      {"chevron.t_max", "300e-9", P::chosen, "longest interaction time (s)"},
      {"chevron.t_points", "151", P::chosen, "interaction time points"},
      {"chevron.extra_qubit_decay", "0", P::chosen, "added qubit decay rate while coupled (1/s)"},
  };
  return schema;
}

Config::Config() {
  for (const auto& k : config_schema()) values_[k.name] = k.default_value;
}

void Config::merge_text(std::string_view text, std::string_view origin) {
  std::map<std::string, std::size_t> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    const std::string_view line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw ParseError(line_no, "missing key");
    const std::string where = std::string(origin) + " line " + std::to_string(line_no);
    if (!find_key(key)) throw ConfigError(where + ": unknown key '" + key + "'");
    if (const auto it = seen.find(key); it != seen.end()) {
      throw ConfigError(where + ": '" + key + "' already set on line " + std::to_string(it->second));
    }
    seen[key] = line_no;
    values_[key] = value;
  }
}

void Config::set(std::string_view assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ConfigError("expected key=value, got '" + std::string(assignment) + "'");
  set(std::string(trim(assignment.substr(0, eq))), std::string(trim(assignment.substr(eq + 1))));
}

void Config::set(const std::string& key, const std::string& value) {
  if (!find_key(key)) throw ConfigError("unknown key '" + key + "'");
  values_[key] = value;
}

bool Config::has(const std::string& key) const { return !text(key).empty(); }

std::string Config::text(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown key '" + key + "'");
  return it->second;
}

double Config::number(const std::string& key) const {
  const std::string s = text(key);
  if (s == "inf" || s == "+inf") return HUGE_VAL;
  double v = 0.0;
  const char* first = s.data() + (!s.empty() && s.front() == '+' ? 1 : 0);
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size() || std::isnan(v)) {
    throw ConfigError(key + ": expected a number, got '" + s + "'");
  }
  return v;
}

std::size_t Config::count(const std::string& key) const {
  const std::string s = text(key);
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + s + "'");
  }
  return v;
}

std::uint64_t Config::seed() const {
  if (!has("seed")) throw ConfigError("seed: required for a stochastic run");
  const std::string s = text("seed");
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw ConfigError("seed: expected a non-negative integer");
  return v;
}

std::vector<std::pair<std::string, std::string>> Config::entries() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& k : config_schema()) out.emplace_back(k.name, values_.at(k.name));
  return out;
}

namespace {

template <class F>
auto checked(F&& build) {
  try {
    return build();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

bvd::ResonanceParams resonance_params(const Config& c) {
  return checked([&] {
    bvd::ResonanceParams rp{c.number("resonance.f0"), c.number("resonance.Qi"), c.number("resonance.Qc"),
                            c.number("resonance.phi")};
    rp.validate();
    return rp;
  });
}

SynthModel synth_model(const Config& c) {
  const auto rp = resonance_params(c);
  const std::string model = c.text("synth.model");
  if (model == "lorentzian") return rp;
  if (model == "bvd") {
    return checked([&] { return bvd::bvd_from_resonance(rp.f0, rp.Qi, rp.Qc, c.number("synth.capacitance_ratio")); });
  }
  throw ConfigError("synth.model: expected lorentzian or bvd, got '" + model + "'");
}

std::vector<double> synth_grid(const Config& c) {
  const auto rp = resonance_params(c);
  const double span = c.number("synth.span_linewidths");
  const std::size_t n = c.count("synth.points");
  if (!(span > 0.0)) throw ConfigError("synth.span_linewidths must be positive");
  if (n < 16) throw ConfigError("synth.points must be at least 16");
  const double half = 0.5 * span * rp.f0 / rp.Qi;
  return linspace(rp.f0 - half, rp.f0 + half, n);
}

fit::BaselineModel baseline_model(const Config& c) {
  return checked([&] {
    fit::BaselineModel b;
    b.amplitude_offset = c.number("baseline.amplitude");
    b.amplitude_slope = c.number("baseline.slope");
    b.phase_offset = c.number("baseline.phase");
    b.group_delay = c.number("baseline.delay");
    b.reference_freq = c.number("resonance.f0");
    b.validate();
    return b;
  });
}

sim::SystemParams system_params(const Config& c) {
  return checked([&] {
    sim::SystemParams sp;
    sp.f_q = c.number("system.f_q");
    sp.f_r = c.number("system.f_r");
    sp.f_spur = c.number("system.f_spur");
    sp.g = c.number("system.g");
    sp.g_spur = c.number("system.g_spur");
    sp.T1_qb = c.number("system.T1_qb");
    sp.T2_qb = c.number("system.T2_qb");
    sp.T1_r = c.number("system.T1_r");
    sp.T1_spur = c.number("system.T1_spur");
    sp.validate();
    return sp;
  });
}

sim::HilbertConfig hilbert_config(const Config& c) {
  sim::HilbertConfig hc{c.count("hilbert.primary_levels"), c.count("hilbert.spur_levels")};
  hc.validate();
  return hc;
}

sim::EvolveOptions evolve_options(const Config& c) {
  sim::EvolveOptions o;
  o.dt = c.number("sim.dt");
  if (!(o.dt >= 0.0) || std::isinf(o.dt)) throw ConfigError("sim.dt must be finite and >= 0");
  return o;
}

sim::DriveParams drive_params(const Config& c) {
  return checked([&] {
    sim::DriveParams d;
    d.amplitude = c.number("drive.amplitude");
    d.duration = c.number("drive.duration");
    d.frequency = c.number("system.f_q");
    d.validate();
    return d;
  });
}

}  // namespace qbar::io
