#pragma once

// Flat "key = value" run configuration with a fixed schema. Lines starting
// with '#' are comments. Every key has a default and a provenance label.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qbar/bvd_model.hpp"
#include "qbar/io/synth.hpp"
#include "qbar/protocols.hpp"
#include "qbar/quantum_sim.hpp"

namespace qbar::io {

enum class Provenance {
  reported,  // value reported for the measured device
  derived,   // follows from reported values
  chosen,    // numerical or presentation choice
};

std::string_view provenance_name(Provenance p);

struct ConfigKey {
  std::string name;
  std::string default_value;  // empty: unset
  Provenance provenance;
  std::string help;
};

const std::vector<ConfigKey>& config_schema();

class Config {
 public:
  // Schema defaults.
  Config();

  // Applies "key = value" lines. Throws ParseError for malformed lines and
  // ConfigError (message carries the origin and line) for unknown or
  // repeated keys.
  void merge_text(std::string_view text, std::string_view origin = "config");
  // Applies one "key=value" assignment.
  void set(std::string_view assignment);
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const;  // set to a non-empty value
  std::string text(const std::string& key) const;
  double number(const std::string& key) const;  // accepts "inf"
  std::size_t count(const std::string& key) const;
  std::uint64_t seed() const;  // ConfigError when unset

  // Current values in schema order.
  std::vector<std::pair<std::string, std::string>> entries() const;

 private:
  std::map<std::string, std::string> values_;
};

// Domain objects built from a configuration. Each validates its result.
bvd::ResonanceParams resonance_params(const Config& c);
SynthModel synth_model(const Config& c);
std::vector<double> synth_grid(const Config& c);
fit::BaselineModel baseline_model(const Config& c);
sim::SystemParams system_params(const Config& c);
sim::HilbertConfig hilbert_config(const Config& c);
sim::EvolveOptions evolve_options(const Config& c);
sim::DriveParams drive_params(const Config& c);

}  // namespace qbar::io
