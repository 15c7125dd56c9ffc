#pragma once

// Touchstone version 1 network-parameter files (.s1p / .s2p).

#include <complex>
#include <string>
#include <string_view>
#include <vector>

#include "qbar/resonator_fit.hpp"

namespace qbar::io {

enum class FrequencyUnit { Hz, kHz, MHz, GHz };
enum class DataFormat { real_imag, mag_angle, db_angle };

struct TouchstoneFile {
  FrequencyUnit unit = FrequencyUnit::GHz;
  DataFormat format = DataFormat::mag_angle;
  double reference_impedance = 50.0;
  int ports = 0;                              // 1 or 2
  std::vector<double> freqs;                  // Hz
  std::vector<std::vector<std::complex<double>>> rows;  // linear, file order
  std::vector<std::string> comments;          // text after '!'
};

double unit_scale(FrequencyUnit unit);

// ports = 0 infers the port count from the first data record (3 numbers per
// one-port record, 9 per two-port record). Throws ParseError with the line
// of the offending record.
TouchstoneFile parse_touchstone_file(std::string_view text, int ports = 0);

// S21 of a two-port file (entries are S11 S21 S12 S22), or S11 of a one-port
// file with is_reflection set. Comments carry over as metadata.
fit::ComplexTrace parse_touchstone(std::string_view text, int ports = 0);

// Port count implied by a .s1p / .s2p file name, 0 otherwise.
int ports_from_filename(std::string_view name);

// Writes frequencies in Hz and values as real/imaginary with 17 significant
// digits so that parsing the output restores every double exactly. A
// transmission trace becomes a reciprocal, matched two-port.
std::string emit_touchstone(const fit::ComplexTrace& trace);

}  // namespace qbar::io
