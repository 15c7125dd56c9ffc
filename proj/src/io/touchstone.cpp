#include "qbar/io/touchstone.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <optional>

#include "qbar/errors.hpp"

namespace qbar::io {

namespace {

std::string upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    const std::size_t start = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

std::optional<double> to_number(std::string_view tok) {
  double v = 0.0;
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

struct OptionLine {
  FrequencyUnit unit = FrequencyUnit::GHz;
  DataFormat format = DataFormat::mag_angle;
  double r = 50.0;
};

OptionLine parse_options(std::string_view body, std::size_t line) {
  OptionLine opt;
  const auto toks = split_ws(body);
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const std::string t = upper(toks[i]);
    if (t == "HZ") {
      opt.unit = FrequencyUnit::Hz;
    } else if (t == "KHZ") {
      opt.unit = FrequencyUnit::kHz;
    } else if (t == "MHZ") {
      opt.unit = FrequencyUnit::MHz;
    } else if (t == "GHZ") {
      opt.unit = FrequencyUnit::GHz;
    } else if (t == "S") {
      // scattering parameters: the only kind supported
    } else if (t == "Y" || t == "Z" || t == "H" || t == "G") {
      throw ParseError(line, "only S parameters are supported, found '" + std::string(toks[i]) + "'");
    } else if (t == "RI") {
      opt.format = DataFormat::real_imag;
    } else if (t == "MA") {
      opt.format = DataFormat::mag_angle;
    } else if (t == "DB") {
      opt.format = DataFormat::db_angle;
    } else if (t == "R") {
      if (i + 1 >= toks.size()) throw ParseError(line, "reference impedance missing after R");
      const auto r = to_number(toks[++i]);
      if (!r || !(*r > 0.0)) throw ParseError(line, "invalid reference impedance '" + std::string(toks[i]) + "'");
      opt.r = *r;
    } else {
      throw ParseError(line, "unknown option '" + std::string(toks[i]) + "'");
    }
  }
  return opt;
}

std::complex<double> to_linear(double a, double b, DataFormat format) {
  constexpr double deg = std::numbers::pi / 180.0;
  switch (format) {
    case DataFormat::real_imag:
      return {a, b};
    case DataFormat::mag_angle:
      return std::polar(a, b * deg);
    case DataFormat::db_angle:
      return std::polar(std::pow(10.0, a / 20.0), b * deg);
  }
  return {};
}

}  // namespace

double unit_scale(FrequencyUnit unit) {
  switch (unit) {
    case FrequencyUnit::Hz:
      return 1.0;
    case FrequencyUnit::kHz:
      return 1e3;
    case FrequencyUnit::MHz:
      return 1e6;
    case FrequencyUnit::GHz:
      return 1e9;
  }
  return 1.0;
}

TouchstoneFile parse_touchstone_file(std::string_view text, int ports) {
  if (ports != 0 && ports != 1 && ports != 2) throw ArgumentError("only one- and two-port files are supported");
  TouchstoneFile file;
  file.ports = ports;
  bool have_options = false;
  std::vector<double> pending;
  std::size_t record_line = 0;
  std::size_t line_no = 0;
  bool any_content = false;

  const auto flush = [&](bool final) {
    if (pending.empty()) return;
    if (file.ports == 0) {
      if (pending.size() == 3) {
        file.ports = 1;
      } else if (pending.size() == 9) {
        file.ports = 2;
      } else if (final || pending.size() > 9) {
        throw ParseError(record_line, "expected 3 or 9 numbers per record, found " + std::to_string(pending.size()));
      } else {
        return;  // record may continue on the next line
      }
    }
    const std::size_t need = file.ports == 1 ? 3 : 9;
    if (pending.size() < need && !final) return;
    if (pending.size() != need) {
      throw ParseError(record_line, "expected " + std::to_string(need) + " numbers per record, found " +
                                        std::to_string(pending.size()));
    }
    const double f = pending[0] * unit_scale(file.unit);
    if (!(f > 0.0)) throw ParseError(record_line, "frequency must be positive");
    if (!file.freqs.empty() && !(f > file.freqs.back())) {
      throw ParseError(record_line, "frequencies must be strictly increasing");
    }
    std::vector<std::complex<double>> row;
    for (std::size_t k = 1; k + 1 < need + 1; k += 2) row.push_back(to_linear(pending[k], pending[k + 1], file.format));
    file.freqs.push_back(f);
    file.rows.push_back(std::move(row));
    pending.clear();
  };

  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    const std::size_t bang = line.find('!');
    if (bang != std::string_view::npos) {
      std::string_view comment = line.substr(bang + 1);
      while (!comment.empty() && std::isspace(static_cast<unsigned char>(comment.front()))) comment.remove_prefix(1);
      file.comments.emplace_back(comment);
      line = line.substr(0, bang);
      any_content = true;
    }
    const auto toks = split_ws(line);
    if (toks.empty()) continue;
    any_content = true;
    if (toks[0].front() == '#') {
      if (have_options) throw ParseError(line_no, "second option line");
      if (!file.freqs.empty() || !pending.empty()) throw ParseError(line_no, "option line after data");
      const std::size_t hash = line.find('#');
      const OptionLine opt = parse_options(line.substr(hash + 1), line_no);
      file.unit = opt.unit;
      file.format = opt.format;
      file.reference_impedance = opt.r;
      have_options = true;
    } else if (toks[0].front() == '[') {
      throw ParseError(line_no, "Touchstone version 2 keywords are not supported");
    } else {
      if (!have_options) throw ParseError(line_no, "data before the option line");
      // A new frequency starts a record unless the pending one is incomplete.
      if (pending.empty()) record_line = line_no;
      for (auto tok : toks) {
        const auto v = to_number(tok);
        if (!v) throw ParseError(line_no, "not a number: '" + std::string(tok) + "'");
        pending.push_back(*v);
      }
      flush(false);
    }
  }
  flush(true);
  if (!any_content) throw ParseError(0, "empty input");
  if (file.freqs.empty()) throw ParseError(line_no, "no data records");
  return file;
}

fit::ComplexTrace parse_touchstone(std::string_view text, int ports) {
  const TouchstoneFile file = parse_touchstone_file(text, ports);
  fit::ComplexTrace trace;
  trace.freqs = file.freqs;
  trace.reference_impedance = file.reference_impedance;
  trace.comments = file.comments;
  trace.is_reflection = file.ports == 1;
  trace.source = file.ports == 1 ? "S11" : "S21";
  trace.values.reserve(file.rows.size());
  for (const auto& row : file.rows) trace.values.push_back(file.ports == 1 ? row[0] : row[1]);
  return trace;
}

int ports_from_filename(std::string_view name) {
  const std::string u = upper(name);
  const auto ends = [&](std::string_view suffix) {
    return u.size() >= suffix.size() && u.compare(u.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (ends(".S1P")) return 1;
  if (ends(".S2P")) return 2;
  return 0;
}

std::string emit_touchstone(const fit::ComplexTrace& trace) {
  if (trace.freqs.size() != trace.values.size()) throw ArgumentError("trace sizes differ");
  std::string out;
  for (const auto& c : trace.comments) out += "! " + c + "\n";
  char buf[160];
  std::snprintf(buf, sizeof buf, "# Hz S RI R %.17g\n", trace.reference_impedance);
  out += buf;
  for (std::size_t i = 0; i < trace.freqs.size(); ++i) {
    const auto v = trace.values[i];
    if (trace.is_reflection) {
      std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", trace.freqs[i], v.real(), v.imag());
    } else {
      std::snprintf(buf, sizeof buf, "%.17g 0 0 %.17g %.17g %.17g %.17g 0 0\n", trace.freqs[i], v.real(), v.imag(),
                    v.real(), v.imag());
    }
    out += buf;
  }
  return out;
}

}  // namespace qbar::io
