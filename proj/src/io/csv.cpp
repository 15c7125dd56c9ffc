#include "qbar/io/csv.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "qbar/errors.hpp"

namespace qbar::io {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_cell(std::string_view tok, std::size_t line) {
  std::string lower(tok);
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "nan") return std::nan("");
  if (lower == "inf" || lower == "+inf") return HUGE_VAL;
  if (lower == "-inf") return -HUGE_VAL;
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (tok.empty() || ec != std::errc{} || ptr != tok.data() + tok.size()) {
    throw ParseError(line, "not a number: '" + std::string(tok) + "'");
  }
  return v;
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";  // folds -0
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*g", kOutputDigits, v);
  return buf;
}

std::size_t Table::column(std::string_view name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw DataError("missing column '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

std::string emit_csv(const Table& table) {
  std::string out;
  for (const auto& c : table.comments) out += "# " + c + "\n";
  for (std::size_t j = 0; j < table.columns.size(); ++j) {
    if (j) out += ',';
    out += table.columns[j];
  }
  out += '\n';
  for (const auto& row : table.rows) {
    if (row.size() != table.columns.size()) throw ArgumentError("row width differs from header");
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out += ',';
      out += format_number(row[j]);
    }
    out += '\n';
  }
  return out;
}

Table parse_csv(std::string_view text) {
  Table table;
  bool have_header = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    if (line.front() == '#') {
      table.comments.emplace_back(trim(line.substr(1)));
      continue;
    }
    const auto cells = split_commas(line);
    if (!have_header) {
      for (auto c : cells) {
        if (c.empty()) throw ParseError(line_no, "empty column name");
        table.columns.emplace_back(c);
      }
      have_header = true;
      continue;
    }
    if (cells.size() != table.columns.size()) {
      throw ParseError(line_no, "expected " + std::to_string(table.columns.size()) + " fields, found " +
                                    std::to_string(cells.size()));
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (auto c : cells) row.push_back(parse_cell(c, line_no));
    table.rows.push_back(std::move(row));
  }
  if (!have_header) throw ParseError(line_no, "missing header row");
  return table;
}

Table trace_table(const fit::ComplexTrace& trace) {
  Table t;
  t.columns = {"freq_hz", "re", "im"};
  t.comments = trace.comments;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    t.rows.push_back({trace.freqs[i], trace.values[i].real(), trace.values[i].imag()});
  }
  return t;
}

fit::ComplexTrace trace_from_table(const Table& table) {
  const std::size_t f = table.column("freq_hz");
  const std::size_t re = table.column("re");
  const std::size_t im = table.column("im");
  fit::ComplexTrace trace;
  trace.source = "csv";
  trace.comments = table.comments;
  for (const auto& row : table.rows) {
    trace.freqs.push_back(row[f]);
    trace.values.emplace_back(row[re], row[im]);
  }
  return trace;
}

Table grid_table(const GridMap& map, const std::string& axis0_name, const std::string& axis1_name,
                 const std::string& value_name) {
  if (map.values.size() != map.axis0.size() * map.axis1.size()) throw ArgumentError("grid size mismatch");
  Table t;
  t.columns = {axis0_name, axis1_name, value_name};
  t.rows.reserve(map.values.size());
  for (std::size_t i = 0; i < map.axis0.size(); ++i) {
    for (std::size_t j = 0; j < map.axis1.size(); ++j) t.rows.push_back({map.axis0[i], map.axis1[j], map.at(i, j)});
  }
  return t;
}

GridMap grid_from_table(const Table& table) {
  if (table.columns.size() != 3) throw DataError("grid table needs exactly 3 columns");
  GridMap map;
  const auto add_unique = [](std::vector<double>& axis, double v) {
    if (std::find(axis.begin(), axis.end(), v) == axis.end()) axis.push_back(v);
  };
  for (const auto& row : table.rows) {
    add_unique(map.axis0, row[0]);
    add_unique(map.axis1, row[1]);
  }
  if (table.rows.size() != map.axis0.size() * map.axis1.size()) throw DataError("rows do not form a full grid");
  map.values.resize(table.rows.size());
  for (std::size_t k = 0; k < table.rows.size(); ++k) {
    const std::size_t i = k / map.axis1.size();
    const std::size_t j = k % map.axis1.size();
    if (table.rows[k][0] != map.axis0[i] || table.rows[k][1] != map.axis1[j]) {
      throw DataError("grid rows are not in row-major order");
    }
    map.values[k] = table.rows[k][2];
  }
  return map;
}

}  // namespace qbar::io
