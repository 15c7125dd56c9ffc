#pragma once

// Comma-separated numeric tables: one header row, '#' comment lines, numbers
// printed with 12 significant digits.

#include <string>
#include <string_view>
#include <vector>

#include "qbar/grid.hpp"
#include "qbar/resonator_fit.hpp"

namespace qbar::io {

inline constexpr int kOutputDigits = 12;

// %.12g; non-finite values print as nan / inf / -inf.
std::string format_number(double v);

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> comments;  // emitted as "# text" before the header

  std::size_t column(std::string_view name) const;  // DataError when absent
};

std::string emit_csv(const Table& table);

// Throws ParseError (with line number) on a missing header, a ragged row or a
// token that is not a number.
Table parse_csv(std::string_view text);

// Columns freq_hz, re, im.
Table trace_table(const fit::ComplexTrace& trace);
fit::ComplexTrace trace_from_table(const Table& table);

// Long format: one row per grid point, axis0 outer, axis1 inner.
Table grid_table(const GridMap& map, const std::string& axis0_name, const std::string& axis1_name,
                 const std::string& value_name);

// Rebuilds the axes from the unique values of the first two columns in order
// of appearance; the rows must cover the full product grid in row-major order.
GridMap grid_from_table(const Table& table);

}  // namespace qbar::io
