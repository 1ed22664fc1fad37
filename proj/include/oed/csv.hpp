#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace oed {

/// 17 significant digits, enough to round-trip any double.
std::string format_double(double v);

/// Shortest decimal string that parses back to exactly v.
std::string format_shortest(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name, or -1.
  int column(const std::string& name) const;
};

/// Comma-delimited text with a header line; blank lines and lines starting with '#' are skipped.
CsvTable read_csv(std::istream& is);
CsvTable read_csv_file(const std::string& path);

void write_csv_row(std::ostream& os, const std::vector<std::string>& fields);

/// Strict decimal parse of the whole string; throws std::invalid_argument.
double parse_double(const std::string& s);

}  // namespace oed
