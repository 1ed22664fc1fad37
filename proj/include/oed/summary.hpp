#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace oed {

/// Batch aggregate shaped like a row of a results table.
struct SummaryStats {
  double duration = 0;
  std::string control;
  std::size_t n = 0;
  double in_range = 0;  // fraction
  double mean = 0;
  double bias = 0;
  double std_dev = 0;
  double std_dev_err = 0;  // std_dev / sqrt(2 (n - 1))
  double true_theta = 0;
  std::size_t failures = 0;
};

SummaryStats summarize(const std::vector<double>& estimates, const std::vector<bool>& in_range, double true_theta,
                       double duration, std::string control);

enum class TableStyle { delimited, aligned };

/// Columns Duration | Control | N | In-range | Mean | Bias | Std.Dev | Std.Dev.Err.
void emit_table(const std::vector<SummaryStats>& rows, std::ostream& os, TableStyle style = TableStyle::aligned);

/// Shortest decimal form with `digits` significant digits.
std::string format_significant(double v, int digits = 4);

}  // namespace oed
