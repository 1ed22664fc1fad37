#include "oed/summary.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace oed {

SummaryStats summarize(const std::vector<double>& estimates, const std::vector<bool>& in_range, double true_theta,
                       double duration, std::string control) {
  if (estimates.size() != in_range.size()) throw std::invalid_argument("summarize: length mismatch");
  SummaryStats s;
  s.duration = duration;
  s.control = std::move(control);
  s.true_theta = true_theta;
  s.n = estimates.size();
  if (s.n == 0) return s;
  double sum = 0;
  std::size_t inside = 0;
  for (std::size_t k = 0; k < s.n; ++k) {
    sum += estimates[k];
    inside += in_range[k];
  }
  s.mean = sum / static_cast<double>(s.n);
  s.bias = s.mean - true_theta;
  s.in_range = static_cast<double>(inside) / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0;
    for (double e : estimates) ss += (e - s.mean) * (e - s.mean);
    s.std_dev = std::sqrt(ss / static_cast<double>(s.n - 1));
    s.std_dev_err = s.std_dev / std::sqrt(2.0 * static_cast<double>(s.n - 1));
  }
  return s;
}

std::string format_significant(double v, int digits) {
  std::ostringstream os;
  os << std::setprecision(digits) << v;
  return os.str();
}

void emit_table(const std::vector<SummaryStats>& rows, std::ostream& os, TableStyle style) {
  const std::vector<std::string> header = {"Duration", "Control", "N",    "In-range",
                                           "Mean",     "Bias",    "Std.Dev", "Std.Dev.Err"};
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows)
    cells.push_back({format_significant(r.duration), r.control, std::to_string(r.n),
                     format_significant(100.0 * r.in_range) + "%", format_significant(r.mean),
                     format_significant(r.bias), format_significant(r.std_dev), format_significant(r.std_dev_err)});

  if (style == TableStyle::delimited) {
    auto line = [&](const std::vector<std::string>& f) {
      for (std::size_t k = 0; k < f.size(); ++k) os << (k ? "," : "") << f[k];
      os << '\n';
    };
    line(header);
    for (const auto& c : cells) line(c);
    return;
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t k = 0; k < header.size(); ++k) {
    width[k] = header[k].size();
    for (const auto& c : cells) width[k] = std::max(width[k], c[k].size());
  }
  auto line = [&](const std::vector<std::string>& f) {
    for (std::size_t k = 0; k < f.size(); ++k) os << (k ? "  " : "") << std::setw(static_cast<int>(width[k])) << f[k];
    os << '\n';
  };
  line(header);
  for (const auto& c : cells) line(c);
}

}  // namespace oed
