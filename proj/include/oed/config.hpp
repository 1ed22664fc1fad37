#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace oed {

/**
 * @brief Parsed run configuration. Sections: model, grid, control, prior,
 * observation, filter, experiment. Every field has a per-model default.
 */
struct RunConfig {
  // [model]
  std::string model;
  std::map<std::string, double> params;

  // [grid]
  std::vector<double> grid_lo, grid_hi;
  std::vector<int> grid_n;
  double grid_dt = 0;
  std::vector<int> grid_r;  // empty: smallest admissible skip factors

  // [control]
  std::vector<double> controls;
  std::string control_mode = "dynamic";  // dynamic | constant
  std::optional<double> constant;

  // [prior]
  double prior_lo = 0, prior_hi = 0;
  int prior_n = 0;
  std::vector<double> prior_values, prior_weights;  // explicit grid overrides lo/hi/n

  // [observation]
  std::string observation_mode = "partial";  // full | partial
  std::vector<int> channels;
  std::vector<double> noise_sd;
  double period = 0;

  // [filter]
  long particles = 1000;
  bool resample = true;
  std::optional<double> nominal_theta;

  // [experiment]
  double dt = 0;
  double horizon = 0;
  long trials = 256;
  std::uint64_t seed = 1;
  std::vector<double> x0;
  bool retain_paths = false;

  bool operator==(const RunConfig&) const = default;
};

/// Names of the shipped models.
const std::vector<std::string>& model_names();

/// Model parameter names in canonical order.
const std::vector<std::string>& model_parameter_names(const std::string& model);

RunConfig default_config(const std::string& model);

/// Parse `[section]` / `key = value` text. Several `key = value` pairs may share a
/// line separated by commas; a comma-separated run without '=' continues a list.
RunConfig parse_config(std::istream& is);
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::string& path);

/// Full config text, parseable back to an equal RunConfig.
std::string dump_config(const RunConfig& cfg);

}  // namespace oed
