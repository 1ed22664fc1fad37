#include "oed/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "oed/csv.hpp"
#include "oed/errors.hpp"

namespace oed {

namespace {

using Params = std::vector<std::pair<std::string, double>>;

const Params& default_params(const std::string& model) {
  static const Params double_well = {{"A", 3.84}, {"w", 0.3}, {"sigma", 0.1}};
  static const Params morris_lecar = {{"c_m", 20},      {"g_k", 8},      {"g_ca", 4.41498308}, {"g_leak", 2},
                                      {"phi", 0.04},    {"v_k", -84},    {"v_leak", -60},      {"v_ca", 120},
                                      {"v1", -1.2},     {"v2", 18},      {"v3", 2},            {"v4", 30},
                                      {"beta_v", 1},    {"beta_w", 0.1}, {"i0", 95}};
  static const Params chemostat = {{"eta_i", 160}, {"rho", 270},     {"chi", 0.0027},
                                   {"kappa", 4.4}, {"sigma1", 0.1}, {"sigma2", 0.1}};
  static const Params ou = {{"beta", 1}, {"sigma", 0.5}};
  if (model == "double_well") return double_well;
  if (model == "morris_lecar") return morris_lecar;
  if (model == "chemostat") return chemostat;
  if (model == "ornstein_uhlenbeck") return ou;
  throw ConfigError("unknown model '" + model + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

struct Entry {
  std::string section, key, value;
  int line;
};

double number(const Entry& e, const std::string& text) {
  try {
    return parse_double(text);
  } catch (const std::invalid_argument&) {
    throw ConfigError("malformed number '" + text + "' for key '" + e.key + "'", e.line);
  }
}

double scalar(const Entry& e) {
  const auto items = split_list(e.value);
  if (items.size() != 1) throw ConfigError("key '" + e.key + "' takes a single value", e.line);
  return number(e, items[0]);
}

std::vector<double> list(const Entry& e) {
  std::vector<double> out;
  for (const auto& item : split_list(e.value)) out.push_back(number(e, item));
  return out;
}

long integer(const Entry& e, const std::string& text) {
  long v = 0;
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || r.ec != std::errc() || r.ptr != text.data() + text.size())
    throw ConfigError("malformed integer '" + text + "' for key '" + e.key + "'", e.line);
  return v;
}

std::vector<int> int_list(const Entry& e) {
  std::vector<int> out;
  for (const auto& item : split_list(e.value)) out.push_back(static_cast<int>(integer(e, item)));
  return out;
}

bool boolean(const Entry& e) {
  const std::string v = trim(e.value);
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw ConfigError("expected true or false for key '" + e.key + "', got '" + v + "'", e.line);
}

std::optional<double> optional_scalar(const Entry& e) {
  if (trim(e.value) == "none") return std::nullopt;
  return scalar(e);
}

std::string word(const Entry& e, std::initializer_list<const char*> allowed) {
  const std::string v = trim(e.value);
  for (const char* a : allowed)
    if (v == a) return v;
  std::string msg = "invalid value '" + v + "' for key '" + e.key + "' (expected";
  for (const char* a : allowed) msg += std::string(" ") + a;
  throw ConfigError(msg + ")", e.line);
}

void apply(RunConfig& c, const Entry& e) {
  const auto& s = e.section;
  const auto& k = e.key;
  auto unknown = [&] { throw ConfigError("unknown key '" + k + "' in [" + s + "]", e.line); };
  if (s == "model") {
    if (k == "name") return;
    const auto& names = model_parameter_names(c.model);
    if (std::find(names.begin(), names.end(), k) == names.end()) unknown();
    c.params[k] = scalar(e);
  } else if (s == "grid") {
    if (k == "lo") c.grid_lo = list(e);
    else if (k == "hi") c.grid_hi = list(e);
    else if (k == "n") c.grid_n = int_list(e);
    else if (k == "dt") c.grid_dt = scalar(e);
    else if (k == "r") c.grid_r = trim(e.value) == "auto" ? std::vector<int>{} : int_list(e);
    else unknown();
  } else if (s == "control") {
    if (k == "values") c.controls = list(e);
    else if (k == "mode") c.control_mode = word(e, {"dynamic", "constant"});
    else if (k == "constant") c.constant = optional_scalar(e);
    else unknown();
  } else if (s == "prior") {
    if (k == "lo") c.prior_lo = scalar(e);
    else if (k == "hi") c.prior_hi = scalar(e);
    else if (k == "n") c.prior_n = static_cast<int>(integer(e, trim(e.value)));
    else if (k == "values") c.prior_values = list(e);
    else if (k == "weights") c.prior_weights = list(e);
    else unknown();
  } else if (s == "observation") {
    if (k == "mode") c.observation_mode = word(e, {"full", "partial"});
    else if (k == "channels") c.channels = int_list(e);
    else if (k == "noise_sd") c.noise_sd = list(e);
    else if (k == "period") c.period = scalar(e);
    else unknown();
  } else if (s == "filter") {
    if (k == "particles") c.particles = integer(e, trim(e.value));
    else if (k == "resample") c.resample = boolean(e);
    else if (k == "nominal_theta") c.nominal_theta = optional_scalar(e);
    else unknown();
  } else if (s == "experiment") {
    if (k == "dt") c.dt = scalar(e);
    else if (k == "horizon") c.horizon = scalar(e);
    else if (k == "trials") c.trials = integer(e, trim(e.value));
    else if (k == "seed") c.seed = static_cast<std::uint64_t>(integer(e, trim(e.value)));
    else if (k == "x0") c.x0 = list(e);
    else if (k == "retain_paths") c.retain_paths = boolean(e);
    else unknown();
  }
}

const std::vector<std::string> kSections = {"model", "grid", "control", "prior", "observation", "filter", "experiment"};
const std::vector<std::string> kRequired = {"model", "control", "prior", "experiment"};

}  // namespace

const std::vector<std::string>& model_names() {
  static const std::vector<std::string> names = {"double_well", "morris_lecar", "chemostat", "ornstein_uhlenbeck"};
  return names;
}

const std::vector<std::string>& model_parameter_names(const std::string& model) {
  static std::map<std::string, std::vector<std::string>> cache = [] {
    std::map<std::string, std::vector<std::string>> m;
    for (const auto& name : model_names())
      for (const auto& p : default_params(name)) m[name].push_back(p.first);
    return m;
  }();
  const auto it = cache.find(model);
  if (it == cache.end()) throw ConfigError("unknown model '" + model + "'");
  return it->second;
}

RunConfig default_config(const std::string& model) {
  RunConfig c;
  c.model = model;
  for (const auto& [k, v] : default_params(model)) c.params[k] = v;
  if (model == "double_well") {
    c.grid_lo = {-5};
    c.grid_hi = {5};
    c.grid_n = {100};
    c.grid_dt = 0.01;
    c.controls = {0, -2, 2, -4, 4, -6, 6, -8, 8, -10, 10};
    c.prior_lo = 2;
    c.prior_hi = 5;
    c.prior_n = 10;
    c.channels = {0};
    c.noise_sd = {0.05};
    c.period = 0.25;
    c.particles = 10000;
    c.dt = 0.01;
    c.horizon = 30;
    c.x0 = {-1};
  } else if (model == "morris_lecar") {
    c.grid_lo = {-80, 0};
    c.grid_hi = {80, 1};
    c.grid_n = {72, 72};
    c.grid_dt = 2;
    c.controls = {0, 3.5, 5};
    c.prior_lo = 4;
    c.prior_hi = 5;
    c.prior_n = 10;
    c.channels = {0};
    c.noise_sd = {0.5};
    c.period = 0.5;
    c.particles = 1000;
    c.dt = 0.5;
    c.horizon = 1000;
    c.x0 = {-60.85, 0.0149};
  } else if (model == "chemostat") {
    c.grid_lo = {-6, -2};
    c.grid_hi = {1, 6};
    c.grid_n = {71, 81};
    c.grid_dt = 0.01;
    c.controls = {0.1, 0.3, 0.5, 0.68};
    c.prior_lo = 3.5;
    c.prior_hi = 5.5;
    c.prior_n = 10;
    c.channels = {0, 1};
    c.noise_sd = {0.025, 0.025};
    c.period = 0.5;
    c.particles = 1000;
    c.dt = 0.01;
    c.horizon = 30;
    c.x0 = {-4, 2};
  } else {
    c.grid_lo = {-4};
    c.grid_hi = {4};
    c.grid_n = {81};
    c.grid_dt = 0.01;
    c.controls = {0, -1, 1};
    c.prior_lo = 0.5;
    c.prior_hi = 1.5;
    c.prior_n = 11;
    c.channels = {0};
    c.noise_sd = {0.1};
    c.period = 0.1;
    c.particles = 1000;
    c.dt = 0.01;
    c.horizon = 10;
    c.x0 = {0};
  }
  return c;
}

RunConfig parse_config(std::istream& is) {
  std::vector<Entry> entries;
  std::map<std::string, int> section_line;
  std::set<std::pair<std::string, std::string>> seen;
  std::string section, raw;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    std::string s = trim(raw.substr(0, raw.find('#')));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("malformed section header '" + s + "'", line);
      section = trim(s.substr(1, s.size() - 2));
      if (std::find(kSections.begin(), kSections.end(), section) == kSections.end())
        throw ConfigError("unknown section [" + section + "]", line);
      if (section_line.count(section)) throw ConfigError("duplicate section [" + section + "]", line);
      section_line[section] = line;
      continue;
    }
    if (section.empty()) throw ConfigError("entry outside of any [section]", line);
    Entry* current = nullptr;
    for (const auto& piece : split_list(s)) {
      const auto eq = piece.find('=');
      if (eq == std::string::npos) {
        if (!current) throw ConfigError("expected 'key = value', got '" + s + "'", line);
        current->value += "," + piece;
        continue;
      }
      Entry e{section, trim(piece.substr(0, eq)), trim(piece.substr(eq + 1)), line};
      if (e.key.empty()) throw ConfigError("missing key before '='", line);
      if (!seen.insert({section, e.key}).second)
        throw ConfigError("duplicate key '" + e.key + "' in [" + section + "]", line);
      entries.push_back(std::move(e));
      current = &entries.back();
    }
  }

  std::string missing;
  for (const auto& r : kRequired)
    if (!section_line.count(r)) missing += (missing.empty() ? "" : ", ") + ("[" + r + "]");
  if (!missing.empty()) throw ConfigError("missing required sections: " + missing);

  const auto name = std::find_if(entries.begin(), entries.end(),
                                 [](const Entry& e) { return e.section == "model" && e.key == "name"; });
  if (name == entries.end()) throw ConfigError("missing required key 'name' in [model]", section_line["model"]);
  if (std::find(model_names().begin(), model_names().end(), name->value) == model_names().end())
    throw ConfigError("unknown model '" + name->value + "'", name->line);

  RunConfig c = default_config(name->value);
  bool prior_range = false, prior_values = false;
  for (const auto& e : entries) {
    apply(c, e);
    if (e.section == "prior") (e.key == "values" || e.key == "weights" ? prior_values : prior_range) = true;
  }
  if (prior_values && !prior_range) c.prior_lo = c.prior_hi = 0, c.prior_n = 0;
  return c;
}

RunConfig parse_config_text(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is);
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(f);
}

std::string dump_config(const RunConfig& c) {
  std::ostringstream os;
  auto join = [](const auto& v) {
    std::string s;
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (k) s += ", ";
      if constexpr (std::is_same_v<std::decay_t<decltype(v[k])>, double>) s += format_shortest(v[k]);
      else s += std::to_string(v[k]);
    }
    return s;
  };
  auto opt = [](const std::optional<double>& v) { return v ? format_shortest(*v) : std::string("none"); };

  os << "[model]\nname = " << c.model << '\n';
  for (const auto& k : model_parameter_names(c.model)) os << k << " = " << format_shortest(c.params.at(k)) << '\n';
  os << "\n[grid]\n"
     << "lo = " << join(c.grid_lo) << "\nhi = " << join(c.grid_hi) << "\nn = " << join(c.grid_n)
     << "\ndt = " << format_shortest(c.grid_dt) << "\nr = " << (c.grid_r.empty() ? "auto" : join(c.grid_r)) << '\n';
  os << "\n[control]\nvalues = " << join(c.controls) << "\nmode = " << c.control_mode
     << "\nconstant = " << opt(c.constant) << '\n';
  os << "\n[prior]\n";
  if (c.prior_values.empty()) {
    os << "lo = " << format_shortest(c.prior_lo) << "\nhi = " << format_shortest(c.prior_hi) << "\nn = " << c.prior_n
       << "\n# values = (explicit grid, replaces lo/hi/n)\n# weights = (defaults to uniform)\n";
  } else {
    os << "values = " << join(c.prior_values) << '\n';
    if (!c.prior_weights.empty()) os << "weights = " << join(c.prior_weights) << '\n';
  }
  os << "\n[observation]\nmode = " << c.observation_mode << "\nchannels = " << join(c.channels)
     << "\nnoise_sd = " << join(c.noise_sd) << "\nperiod = " << format_shortest(c.period) << '\n';
  os << "\n[filter]\nparticles = " << c.particles << "\nresample = " << (c.resample ? "true" : "false")
     << "\nnominal_theta = " << opt(c.nominal_theta) << '\n';
  os << "\n[experiment]\ndt = " << format_shortest(c.dt) << "\nhorizon = " << format_shortest(c.horizon)
     << "\ntrials = " << c.trials << "\nseed = " << c.seed << "\nx0 = " << join(c.x0)
     << "\nretain_paths = " << (c.retain_paths ? "true" : "false") << '\n';
  return os.str();
}

}  // namespace oed
