#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "oed/config.hpp"
#include "oed/csv.hpp"
#include "oed/errors.hpp"
#include "oed/policy_io.hpp"
#include "oed/run_config.hpp"
#include "oed/summary.hpp"

using namespace oed;

namespace {

// ============================================================================
// Shared helpers
// ============================================================================

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  f.precision(17);
  return f;
}

void print_report(const ValidationReport& rep, const MCAConfig& cfg, std::ostream& os) {
  os << "stability: " << (rep.ok() ? "ok" : "VIOLATED") << '\n';
  for (std::size_t d = 0; d < rep.max_sigma_mu.size(); ++d)
    os << "  dim " << d << ": max Sigma*mu = " << format_significant(rep.max_sigma_mu[d])
       << ", r = " << cfg.r[d] << " (min " << rep.min_r[d] << ")"
       << ", max drift cells = " << format_significant(rep.max_drift_cells[d]) << '\n';
  os << "  largest admissible dt for these r: " << format_significant(rep.max_dt) << '\n';
  if (!rep.ok()) {
    const auto& v = rep.violations.front();
    os << "  " << rep.violations.size() << " violations; first at node " << v.node << ", dimension " << v.dim
       << ", probability " << format_significant(v.probability) << '\n';
  }
}

template <typename M>
PolicyTable load_matching_policy(const std::string& path, const RunConfig& cfg) {
  auto policy = load_policy(path);
  check_policy_matches(policy, std::string(M::name), make_grid(cfg));
  return policy;
}

std::string state_column(int d) { return "x" + std::to_string(d + 1); }
std::string obs_column(Eigen::Index k) { return "y" + std::to_string(k + 1); }

// ============================================================================
// solve
// ============================================================================

struct SolveArgs {
  std::string config, out;
  std::optional<double> horizon;
};

int cmd_solve(const SolveArgs& a) {
  const auto cfg = parse_config_file(a.config);
  const auto grid = make_grid(cfg);
  const auto controls = make_controls(cfg);
  const auto prior = make_prior(cfg);
  const double horizon = a.horizon.value_or(cfg.horizon);
  return std::visit(
      [&](const auto& model) {
        const auto mca = make_mca(cfg, model, grid);
        const auto rep = validate(model, grid, mca, prior.theta(), controls.values());
        print_report(rep, mca, std::cout);
        if (!rep.ok()) throw StabilityError("discretization violates the diffusion probability bound");
        const auto sol = solve_policy(model, grid, mca, controls, prior, horizon);
        save_policy(sol.policy, a.out);
        std::cout << "policy: " << a.out << " (" << sol.policy.steps << " steps x " << grid.size() << " cells)\n";
        return 0;
      },
      make_model(cfg));
}

// ============================================================================
// simulate
// ============================================================================

struct SimulateArgs {
  std::string config, out, policy, observations_dir;
  std::optional<double> constant, horizon;
  std::optional<long> trials, particles;
  std::optional<std::uint64_t> seed;
};

template <typename M>
void write_trial_record(const TrialResult<M>& t, const ExperimentConfig<M>& e, const std::string& dir) {
  auto f = open_out((std::filesystem::path(dir) / ("trial_" + std::to_string(t.trial) + ".csv")).string());
  if (e.regime == ObservationRegime::partial) {
    std::vector<std::string> head{"time"};
    for (Eigen::Index k = 0; k < t.observations.values.rows(); ++k) head.push_back(obs_column(k));
    head.push_back("u");
    write_csv_row(f, head);
    const std::size_t per = e.obs.steps_per_observation(e.dt);
    for (std::size_t k = 0; k < t.observations.size(); ++k) {
      std::vector<std::string> row{format_double(t.observations.times[k])};
      for (Eigen::Index c = 0; c < t.observations.values.rows(); ++c)
        row.push_back(format_double(t.observations.values(c, static_cast<Eigen::Index>(k))));
      row.push_back(format_double(t.path->controls[k * per]));  // control held over the interval ending here
      write_csv_row(f, row);
    }
  } else {
    std::vector<std::string> head{"time"};
    for (int d = 0; d < M::dim; ++d) head.push_back(state_column(d));
    head.push_back("u");
    write_csv_row(f, head);
    const auto& p = *t.path;
    for (std::size_t i = 0; i < p.states.size(); ++i) {
      std::vector<std::string> row{format_double(static_cast<double>(i) * e.dt)};
      for (int d = 0; d < M::dim; ++d) row.push_back(format_double(static_cast<double>(p.states[i](d))));
      row.push_back(i < p.controls.size() ? format_double(p.controls[i]) : "nan");  // control applied from here
      write_csv_row(f, row);
    }
  }
}

int cmd_simulate(const SimulateArgs& a) {
  auto cfg = parse_config_file(a.config);
  if (a.trials) cfg.trials = *a.trials;
  if (a.particles) cfg.particles = *a.particles;
  if (a.seed) cfg.seed = *a.seed;
  if (a.horizon) cfg.horizon = *a.horizon;
  if (!a.policy.empty()) cfg.control_mode = "dynamic";
  if (a.constant) {
    cfg.control_mode = "constant";
    cfg.constant = a.constant;
  }
  if (!a.observations_dir.empty()) cfg.retain_paths = true;
  if (cfg.control_mode == "dynamic" && a.policy.empty())
    throw ConfigError("dynamic control needs --policy (or use --constant)");
  return std::visit(
      [&](const auto& model) {
        using M = std::decay_t<decltype(model)>;
        const auto e = make_experiment(cfg, model);
        std::optional<PolicyTable> policy;
        if (e.mode == ControlMode::dynamic) policy = load_matching_policy<M>(a.policy, cfg);
        const auto batch = run_batch(e, policy ? &*policy : nullptr);

        auto f = open_out(a.out);
        write_csv_row(f, {"duration", "control", "true_theta", "trial", "seed", "estimate", "in_range", "realized_fi",
                          "min_ess_fraction"});
        for (const auto& t : batch.trials)
          write_csv_row(f, {format_double(e.horizon), e.control_label(), format_double(e.true_theta()),
                            std::to_string(t.trial), std::to_string(e.seed), format_double(t.estimate),
                            t.in_range ? "1" : "0", format_double(t.realized_fi), format_double(t.min_ess_fraction)});
        auto s = open_out(std::filesystem::path(a.out).replace_extension(".summary.csv").string());
        emit_table({batch.stats}, s, TableStyle::delimited);

        if (!a.observations_dir.empty()) {
          std::filesystem::create_directories(a.observations_dir);
          for (const auto& t : batch.trials) write_trial_record(t, e, a.observations_dir);
        }
        emit_table({batch.stats}, std::cout, TableStyle::aligned);
        std::cout << "mean realized FI: " << format_significant(batch.mean_realized_fi(), 6) << " +- "
                  << format_significant(batch.realized_fi_se(), 3) << '\n';
        for (const auto& [k, msg] : batch.failures) std::cerr << "trial " << k << " failed: " << msg << '\n';
        return 0;
      },
      make_model(cfg));
}

// ============================================================================
// estimate
// ============================================================================

struct EstimateArgs {
  std::string config, observations, out;
  std::optional<double> constant;
  std::optional<long> particles;
  std::optional<std::uint64_t> seed;
};

double cell(const CsvTable& t, std::size_t row, int col) {
  try {
    return parse_double(t.rows[row][static_cast<std::size_t>(col)]);
  } catch (const std::invalid_argument& e) {
    throw FormatError("observations row " + std::to_string(row + 1) + ": " + e.what());
  }
}

int column_or_throw(const CsvTable& t, const std::string& name) {
  const int c = t.column(name);
  if (c < 0) throw FormatError("observations file lacks column '" + name + "'");
  return c;
}

template <typename M>
LikelihoodCurve estimate_curve(const RunConfig& cfg, const M& model, const CsvTable& data, const EstimateArgs& a) {
  const auto prior = make_prior(cfg);
  const int ucol = data.column("u");
  if (ucol < 0 && !a.constant) throw ConfigError("observations have no 'u' column; pass --constant");
  auto control_at = [&](std::size_t row) { return ucol < 0 ? *a.constant : cell(data, row, ucol); };
  const int tcol = column_or_throw(data, "time");
  if (data.rows.empty()) throw FormatError("observations file has no data rows");

  if (cfg.observation_mode == "full") {
    std::vector<typename M::State> states(data.rows.size());
    std::vector<double> controls;
    for (std::size_t r = 0; r < data.rows.size(); ++r) {
      for (int d = 0; d < M::dim; ++d) states[r](d) = cell(data, r, column_or_throw(data, state_column(d)));
      if (r + 1 < data.rows.size()) controls.push_back(control_at(r));
    }
    const double dt = data.rows.size() > 1 ? cell(data, 1, tcol) - cell(data, 0, tcol) : cfg.dt;
    LikelihoodCurve c{prior.theta(), {}};
    for (double th : prior.theta())
      c.log_likelihood.push_back(static_cast<double>(path_log_likelihood(
          model, std::span<const typename M::State>(states), std::span<const double>(controls), th, dt)));
    return c;
  }

  const auto obs = make_observation(cfg, M::dim);
  ObservationRecord rec;
  rec.values.resize(obs.channels(), static_cast<Eigen::Index>(data.rows.size()));
  std::vector<double> u;
  for (std::size_t r = 0; r < data.rows.size(); ++r) {
    rec.times.push_back(cell(data, r, tcol));
    for (Eigen::Index k = 0; k < obs.channels(); ++k)
      rec.values(k, static_cast<Eigen::Index>(r)) = cell(data, r, column_or_throw(data, obs_column(k)));
    u.push_back(control_at(r));
  }
  // u[k] is held over the interval ending at observation k
  std::size_t next = 0;
  auto replay = [&](std::size_t, double, const typename M::State&) { return u[std::min(next++, u.size() - 1)]; };
  FilterOptions opt;
  opt.particles = a.particles.value_or(cfg.particles);
  opt.resample = cfg.resample;
  opt.designated = detail::nearest_index(prior.theta(), cfg.nominal_theta.value_or(prior.midpoint()));
  typename M::State x0;
  if (cfg.x0.size() != static_cast<std::size_t>(M::dim)) throw ConfigError("[experiment] x0 needs one value per dimension");
  for (int d = 0; d < M::dim; ++d) x0(d) = cfg.x0[static_cast<std::size_t>(d)];
  const std::uint64_t seed = a.seed.value_or(cfg.seed);
  return run_filter(model, obs, rec, prior.theta(), replay, cfg.dt, x0,
                    NoiseStream(seed, stream_id(0, StreamRole::estimation_filter)),
                    NoiseStream(seed, stream_id(0, StreamRole::estimation_resample)), opt)
      .curve;
}

int cmd_estimate(const EstimateArgs& a) {
  const auto cfg = parse_config_file(a.config);
  const auto data = read_csv_file(a.observations);
  const auto curve = std::visit([&](const auto& m) { return estimate_curve(cfg, m, data, a); }, make_model(cfg));
  const auto mle = grid_mle(curve);
  auto f = open_out(a.out);
  write_csv_row(f, {"theta", "log_likelihood"});
  for (std::size_t k = 0; k < curve.theta.size(); ++k)
    write_csv_row(f, {format_double(curve.theta[k]), format_double(curve.log_likelihood[k])});
  std::cout << "estimate: " << format_double(mle.estimate) << '\n';
  std::cout << "in_range: " << (mle.in_range ? "true" : "false") << '\n';
  return 0;
}

// ============================================================================
// report
// ============================================================================

int cmd_report(const std::vector<std::string>& files, bool delimited) {
  std::vector<SummaryStats> rows;
  for (const auto& path : files) {
    const auto t = read_csv_file(path);
    const int dur = t.column("duration"), ctl = t.column("control"), tru = t.column("true_theta"),
              est = t.column("estimate"), inr = t.column("in_range");
    if (dur < 0 || ctl < 0 || tru < 0 || est < 0 || inr < 0)
      throw FormatError("'" + path + "' is not a simulate results file");
    std::vector<std::string> order;
    std::map<std::string, std::pair<std::vector<double>, std::vector<bool>>> groups;
    std::map<std::string, std::pair<double, double>> meta;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const auto& row = t.rows[r];
      const std::string key = row[static_cast<std::size_t>(dur)] + "|" + row[static_cast<std::size_t>(ctl)] + "|" +
                              row[static_cast<std::size_t>(tru)];
      if (!groups.count(key)) {
        order.push_back(key);
        meta[key] = {parse_double(row[static_cast<std::size_t>(dur)]), parse_double(row[static_cast<std::size_t>(tru)])};
      }
      groups[key].first.push_back(parse_double(row[static_cast<std::size_t>(est)]));
      groups[key].second.push_back(row[static_cast<std::size_t>(inr)] == "1");
    }
    for (const auto& key : order) {
      const auto control = key.substr(key.find('|') + 1, key.rfind('|') - key.find('|') - 1);
      rows.push_back(summarize(groups[key].first, groups[key].second, meta[key].second, meta[key].first, control));
    }
  }
  emit_table(rows, std::cout, delimited ? TableStyle::delimited : TableStyle::aligned);
  return 0;
}

// ============================================================================
// payoff
// ============================================================================

struct PayoffArgs {
  std::string config, policy, out;
  std::vector<double> horizons;
};

int cmd_payoff(const PayoffArgs& a) {
  const auto cfg = parse_config_file(a.config);
  return std::visit(
      [&](const auto& model) {
        using M = std::decay_t<decltype(model)>;
        const auto policy = load_matching_policy<M>(a.policy, cfg);
        const auto mca_r = make_mca(cfg, model, policy.grid).r;
        const MCAConfig mca{policy.dt, mca_r};
        const auto chain = build_chain(model, policy.grid, mca, policy.controls, policy.prior);
        Eigen::VectorXd start = Eigen::VectorXd::Zero(policy.grid.size());
        start(policy.grid.nearest(Eigen::Map<const Eigen::VectorXd>(cfg.x0.data(), static_cast<Eigen::Index>(cfg.x0.size())))) = 1.0;

        std::map<std::size_t, double> wanted;  // steps to go -> horizon
        for (double h : a.horizons) {
          const std::size_t n = horizon_steps(h, policy.dt);
          if (n > policy.steps) throw ConfigError("horizon " + format_shortest(h) + " exceeds the policy horizon");
          wanted[n] = h;
        }
        std::map<double, double> payoff;
        evaluate_policy(chain, policy.table, policy.steps, [&](std::size_t togo, const ValueTable& V) {
          if (const auto it = wanted.find(togo); it != wanted.end())
            payoff[it->second] = mean_payoff(V, policy.prior.weights(), start);
        });

        std::ostringstream csv;
        write_csv_row(csv, {"horizon", "payoff", "payoff_per_time"});
        for (double h : a.horizons)
          write_csv_row(csv, {format_double(h), format_double(payoff.at(h)), format_double(payoff.at(h) / h)});
        if (a.out.empty()) std::cout << csv.str();
        else open_out(a.out) << csv.str();
        return 0;
      },
      make_model(cfg));
}

// ============================================================================
// Error reporting
// ============================================================================

int fail(const char* kind, const std::string& msg, int line = 0) {
  nlohmann::json j = {{"error", kind}, {"message", msg}};
  if (line > 0) j["line"] = line;
  std::cerr << j.dump() << '\n';
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal experimental design for diffusion models: policy solver, simulator, estimator"};
  app.require_subcommand(1);

  SolveArgs solve;
  auto* s = app.add_subcommand("solve", "Solve the dynamic program and write a policy file");
  s->add_option("--config", solve.config, "Run configuration")->required()->check(CLI::ExistingFile);
  s->add_option("--out", solve.out, "Policy file to write")->required();
  s->add_option("--horizon", solve.horizon, "Override [experiment] horizon");

  SimulateArgs sim;
  auto* m = app.add_subcommand("simulate", "Run closed-loop trials and write per-trial results");
  m->add_option("--config", sim.config, "Run configuration")->required()->check(CLI::ExistingFile);
  auto* pol = m->add_option("--policy", sim.policy, "Policy file (dynamic control)")->check(CLI::ExistingFile);
  m->add_option("--constant", sim.constant, "Constant control value")->excludes(pol);
  m->add_option("--trials", sim.trials, "Override [experiment] trials");
  m->add_option("--seed", sim.seed, "Override [experiment] seed");
  m->add_option("--particles", sim.particles, "Override [filter] particles");
  m->add_option("--horizon", sim.horizon, "Override [experiment] horizon");
  m->add_option("--observations", sim.observations_dir, "Directory for per-trial observation records");
  m->add_option("--out", sim.out, "Per-trial results CSV")->required();

  EstimateArgs est;
  auto* e = app.add_subcommand("estimate", "Likelihood curve and MLE for recorded data");
  e->add_option("--config", est.config, "Run configuration")->required()->check(CLI::ExistingFile);
  e->add_option("--observations", est.observations, "CSV: time, y1[, y2...][, u] or time, x1..[, u]")
      ->required()
      ->check(CLI::ExistingFile);
  e->add_option("--constant", est.constant, "Control value when the data has no u column");
  e->add_option("--particles", est.particles, "Override [filter] particles");
  e->add_option("--seed", est.seed, "Override [experiment] seed");
  e->add_option("--out", est.out, "Likelihood curve CSV")->required();

  std::vector<std::string> results;
  bool delimited = false;
  auto* r = app.add_subcommand("report", "Summary table from simulate results");
  r->add_option("--results", results, "Result files")->required()->check(CLI::ExistingFile);
  r->add_flag("--delimited", delimited, "Comma-delimited output");

  PayoffArgs pay;
  auto* p = app.add_subcommand("payoff", "Expected Fisher information of a policy from x0 over several horizons");
  p->add_option("--config", pay.config, "Run configuration")->required()->check(CLI::ExistingFile);
  p->add_option("--policy", pay.policy, "Policy file")->required()->check(CLI::ExistingFile);
  p->add_option("--horizons", pay.horizons, "Horizons")->required()->delimiter(',');
  p->add_option("--out", pay.out, "CSV output (default stdout)");

  std::string describe_path;
  auto* d = app.add_subcommand("describe", "Print a policy file header");
  d->add_option("policy", describe_path, "Policy file")->required()->check(CLI::ExistingFile);

  bool dump = false;
  std::string model_name = "double_well", check_path;
  auto* c = app.add_subcommand("config", "Print default configurations or check a config file");
  c->add_flag("--dump-defaults", dump, "Print the full default configuration");
  c->add_option("--model", model_name, "Model for --dump-defaults")->check(CLI::IsMember(model_names()));
  c->add_option("--check", check_path, "Parse a config and print it with defaults filled in")
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    if (err.get_exit_code() == 0) return app.exit(err);
    return fail("usage", err.what());
  }

  try {
    if (*s) return cmd_solve(solve);
    if (*m) return cmd_simulate(sim);
    if (*e) return cmd_estimate(est);
    if (*r) return cmd_report(results, delimited);
    if (*p) return cmd_payoff(pay);
    if (*d) {
      describe_policy(load_policy(describe_path), std::cout);
      return 0;
    }
    if (*c) {
      if (!check_path.empty()) std::cout << dump_config(parse_config_file(check_path));
      else if (dump) std::cout << dump_config(default_config(model_name));
      else return fail("usage", "config needs --dump-defaults or --check");
      return 0;
    }
  } catch (const ConfigError& err) {
    return fail("config", err.what(), err.line);
  } catch (const FormatError& err) {
    return fail("format", err.what());
  } catch (const StabilityError& err) {
    return fail("stability", err.what());
  } catch (const NumericError& err) {
    return fail("numeric", err.what());
  } catch (const DomainError& err) {
    return fail("domain", err.what());
  } catch (const std::exception& err) {
    return fail("runtime", err.what());
  }
  return 0;
}
