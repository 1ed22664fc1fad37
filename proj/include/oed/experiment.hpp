#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <exception>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "oed/dp.hpp"
#include "oed/filter.hpp"
#include "oed/models.hpp"
#include "oed/random.hpp"
#include "oed/sde.hpp"
#include "oed/summary.hpp"

namespace oed {

enum class ControlMode { dynamic, constant };
enum class ObservationRegime { full, partial };

template <DiffusionModel M>
struct ExperimentConfig {
  using State = typename M::State;

  M model;  // carries the true parameter
  PriorGrid prior;
  ControlMode mode = ControlMode::constant;
  double constant_control = 0;
  ObservationRegime regime = ObservationRegime::full;
  ObservationModel obs;
  double dt = 0.01;
  double horizon = 1;
  Eigen::Index particles = 1000;
  std::size_t trials = 2;
  std::uint64_t seed = 1;
  State x0 = State::Zero();
  bool resample = true;
  std::optional<double> nominal_theta;  // control-filter theta, prior midpoint when unset
  bool retain_paths = false;

  double true_theta() const { return static_cast<double>(model.theta()); }
  double control_theta() const { return nominal_theta.value_or(prior.midpoint()); }
  std::string control_label() const {
    if (mode == ControlMode::dynamic) return "dynamic";
    std::ostringstream os;
    os << constant_control;
    return os.str();
  }
};

template <DiffusionModel M>
struct TrialResult {
  std::uint64_t trial = 0;
  double estimate = 0;
  bool in_range = false;
  double realized_fi = 0;  // sum of fi_integrand dt along the true path at the true theta
  LikelihoodCurve curve;
  double min_ess_fraction = 1.0;
  std::size_t out_of_horizon_lookups = 0;
  std::optional<Trajectory<M>> path;
  ObservationRecord observations;
};

namespace detail {

inline std::size_t nearest_index(const std::vector<double>& v, double x) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < v.size(); ++k)
    if (std::abs(v[k] - x) < std::abs(v[best] - x)) best = k;
  return best;
}

}  // namespace detail

/**
 * @brief One closed-loop experiment: simulate the truth, observe, filter, choose
 * controls, then estimate theta on the prior grid.
 */
template <DiffusionModel M>
TrialResult<M> run_trial(const ExperimentConfig<M>& cfg, const PolicyTable* policy, std::uint64_t trial) {
  using State = typename M::State;
  const bool dynamic = cfg.mode == ControlMode::dynamic;
  if (dynamic) {
    if (!policy) throw std::invalid_argument("run_trial: dynamic control requires a policy");
    if (policy->horizon() + 1e-9 < cfg.horizon) throw std::invalid_argument("run_trial: policy horizon shorter than experiment");
    if (policy->grid.dim() != M::dim) throw std::invalid_argument("run_trial: policy grid dimension differs from model");
  }
  const std::size_t n_steps = horizon_steps(cfg.horizon, cfg.dt);
  const double theta = cfg.true_theta();
  const NoiseStream truth(cfg.seed, stream_id(trial, StreamRole::truth));

  TrialResult<M> res;
  res.trial = trial;
  auto policy_control = [&](const State& x, double t) {
    const auto look = lookup_control(*policy, x.template cast<double>(), t);
    res.out_of_horizon_lookups += look.out_of_horizon;
    return look.value;
  };

  try {
    Trajectory<M> path;
    if (cfg.regime == ObservationRegime::full) {
      auto control = [&](const State& x, std::size_t i) {
        return dynamic ? policy_control(x, static_cast<double>(i) * cfg.dt) : cfg.constant_control;
      };
      path = simulate_path(cfg.model, cfg.x0, theta, control, cfg.dt, n_steps, truth);
      res.curve.theta = cfg.prior.theta();
      for (double th : cfg.prior.theta()) res.curve.log_likelihood.push_back(path_log_likelihood(cfg.model, path, th));
    } else {
      const std::size_t per_obs = cfg.obs.steps_per_observation(cfg.dt);
      const Eigen::Index K = cfg.obs.channels();
      const NoiseStream obs_noise(cfg.seed, stream_id(trial, StreamRole::observation));
      std::optional<ParticleEnsemble<M>> control_filter;
      if (dynamic)
        control_filter.emplace(std::vector<double>{cfg.control_theta()}, cfg.particles, cfg.x0,
                               NoiseStream(cfg.seed, stream_id(trial, StreamRole::control_filter)),
                               NoiseStream(cfg.seed, stream_id(trial, StreamRole::control_resample)), cfg.resample);

      path.dt = cfg.dt;
      path.states.reserve(n_steps + 1);
      path.controls.reserve(n_steps);
      path.states.push_back(cfg.x0);
      const std::size_t n_obs = n_steps / per_obs;
      res.observations.values.resize(K, static_cast<Eigen::Index>(n_obs));
      std::vector<double> eta(static_cast<std::size_t>(K));

      double u = dynamic ? policy_control(cfg.x0, 0.0) : cfg.constant_control;
      for (std::size_t i = 0; i < n_steps; ++i) {
        State x = euler_step(cfg.model, path.states.back(), theta, u, cfg.dt, draw_state_noise<M>(truth, i));
        path.states.push_back(x);
        path.controls.push_back(u);
        if ((i + 1) % per_obs == 0) {
          const std::size_t k = res.observations.times.size();
          obs_noise.normals(k, eta);
          Eigen::VectorXd y = cfg.obs.H * x.template cast<double>();
          for (Eigen::Index c = 0; c < K; ++c) y(c) += std::sqrt(cfg.obs.R_diag(c)) * eta[static_cast<std::size_t>(c)];
          const double t = static_cast<double>(i + 1) * cfg.dt;
          res.observations.times.push_back(t);
          res.observations.values.col(static_cast<Eigen::Index>(k)) = y;
          if (control_filter) {
            conditional_update(*control_filter, cfg.model, cfg.obs, y, u, cfg.dt);
            u = policy_control(control_filter->estimate(), t);
          }
        } else if (control_filter) {
          propagate(*control_filter, cfg.model, u, cfg.dt);
        }
      }
      if (control_filter) res.min_ess_fraction = control_filter->min_ess_fraction;

      FilterOptions opt;
      opt.particles = cfg.particles;
      opt.resample = cfg.resample;
      opt.designated = detail::nearest_index(cfg.prior.theta(), cfg.control_theta());
      const auto& controls = path.controls;
      auto replay = [&](std::size_t step, double, const State&) { return controls[std::min(step, controls.size() - 1)]; };
      const auto fr = run_filter(cfg.model, cfg.obs, res.observations, cfg.prior.theta(), replay, cfg.dt, cfg.x0,
                                 NoiseStream(cfg.seed, stream_id(trial, StreamRole::estimation_filter)),
                                 NoiseStream(cfg.seed, stream_id(trial, StreamRole::estimation_resample)), opt);
      res.curve = fr.curve;
      res.min_ess_fraction = std::min(res.min_ess_fraction, fr.min_ess_fraction);
    }
    const auto mle = grid_mle(res.curve);
    res.estimate = mle.estimate;
    res.in_range = mle.in_range;
    res.realized_fi = static_cast<double>(realized_fi(cfg.model, path, theta));
    if (cfg.retain_paths) res.path = std::move(path);
    else res.observations = {};
  } catch (const NumericError& e) {
    throw NumericError("trial " + std::to_string(trial) + ": " + e.what());
  }
  return res;
}

template <DiffusionModel M>
struct BatchResult {
  SummaryStats stats;
  std::vector<TrialResult<M>> trials;
  std::vector<std::pair<std::uint64_t, std::string>> failures;

  double mean_realized_fi() const {
    double s = 0;
    for (const auto& t : trials) s += t.realized_fi;
    return trials.empty() ? 0.0 : s / static_cast<double>(trials.size());
  }
  double realized_fi_se() const {
    const double m = mean_realized_fi();
    double ss = 0;
    for (const auto& t : trials) ss += (t.realized_fi - m) * (t.realized_fi - m);
    const double n = static_cast<double>(trials.size());
    return n > 1 ? std::sqrt(ss / (n - 1) / n) : 0.0;
  }
};

/// Run cfg.trials independent trials (in parallel when available) and aggregate them in trial order.
template <DiffusionModel M>
BatchResult<M> run_batch(const ExperimentConfig<M>& cfg, const PolicyTable* policy) {
  if (cfg.trials < 2) throw std::invalid_argument("run_batch: at least two trials required");
  const auto n = static_cast<long>(cfg.trials);
  std::vector<std::optional<TrialResult<M>>> slots(cfg.trials);
  std::vector<std::string> errors(cfg.trials);
#pragma omp parallel for schedule(dynamic)
  for (long k = 0; k < n; ++k) {
    try {
      slots[static_cast<std::size_t>(k)] = run_trial(cfg, policy, static_cast<std::uint64_t>(k));
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(k)] = e.what();
    }
  }
  BatchResult<M> out;
  std::vector<double> est;
  std::vector<bool> inside;
  for (std::size_t k = 0; k < cfg.trials; ++k) {
    if (!slots[k]) {
      out.failures.emplace_back(k, errors[k]);
      continue;
    }
    est.push_back(slots[k]->estimate);
    inside.push_back(slots[k]->in_range);
    out.trials.push_back(std::move(*slots[k]));
  }
  if (static_cast<double>(out.failures.size()) > 0.01 * static_cast<double>(cfg.trials))
    throw std::runtime_error("run_batch: " + std::to_string(out.failures.size()) + " of " + std::to_string(cfg.trials) +
                             " trials failed; first: trial " + std::to_string(out.failures.front().first) + ": " +
                             out.failures.front().second);
  out.stats = summarize(est, inside, cfg.true_theta(), cfg.horizon, cfg.control_label());
  out.stats.failures = out.failures.size();
  return out;
}

}  // namespace oed
