#pragma once

#include <string>
#include <variant>

#include "oed/config.hpp"
#include "oed/dp.hpp"
#include "oed/errors.hpp"
#include "oed/experiment.hpp"
#include "oed/mca.hpp"
#include "oed/models.hpp"

namespace oed {

using AnyModel = std::variant<DoubleWell<>, MorrisLecar<>, Chemostat<>, OrnsteinUhlenbeck<>>;

/// Model with parameters from the config; grid bounds double as the model's state bounds.
AnyModel make_model(const RunConfig& cfg);
Grid make_grid(const RunConfig& cfg);
ControlSet make_controls(const RunConfig& cfg);
PriorGrid make_prior(const RunConfig& cfg);
ObservationModel make_observation(const RunConfig& cfg, int dim);

/// DP step and skip factors; r defaults to the smallest admissible value.
template <DiffusionModel M>
MCAConfig make_mca(const RunConfig& cfg, const M& model, const Grid& grid) {
  MCAConfig m;
  m.dt = cfg.grid_dt;
  if (!(m.dt > 0)) throw ConfigError("[grid] dt must be positive");
  if (cfg.grid_r.empty()) {
    m.r = minimal_skip(model, grid, m.dt);
  } else {
    if (cfg.grid_r.size() != static_cast<std::size_t>(M::dim)) throw ConfigError("[grid] r needs one value per dimension");
    for (int r : cfg.grid_r)
      if (r < 1) throw ConfigError("[grid] r must be >= 1");
    m.r = cfg.grid_r;
  }
  return m;
}

template <DiffusionModel M>
ExperimentConfig<M> make_experiment(const RunConfig& cfg, const M& model) {
  ExperimentConfig<M> e;
  e.model = model;
  e.prior = make_prior(cfg);
  e.mode = cfg.control_mode == "dynamic" ? ControlMode::dynamic : ControlMode::constant;
  if (e.mode == ControlMode::constant) {
    if (!cfg.constant) throw ConfigError("[control] constant mode needs a 'constant' value");
    e.constant_control = *cfg.constant;
  }
  e.regime = cfg.observation_mode == "full" ? ObservationRegime::full : ObservationRegime::partial;
  e.obs = make_observation(cfg, M::dim);
  e.dt = cfg.dt;
  e.horizon = cfg.horizon;
  if (!(e.dt > 0) || !(e.horizon > 0)) throw ConfigError("[experiment] dt and horizon must be positive");
  if (e.regime == ObservationRegime::partial) e.obs.steps_per_observation(e.dt);
  if (cfg.particles < 1) throw ConfigError("[filter] particles must be >= 1");
  e.particles = cfg.particles;
  if (cfg.trials < 2) throw ConfigError("[experiment] trials must be >= 2");
  e.trials = static_cast<std::size_t>(cfg.trials);
  e.seed = cfg.seed;
  if (cfg.x0.size() != static_cast<std::size_t>(M::dim)) throw ConfigError("[experiment] x0 needs one value per dimension");
  for (int d = 0; d < M::dim; ++d) e.x0(d) = cfg.x0[static_cast<std::size_t>(d)];
  e.resample = cfg.resample;
  e.nominal_theta = cfg.nominal_theta;
  e.retain_paths = cfg.retain_paths;
  return e;
}

}  // namespace oed
