#include "oed/run_config.hpp"

namespace oed {

namespace {

template <typename P>
void set_params(const RunConfig& cfg, P& p, std::initializer_list<std::pair<const char*, double P::*>> fields) {
  for (const auto& [name, member] : fields) p.*member = cfg.params.at(name);
}

template <typename M>
void set_bounds(const RunConfig& cfg, M& m) {
  if (cfg.grid_lo.size() != static_cast<std::size_t>(M::dim) || cfg.grid_hi.size() != static_cast<std::size_t>(M::dim))
    throw ConfigError("[grid] lo and hi need one value per dimension of model '" + cfg.model + "'");
  typename M::State lo, hi;
  for (int d = 0; d < M::dim; ++d) {
    lo(d) = cfg.grid_lo[static_cast<std::size_t>(d)];
    hi(d) = cfg.grid_hi[static_cast<std::size_t>(d)];
  }
  if constexpr (M::dim == 1) {
    m.lo = lo(0);
    m.hi = hi(0);
  } else {
    m.lo = lo;
    m.hi = hi;
  }
}

}  // namespace

AnyModel make_model(const RunConfig& cfg) {
  if (cfg.model == "double_well") {
    DoubleWell<> m;
    using P = DoubleWellParams<>;
    set_params<P>(cfg, m.params, {{"A", &P::A}, {"w", &P::w}, {"sigma", &P::sigma}});
    if (!(m.params.w > 0) || !(m.params.sigma > 0)) throw ConfigError("double_well: w and sigma must be positive");
    set_bounds(cfg, m);
    return m;
  }
  if (cfg.model == "morris_lecar") {
    MorrisLecar<> m;
    using P = MorrisLecarParams<>;
    set_params<P>(cfg, m.params,
                  {{"c_m", &P::c_m}, {"g_k", &P::g_k}, {"g_ca", &P::g_ca}, {"g_leak", &P::g_leak}, {"phi", &P::phi},
                   {"v_k", &P::v_k}, {"v_leak", &P::v_leak}, {"v_ca", &P::v_ca}, {"v1", &P::v1}, {"v2", &P::v2},
                   {"v3", &P::v3}, {"v4", &P::v4}, {"beta_v", &P::beta_v}, {"beta_w", &P::beta_w}, {"i0", &P::i0}});
    const auto& p = m.params;
    if (!(p.c_m > 0) || p.g_k < 0 || p.g_ca < 0 || p.g_leak < 0 || p.beta_v < 0 || p.beta_w < 0)
      throw ConfigError("morris_lecar: need c_m > 0 and non-negative conductances and noise levels");
    set_bounds(cfg, m);
    return m;
  }
  if (cfg.model == "chemostat") {
    Chemostat<> m;
    using P = ChemostatParams<>;
    set_params<P>(cfg, m.params,
                  {{"eta_i", &P::eta_i}, {"rho", &P::rho}, {"chi", &P::chi}, {"kappa", &P::kappa},
                   {"sigma1", &P::sigma1}, {"sigma2", &P::sigma2}});
    const auto& p = m.params;
    if (!(p.eta_i > 0 && p.rho > 0 && p.chi > 0 && p.kappa > 0 && p.sigma1 > 0 && p.sigma2 > 0))
      throw ConfigError("chemostat: all parameters must be positive");
    for (double d : cfg.controls)
      if (!(d >= 0) || !(d < p.chi * p.rho)) throw ConfigError("chemostat: dilution controls must lie in [0, chi*rho)");
    set_bounds(cfg, m);
    return m;
  }
  if (cfg.model == "ornstein_uhlenbeck") {
    OrnsteinUhlenbeck<> m;
    using P = OrnsteinUhlenbeckParams<>;
    set_params<P>(cfg, m.params, {{"beta", &P::beta}, {"sigma", &P::sigma}});
    set_bounds(cfg, m);
    return m;
  }
  throw ConfigError("unknown model '" + cfg.model + "'");
}

Grid make_grid(const RunConfig& cfg) {
  if (cfg.grid_lo.size() != cfg.grid_hi.size() || cfg.grid_lo.size() != cfg.grid_n.size())
    throw ConfigError("[grid] lo, hi and n need the same number of entries");
  std::vector<GridAxis> axes;
  for (std::size_t d = 0; d < cfg.grid_lo.size(); ++d) axes.push_back({cfg.grid_lo[d], cfg.grid_hi[d], cfg.grid_n[d]});
  try {
    return Grid(std::move(axes));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("[grid] ") + e.what());
  }
}

ControlSet make_controls(const RunConfig& cfg) {
  try {
    return ControlSet(cfg.controls);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("[control] ") + e.what());
  }
}

PriorGrid make_prior(const RunConfig& cfg) {
  try {
    if (!cfg.prior_values.empty()) {
      auto w = cfg.prior_weights.empty() ? std::vector<double>(cfg.prior_values.size(), 1.0) : cfg.prior_weights;
      return PriorGrid(cfg.prior_values, std::move(w));
    }
    if (cfg.prior_n < 3) throw std::invalid_argument("n must be >= 3");
    return PriorGrid::uniform(cfg.prior_lo, cfg.prior_hi, cfg.prior_n);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("[prior] ") + e.what());
  }
}

ObservationModel make_observation(const RunConfig& cfg, int dim) {
  try {
    for (double sd : cfg.noise_sd)
      if (!(sd >= 0)) throw std::invalid_argument("noise_sd must be >= 0");
    return ObservationModel::select(dim, cfg.channels, cfg.noise_sd, cfg.period);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("[observation] ") + e.what());
  }
}

}  // namespace oed
