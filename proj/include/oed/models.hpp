#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string_view>
#include <utility>
#include <vector>

#include "oed/errors.hpp"
#include "oed/sde.hpp"

namespace oed {

// ============================================================================
// Double-well particle: dx = (-V'(x) + u) dt + sigma dW,
// V(x) = x^4 - 2x^2 + A exp(-(x/w)^2 / 2). Estimand: A.
// ============================================================================

template <typename Scalar = double>
struct DoubleWellParams {
  Scalar A = Scalar(3.84);
  Scalar w = Scalar(0.3);
  Scalar sigma = Scalar(0.1);
};

template <typename Scalar>
Scalar double_well_potential(Scalar x, Scalar A, Scalar w) {
  using std::exp;
  const Scalar z = x / w;
  return x * x * x * x - 2 * x * x + A * exp(-z * z / 2);
}

template <typename Scalar>
Scalar double_well_drift(Scalar x, Scalar A, Scalar w, Scalar u) {
  using std::exp;
  const Scalar z = x / w;
  return -(4 * x * x * x - 4 * x - A * x / (w * w) * exp(-z * z / 2)) + u;
}

template <typename S = double>
struct DoubleWell {
  using Scalar = S;
  static constexpr int dim = 1;
  using State = Eigen::Matrix<Scalar, 1, 1>;
  static constexpr std::string_view name = "double_well";

  DoubleWellParams<Scalar> params;
  Scalar lo = -5, hi = 5;

  Scalar theta() const { return params.A; }
  State lower() const { return State(lo); }
  State upper() const { return State(hi); }

  State drift(const State& x, Scalar A, Scalar u) const {
    return State(double_well_drift(x(0), A, params.w, u));
  }
  State drift_dtheta(const State& x, Scalar, Scalar) const {
    using std::exp;
    const Scalar z = x(0) / params.w;
    return State(x(0) / (params.w * params.w) * exp(-z * z / 2));
  }
  State diffusion_diag(const State&) const { return State(params.sigma * params.sigma); }
};

// ============================================================================
// Morris-Lecar neuron, state (v, w). Estimand: g_Ca. Control u = I / C_m.
// ============================================================================

template <typename Scalar = double>
struct MorrisLecarParams {
  Scalar c_m = 20;
  Scalar g_k = 8;
  Scalar g_ca = Scalar(4.41498308);
  Scalar g_leak = 2;
  Scalar phi = Scalar(0.04);
  Scalar v_k = -84;
  Scalar v_leak = -60;
  Scalar v_ca = 120;
  Scalar v1 = Scalar(-1.2);
  Scalar v2 = 18;
  Scalar v3 = 2;
  Scalar v4 = 30;
  Scalar beta_v = 1;
  Scalar beta_w = Scalar(0.1);
  Scalar i0 = 95;  // carried for completeness, not used by the dynamics
};

template <typename Scalar>
struct MlAux {
  Scalar m_inf;
  Scalar tau_w;
  Scalar w_inf;
};

template <typename Scalar>
MlAux<Scalar> ml_aux(Scalar v, const MorrisLecarParams<Scalar>& p) {
  using std::cosh;
  using std::tanh;
  return {Scalar(0.5) * (1 + tanh((v - p.v1) / p.v2)), 1 / cosh((v - p.v3) / (2 * p.v4)),
          Scalar(0.5) * (1 + tanh((v - p.v3) / p.v4))};
}

template <typename Scalar>
Eigen::Matrix<Scalar, 2, 1> ml_drift(Scalar v, Scalar w, const MorrisLecarParams<Scalar>& p, Scalar u) {
  const auto a = ml_aux(v, p);
  Eigen::Matrix<Scalar, 2, 1> f;
  f(0) = u - (p.g_k * w * (v - p.v_k) + p.g_ca * a.m_inf * (v - p.v_ca) + p.g_leak * (v - p.v_leak)) / p.c_m;
  f(1) = p.phi * (a.w_inf - w) / a.tau_w;
  return f;
}

/// gamma^2 = (phi / tau_w) (w_inf (1 - 2w) + w), written as a sum of two non-negative terms.
template <typename Scalar>
Scalar ml_gamma_squared(Scalar v, Scalar w, const MorrisLecarParams<Scalar>& p) {
  const auto a = ml_aux(v, p);
  const Scalar radicand = a.w_inf * (1 - w) + (1 - a.w_inf) * w;
  if (radicand < 0) throw DomainError("ml_gamma: negative radicand (w outside [0,1])");
  return p.phi / a.tau_w * radicand;
}

template <typename Scalar>
Scalar ml_gamma(Scalar v, Scalar w, const MorrisLecarParams<Scalar>& p) {
  using std::sqrt;
  return sqrt(ml_gamma_squared(v, w, p));
}

template <typename S = double>
struct MorrisLecar {
  using Scalar = S;
  static constexpr int dim = 2;
  using State = Eigen::Matrix<Scalar, 2, 1>;
  static constexpr std::string_view name = "morris_lecar";

  MorrisLecarParams<Scalar> params;
  State lo{-80, 0}, hi{80, 1};

  Scalar theta() const { return params.g_ca; }
  State lower() const { return lo; }
  State upper() const { return hi; }

  State drift(const State& x, Scalar g_ca, Scalar u) const {
    auto p = params;
    p.g_ca = g_ca;
    return ml_drift(x(0), x(1), p, u);
  }
  State drift_dtheta(const State& x, Scalar, Scalar) const {
    const auto a = ml_aux(x(0), params);
    return State(-a.m_inf * (x(0) - params.v_ca) / params.c_m, Scalar(0));
  }
  // voltage noise enters with standard deviation beta_v per sqrt(ms)
  State diffusion_diag(const State& x) const {
    return State(params.beta_v * params.beta_v,
                 params.beta_w * params.beta_w * ml_gamma_squared(x(0), std::clamp(x(1), Scalar(0), Scalar(1)), params));
  }
  void project(State& x) const { x(1) = std::clamp(x(1), Scalar(0), Scalar(1)); }
};

// ============================================================================
// Chemostat in log coordinates (C*, N*) = (log C, log N). Estimand: kappa.
// Control: dilution rate delta.
// ============================================================================

template <typename Scalar = double>
struct ChemostatParams {
  Scalar eta_i = 160;
  Scalar rho = 270;
  Scalar chi = Scalar(0.0027);
  Scalar kappa = Scalar(4.4);
  Scalar sigma1 = Scalar(0.1);  // on N*
  Scalar sigma2 = Scalar(0.1);  // on C*
};

/// Returns (dC*, dN*).
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 1> chemostat_drift(Scalar c, Scalar n, const ChemostatParams<Scalar>& p, Scalar delta) {
  using std::exp;
  const Scalar en = exp(n);
  const Scalar sat = p.kappa + en;
  Eigen::Matrix<Scalar, 2, 1> f;
  f(0) = p.chi * p.rho * en / sat - delta;
  f(1) = delta * p.eta_i / en - p.rho * exp(c) / sat - delta;
  if (!f.allFinite())
    throw NumericError("chemostat_drift: overflow at (C*, N*) = " + format_state(Eigen::Matrix<Scalar, 2, 1>(c, n)));
  return f;
}

/// Deterministic equilibrium (C*_0, N*_0) under constant dilution delta.
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 1> chemostat_fixed_point(const ChemostatParams<Scalar>& p, Scalar delta) {
  using std::exp;
  using std::log;
  const Scalar crit = p.chi * p.rho;
  if (!(delta > 0) || !(delta < crit))
    throw DomainError("chemostat_fixed_point: no fixed point unless 0 < delta < chi*rho");
  const Scalar n0 = log(p.kappa * delta / (crit - delta));
  const Scalar en = exp(n0);
  if (!(p.eta_i > en)) throw DomainError("chemostat_fixed_point: nitrogen level exceeds input concentration");
  const Scalar c0 = log(delta * (p.eta_i - en) * (p.kappa + en) / (p.rho * en));
  return {c0, n0};
}

template <typename S = double>
struct Chemostat {
  using Scalar = S;
  static constexpr int dim = 2;
  using State = Eigen::Matrix<Scalar, 2, 1>;
  static constexpr std::string_view name = "chemostat";

  ChemostatParams<Scalar> params;
  State lo{-6, -2}, hi{1, 6};

  Scalar theta() const { return params.kappa; }
  State lower() const { return lo; }
  State upper() const { return hi; }

  State drift(const State& x, Scalar kappa, Scalar delta) const {
    auto p = params;
    p.kappa = kappa;
    return chemostat_drift(x(0), x(1), p, delta);
  }
  State drift_dtheta(const State& x, Scalar kappa, Scalar) const {
    using std::exp;
    const Scalar en = exp(x(1));
    const Scalar sat2 = (kappa + en) * (kappa + en);
    return State(-params.chi * params.rho * en / sat2, params.rho * exp(x(0)) / sat2);
  }
  State diffusion_diag(const State&) const {
    return State(params.sigma2 * params.sigma2, params.sigma1 * params.sigma1);
  }
};

// ============================================================================
// Ornstein-Uhlenbeck with additive control: dx = (-beta x + u) dt + sigma dW.
// Estimand: beta.
// ============================================================================

template <typename Scalar = double>
struct OrnsteinUhlenbeckParams {
  Scalar beta = 1;
  Scalar sigma = Scalar(0.5);
};

template <typename Scalar>
Scalar ou_drift(Scalar x, Scalar beta, Scalar u) {
  return -beta * x + u;
}

template <typename S = double>
struct OrnsteinUhlenbeck {
  using Scalar = S;
  static constexpr int dim = 1;
  using State = Eigen::Matrix<Scalar, 1, 1>;
  static constexpr std::string_view name = "ornstein_uhlenbeck";

  OrnsteinUhlenbeckParams<Scalar> params;
  Scalar lo = -4, hi = 4;

  Scalar theta() const { return params.beta; }
  State lower() const { return State(lo); }
  State upper() const { return State(hi); }

  State drift(const State& x, Scalar beta, Scalar u) const { return State(ou_drift(x(0), beta, u)); }
  State drift_dtheta(const State& x, Scalar, Scalar) const { return State(-x(0)); }
  State diffusion_diag(const State&) const { return State(params.sigma * params.sigma); }
};

// ============================================================================
// Linear-Gaussian observation y = H x + N(0, diag(R)) every `period` time units.
// ============================================================================

struct ObservationModel {
  Eigen::MatrixXd H;
  Eigen::VectorXd R_diag;
  double period = 0;

  Eigen::Index channels() const { return H.rows(); }

  /// Observe the listed state components with the given noise standard deviations.
  static ObservationModel select(int dim, const std::vector<int>& channels,
                                 const std::vector<double>& noise_sd, double period) {
    if (channels.size() != noise_sd.size())
      throw std::invalid_argument("ObservationModel: one noise level per channel required");
    ObservationModel m;
    m.H = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(channels.size()), dim);
    m.R_diag.resize(static_cast<Eigen::Index>(channels.size()));
    for (std::size_t k = 0; k < channels.size(); ++k) {
      if (channels[k] < 0 || channels[k] >= dim)
        throw std::invalid_argument("ObservationModel: channel index out of range");
      m.H(static_cast<Eigen::Index>(k), channels[k]) = 1.0;
      m.R_diag(static_cast<Eigen::Index>(k)) = noise_sd[k] * noise_sd[k];
    }
    m.period = period;
    return m;
  }

  /// Number of simulation steps per observation; throws unless period is a positive multiple of dt.
  std::size_t steps_per_observation(double dt) const {
    const double ratio = period / dt;
    const double k = std::round(ratio);
    if (!(k >= 1) || std::abs(ratio - k) > 1e-9 * k)
      throw std::invalid_argument("ObservationModel: period must be a positive integer multiple of dt");
    return static_cast<std::size_t>(k);
  }
};

inline ObservationModel default_observation(const DoubleWell<>&) {
  return ObservationModel::select(1, {0}, {0.05}, 0.25);
}
inline ObservationModel default_observation(const MorrisLecar<>&) {
  return ObservationModel::select(2, {0}, {0.5}, 0.5);
}
inline ObservationModel default_observation(const Chemostat<>&) {
  return ObservationModel::select(2, {0, 1}, {0.025, 0.025}, 0.5);
}
inline ObservationModel default_observation(const OrnsteinUhlenbeck<>&) {
  return ObservationModel::select(1, {0}, {0.1}, 0.1);
}

}  // namespace oed
