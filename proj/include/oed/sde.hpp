#pragma once

#include <Eigen/Core>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include "oed/errors.hpp"
#include "oed/random.hpp"

namespace oed {

// ============================================================================
// Model concept
// ============================================================================

/**
 * @brief Controlled diffusion dx = f(x, theta, u) dt + Sigma(x)^{1/2} dW with
 * diagonal Sigma and a single scalar parameter theta.
 *
 * Models expose fixed-size Eigen state vectors. An optional `project(State&)`
 * member is applied after every update (used to keep states in a physical range).
 */
template <typename M>
concept DiffusionModel = requires(const M& m, const typename M::State& x, typename M::Scalar s) {
  typename M::Scalar;
  typename M::State;
  requires M::dim >= 1;
  { m.drift(x, s, s) } -> std::convertible_to<typename M::State>;
  { m.drift_dtheta(x, s, s) } -> std::convertible_to<typename M::State>;
  { m.diffusion_diag(x) } -> std::convertible_to<typename M::State>;
  { m.lower() } -> std::convertible_to<typename M::State>;
  { m.upper() } -> std::convertible_to<typename M::State>;
  { m.theta() } -> std::convertible_to<typename M::Scalar>;
};

template <DiffusionModel M>
void project_state(const M& model, typename M::State& x) {
  if constexpr (requires { model.project(x); }) model.project(x);
}

template <typename Derived>
std::string format_state(const Eigen::DenseBase<Derived>& x) {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  for (Eigen::Index k = 0; k < x.size(); ++k) os << (k ? ", " : "") << x(k);
  os << ')';
  return os.str();
}

// ============================================================================
// Trajectories and simulation
// ============================================================================

template <DiffusionModel M>
struct Trajectory {
  using Scalar = typename M::Scalar;
  using State = typename M::State;

  Scalar t0 = 0;
  Scalar dt = 0;
  std::vector<State> states;
  std::vector<Scalar> controls;  // control held over step i -> i+1

  std::size_t steps() const { return controls.size(); }
};

/// One Euler-Maruyama step x + f dt + sqrt(dt) sqrt(Sigma) eps.
template <DiffusionModel M>
typename M::State euler_step(const M& model, const typename M::State& x, typename M::Scalar theta,
                             typename M::Scalar u, typename M::Scalar dt,
                             const typename M::State& eps) {
  using std::sqrt;
  typename M::State out = x + model.drift(x, theta, u) * dt +
                          (model.diffusion_diag(x).array().sqrt() * eps.array()).matrix() * sqrt(dt);
  if (!out.allFinite())
    throw NumericError("non-finite state after Euler step from x = " + format_state(x));
  project_state(model, out);
  return out;
}

template <DiffusionModel M>
typename M::State draw_state_noise(const NoiseStream& noise, std::uint64_t index) {
  std::array<double, M::dim> buf;
  noise.normals(index, buf);
  typename M::State eps;
  for (int k = 0; k < M::dim; ++k) eps(k) = static_cast<typename M::Scalar>(buf[k]);
  return eps;
}

/**
 * @brief Simulate n_steps Euler steps. Step i uses deviate index i of `noise` and
 * the control `control_source(x_i, i)`.
 */
template <DiffusionModel M, typename ControlSource>
Trajectory<M> simulate_path(const M& model, const typename M::State& x0, typename M::Scalar theta,
                            ControlSource&& control_source, typename M::Scalar dt,
                            std::size_t n_steps, const NoiseStream& noise) {
  if (n_steps < 1) throw std::invalid_argument("simulate_path: n_steps must be >= 1");
  if (!(dt > 0)) throw std::invalid_argument("simulate_path: dt must be positive");
  Trajectory<M> traj;
  traj.dt = dt;
  traj.states.reserve(n_steps + 1);
  traj.controls.reserve(n_steps);
  traj.states.push_back(x0);
  for (std::size_t i = 0; i < n_steps; ++i) {
    const auto& x = traj.states.back();
    const typename M::Scalar u = control_source(x, i);
    try {
      traj.states.push_back(euler_step(model, x, theta, u, dt, draw_state_noise<M>(noise, i)));
    } catch (const NumericError& e) {
      throw NumericError("step " + std::to_string(i) + ": " + e.what());
    }
    traj.controls.push_back(u);
  }
  return traj;
}

// ============================================================================
// Fisher information and likelihood
// ============================================================================

/// sum_k (df_k/dtheta)^2 / Sigma_kk(x)
template <DiffusionModel M>
typename M::Scalar fi_integrand(const M& model, const typename M::State& x, typename M::Scalar theta,
                                typename M::Scalar u) {
  const typename M::State g = model.drift_dtheta(x, theta, u);
  const typename M::State s = model.diffusion_diag(x);
  typename M::Scalar acc = 0;
  for (int k = 0; k < M::dim; ++k) {
    if (!(s(k) > 0))
      throw DomainError("fi_integrand: zero diffusion in dimension " + std::to_string(k));
    acc += g(k) * g(k) / s(k);
  }
  return acc;
}

/// Discrete Girsanov log-likelihood sum_i [f' S^-1 dx - f' S^-1 f dt / 2] (maximization form).
template <DiffusionModel M>
typename M::Scalar path_log_likelihood(const M& model, std::span<const typename M::State> states,
                                       std::span<const typename M::Scalar> controls,
                                       typename M::Scalar theta, typename M::Scalar dt) {
  if (states.empty() || controls.size() + 1 != states.size())
    throw std::invalid_argument("path_log_likelihood: expected states = controls + 1, got " +
                                std::to_string(states.size()) + " states and " +
                                std::to_string(controls.size()) + " controls");
  typename M::Scalar ll = 0;
  for (std::size_t i = 0; i < controls.size(); ++i) {
    const typename M::State f = model.drift(states[i], theta, controls[i]);
    const typename M::State s = model.diffusion_diag(states[i]);
    const typename M::State dx = states[i + 1] - states[i];
    for (int k = 0; k < M::dim; ++k) {
      if (f(k) == 0) continue;
      if (!(s(k) > 0))
        throw DomainError("path_log_likelihood: zero diffusion in dimension " + std::to_string(k));
      ll += f(k) * dx(k) / s(k) - 0.5 * f(k) * f(k) * dt / s(k);
    }
  }
  return ll;
}

template <DiffusionModel M>
typename M::Scalar path_log_likelihood(const M& model, const Trajectory<M>& traj,
                                       typename M::Scalar theta) {
  return path_log_likelihood(model, std::span<const typename M::State>(traj.states),
                             std::span<const typename M::Scalar>(traj.controls), theta, traj.dt);
}

/// Realized Fisher information sum_i fi_integrand(x_i, u_i) dt along a path.
template <DiffusionModel M>
typename M::Scalar realized_fi(const M& model, const Trajectory<M>& traj, typename M::Scalar theta) {
  typename M::Scalar acc = 0;
  for (std::size_t i = 0; i < traj.controls.size(); ++i)
    acc += fi_integrand(model, traj.states[i], theta, traj.controls[i]) * traj.dt;
  return acc;
}

}  // namespace oed
