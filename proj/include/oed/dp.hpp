#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <cstdint>
#include <exception>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "oed/grid.hpp"
#include "oed/mca.hpp"
#include "oed/sde.hpp"

namespace oed {

// ============================================================================
// Controls, prior, policy
// ============================================================================

/// Ordered set of distinct control values; the order fixes tie-breaking.
class ControlSet {
 public:
  static constexpr std::size_t kMaxSize = 256;

  ControlSet() = default;
  explicit ControlSet(std::vector<double> values);

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t k) const { return values_[k]; }
  const std::vector<double>& values() const { return values_; }
  /// Index of an exactly matching value, or -1.
  int index_of(double u) const;

  bool operator==(const ControlSet&) const = default;

 private:
  std::vector<double> values_;
};

/// Parameter grid with normalized weights.
class PriorGrid {
 public:
  PriorGrid() = default;
  PriorGrid(std::vector<double> theta, std::vector<double> weights);
  /// n equally spaced values on [lo, hi] with uniform weight.
  static PriorGrid uniform(double lo, double hi, int n);

  std::size_t size() const { return theta_.size(); }
  const std::vector<double>& theta() const { return theta_; }
  const std::vector<double>& weights() const { return weights_; }
  double lo() const { return theta_.front(); }
  double hi() const { return theta_.back(); }
  double midpoint() const { return 0.5 * (lo() + hi()); }

  bool operator==(const PriorGrid&) const = default;

 private:
  std::vector<double> theta_;
  std::vector<double> weights_;
};

/// Control index per (time step, grid cell); step 0 is the start of the experiment.
struct PolicyTable {
  std::string model;
  Grid grid;
  double dt = 0;
  ControlSet controls;
  PriorGrid prior;
  std::size_t steps = 0;
  std::vector<std::uint8_t> table;  // steps x cells, row-major

  double horizon() const { return static_cast<double>(steps) * dt; }
  std::span<const std::uint8_t> slice(std::size_t step) const {
    return {table.data() + step * static_cast<std::size_t>(grid.size()), static_cast<std::size_t>(grid.size())};
  }
  std::uint8_t at(std::size_t step, Eigen::Index cell) const {
    return table[step * static_cast<std::size_t>(grid.size()) + static_cast<std::size_t>(cell)];
  }

  bool operator==(const PolicyTable&) const = default;
};

/// FITG values, one column per prior theta.
using ValueTable = Eigen::MatrixXd;

// ============================================================================
// Controlled chain and backward induction
// ============================================================================

/// Finite controlled Markov chain with per-theta transitions and rewards.
struct ControlledChain {
  using Matrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  Eigen::Index states = 0;
  std::size_t thetas = 0;
  std::size_t controls = 0;
  std::vector<Matrix> P;               // index theta * controls + u
  std::vector<Eigen::MatrixXd> reward; // per theta: states x controls, per-step reward

  const Matrix& transition(std::size_t theta, std::size_t u) const { return P[theta * controls + u]; }
};

/// Called with the number of remaining steps and the value table for that many steps to go.
using ValueObserver = std::function<void(std::size_t, const ValueTable&)>;

struct InductionResult {
  std::vector<std::uint8_t> table;  // steps x states
  ValueTable values;                // at step 0
};

/// u*(x, i) = argmax_u sum_theta w_theta [r + P V_{i+1}], V_steps = 0, ties to the lowest index.
InductionResult backward_induction(const ControlledChain& chain, const std::vector<double>& weights,
                                   std::size_t steps, const ValueObserver& observer = {});

/// Per-theta values of a fixed policy table.
ValueTable evaluate_policy(const ControlledChain& chain, std::span<const std::uint8_t> table, std::size_t steps,
                           const ValueObserver& observer = {});

template <DiffusionModel M>
ControlledChain build_chain(const M& model, const Grid& grid, const MCAConfig& cfg, const ControlSet& controls,
                            const PriorGrid& prior) {
  ControlledChain chain;
  chain.states = grid.size();
  chain.thetas = prior.size();
  chain.controls = controls.size();
  chain.P.resize(chain.thetas * chain.controls);
  chain.reward.assign(chain.thetas, Eigen::MatrixXd(chain.states, static_cast<Eigen::Index>(chain.controls)));
  const auto n = static_cast<long>(chain.thetas * chain.controls);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic)
  for (long k = 0; k < n; ++k) {
    const auto t = static_cast<std::size_t>(k) / chain.controls;
    const auto u = static_cast<std::size_t>(k) % chain.controls;
    try {
      chain.P[static_cast<std::size_t>(k)] = transition_matrix(model, grid, cfg, prior.theta()[t], controls[u]);
      for (Eigen::Index s = 0; s < chain.states; ++s)
        chain.reward[t](s, static_cast<Eigen::Index>(u)) =
            fi_integrand(model, detail::node_state<M>(grid, s), prior.theta()[t], controls[u]) * cfg.dt;
    } catch (...) {
      errors[static_cast<std::size_t>(k)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return chain;
}

struct PolicySolution {
  PolicyTable policy;
  ValueTable values;  // at t = 0
  ValidationReport report;
};

std::size_t horizon_steps(double horizon, double dt);

/// Validate the discretization, then solve for the prior-averaged FI-maximizing policy.
template <DiffusionModel M>
PolicySolution solve_policy(const M& model, const Grid& grid, const MCAConfig& cfg, const ControlSet& controls,
                            const PriorGrid& prior, double horizon) {
  if (!(horizon > 0)) throw std::invalid_argument("solve_policy: horizon must be positive");
  PolicySolution sol;
  sol.report = validate(model, grid, cfg, prior.theta(), controls.values());
  if (!sol.report.ok()) {
    const auto& v = sol.report.violations.front();
    throw StabilityError("solve_policy: " + std::to_string(sol.report.violations.size()) +
                         " stability violations, first at node " + std::to_string(v.node) + " dimension " +
                         std::to_string(v.dim) + " (p = " + std::to_string(v.probability) + ")");
  }
  const auto chain = build_chain(model, grid, cfg, controls, prior);
  auto res = backward_induction(chain, prior.weights(), horizon_steps(horizon, cfg.dt));
  sol.policy.model = std::string(M::name);
  sol.policy.grid = grid;
  sol.policy.dt = cfg.dt;
  sol.policy.controls = controls;
  sol.policy.prior = prior;
  sol.policy.steps = horizon_steps(horizon, cfg.dt);
  sol.policy.table = std::move(res.table);
  sol.values = std::move(res.values);
  return sol;
}

// ============================================================================
// Queries
// ============================================================================

struct ControlLookup {
  double value;
  std::size_t index;
  bool out_of_horizon;  // t was outside [0, horizon]; the boundary slice was used
};

/// Nearest-node, nearest-step query; x is clamped to the grid, time ties go to the earlier step.
ControlLookup lookup_control(const PolicyTable& policy, const Eigen::Ref<const Eigen::VectorXd>& x, double t);

struct StationarySlice {
  std::vector<std::uint8_t> slice;
  std::size_t step;  // slices 0..step agree with slice 0 within tol
  double time;
  bool stationary;
};

/// Longest run of leading slices that agree with slice 0 up to a fraction `tol` of differing cells.
/// The returned slice is slice 0 when such a run exists, the horizon slice otherwise.
StationarySlice stationary_policy(const PolicyTable& policy, double tol = 0.0);

/// sum_cells p(cell) sum_theta w_theta V_theta(cell)
double mean_payoff(const ValueTable& values, const std::vector<double>& weights,
                   const Eigen::Ref<const Eigen::VectorXd>& initial_distribution);

}  // namespace oed
