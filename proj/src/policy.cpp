#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "oed/dp.hpp"

namespace oed {

ControlSet::ControlSet(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw std::invalid_argument("ControlSet: at least one control value required");
  if (values_.size() > kMaxSize) throw std::invalid_argument("ControlSet: at most 256 control values");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) throw std::invalid_argument("ControlSet: non-finite control value");
    for (std::size_t j = 0; j < i; ++j)
      if (values_[i] == values_[j]) throw std::invalid_argument("ControlSet: duplicate control value");
  }
}

int ControlSet::index_of(double u) const {
  const auto it = std::find(values_.begin(), values_.end(), u);
  return it == values_.end() ? -1 : static_cast<int>(it - values_.begin());
}

PriorGrid::PriorGrid(std::vector<double> theta, std::vector<double> weights)
    : theta_(std::move(theta)), weights_(std::move(weights)) {
  if (theta_.empty()) throw std::invalid_argument("PriorGrid: empty");
  if (weights_.size() != theta_.size()) throw std::invalid_argument("PriorGrid: one weight per value required");
  for (std::size_t i = 1; i < theta_.size(); ++i)
    if (!(theta_[i] > theta_[i - 1])) throw std::invalid_argument("PriorGrid: values must be strictly increasing");
  double sum = 0;
  for (double w : weights_) {
    if (!(w >= 0) || !std::isfinite(w)) throw std::invalid_argument("PriorGrid: weights must be finite and >= 0");
    sum += w;
  }
  if (!(sum > 0)) throw std::invalid_argument("PriorGrid: weights sum to zero");
  // already-normalized weights are kept as given so decoded policies match bitwise
  if (std::abs(sum - 1.0) > 1e-12)
    for (double& w : weights_) w /= sum;
}

PriorGrid PriorGrid::uniform(double lo, double hi, int n) {
  if (n < 1 || (n > 1 && !(hi > lo))) throw std::invalid_argument("PriorGrid::uniform: need n >= 1 and lo < hi");
  std::vector<double> theta(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) theta[static_cast<std::size_t>(k)] = n == 1 ? lo : lo + (hi - lo) * k / (n - 1);
  if (n > 1) theta.back() = hi;
  return PriorGrid(std::move(theta), std::vector<double>(static_cast<std::size_t>(n), 1.0));
}

std::size_t horizon_steps(double horizon, double dt) {
  if (!(dt > 0) || !(horizon > 0)) throw std::invalid_argument("horizon and dt must be positive");
  return static_cast<std::size_t>(std::max(1.0, std::ceil(horizon / dt - 1e-9)));
}

InductionResult backward_induction(const ControlledChain& chain, const std::vector<double>& weights,
                                   std::size_t steps, const ValueObserver& observer) {
  const Eigen::Index S = chain.states;
  const std::size_t M = chain.thetas;
  const std::size_t U = chain.controls;
  if (weights.size() != M) throw std::invalid_argument("backward_induction: one weight per theta required");
  if (U == 0 || U > ControlSet::kMaxSize) throw std::invalid_argument("backward_induction: bad control count");

  InductionResult res;
  res.table.resize(steps * static_cast<std::size_t>(S));
  ValueTable V = ValueTable::Zero(S, static_cast<Eigen::Index>(M));
  ValueTable next(S, static_cast<Eigen::Index>(M));
  std::vector<Eigen::MatrixXd> Q(M, Eigen::MatrixXd(S, static_cast<Eigen::Index>(U)));
  Eigen::MatrixXd total(S, static_cast<Eigen::Index>(U));

  for (std::size_t step = steps; step-- > 0;) {
    const auto n = static_cast<long>(M * U);
#pragma omp parallel for schedule(static)
    for (long k = 0; k < n; ++k) {
      const auto t = static_cast<std::size_t>(k) / U;
      const auto u = static_cast<Eigen::Index>(static_cast<std::size_t>(k) % U);
      Q[t].col(u).noalias() = chain.reward[t].col(u);
      Q[t].col(u).noalias() += chain.transition(t, static_cast<std::size_t>(u)) * V.col(static_cast<Eigen::Index>(t));
    }
    total.setZero();
    for (std::size_t t = 0; t < M; ++t) total.noalias() += weights[t] * Q[t];

    std::uint8_t* slice = res.table.data() + step * static_cast<std::size_t>(S);
#pragma omp parallel for schedule(static)
    for (Eigen::Index s = 0; s < S; ++s) {
      Eigen::Index best = 0;
      for (Eigen::Index u = 1; u < static_cast<Eigen::Index>(U); ++u)
        if (total(s, u) > total(s, best)) best = u;
      slice[s] = static_cast<std::uint8_t>(best);
      for (std::size_t t = 0; t < M; ++t) next(s, static_cast<Eigen::Index>(t)) = Q[t](s, best);
    }
    V.swap(next);
    if (observer) observer(steps - step, V);
  }
  res.values = std::move(V);
  return res;
}

ValueTable evaluate_policy(const ControlledChain& chain, std::span<const std::uint8_t> table, std::size_t steps,
                           const ValueObserver& observer) {
  const Eigen::Index S = chain.states;
  const std::size_t M = chain.thetas;
  if (table.size() != steps * static_cast<std::size_t>(S))
    throw std::invalid_argument("evaluate_policy: table size does not match steps x states");
  for (std::uint8_t u : table)
    if (u >= chain.controls) throw std::out_of_range("evaluate_policy: control index out of range");
  ValueTable V = ValueTable::Zero(S, static_cast<Eigen::Index>(M));
  ValueTable next(S, static_cast<Eigen::Index>(M));
  for (std::size_t step = steps; step-- > 0;) {
    const std::uint8_t* slice = table.data() + step * static_cast<std::size_t>(S);
#pragma omp parallel for schedule(static)
    for (Eigen::Index s = 0; s < S; ++s) {
      const std::size_t u = slice[s];
      for (std::size_t t = 0; t < M; ++t) {
        double acc = chain.reward[t](s, static_cast<Eigen::Index>(u));
        for (ControlledChain::Matrix::InnerIterator it(chain.transition(t, u), s); it; ++it)
          acc += it.value() * V(it.col(), static_cast<Eigen::Index>(t));
        next(s, static_cast<Eigen::Index>(t)) = acc;
      }
    }
    V.swap(next);
    if (observer) observer(steps - step, V);
  }
  return V;
}

ControlLookup lookup_control(const PolicyTable& policy, const Eigen::Ref<const Eigen::VectorXd>& x, double t) {
  if (policy.steps == 0) throw std::invalid_argument("lookup_control: empty policy");
  if (std::isnan(t)) throw std::invalid_argument("lookup_control: time is NaN");
  const double h = policy.horizon();
  const bool out = t < 0 || t > h + 1e-9 * std::max(1.0, h);
  const double s = std::ceil(t / policy.dt - 0.5);
  const auto step = static_cast<std::size_t>(std::clamp(s, 0.0, static_cast<double>(policy.steps - 1)));
  const std::size_t k = policy.at(step, policy.grid.nearest(x));
  return {policy.controls[k], k, out};
}

StationarySlice stationary_policy(const PolicyTable& policy, double tol) {
  if (policy.steps == 0) throw std::invalid_argument("stationary_policy: empty policy");
  const auto first = policy.slice(0);
  const auto allowed = static_cast<std::size_t>(tol * static_cast<double>(first.size()));
  std::size_t s = 0;
  while (s + 1 < policy.steps) {
    const auto next = policy.slice(s + 1);
    std::size_t diff = 0;
    for (std::size_t k = 0; k < first.size(); ++k) diff += first[k] != next[k];
    if (diff > allowed) break;
    ++s;
  }
  StationarySlice out;
  out.stationary = s > 0 || policy.steps == 1;
  out.step = out.stationary ? s : policy.steps - 1;
  // within tolerance, slice 0 is the most converged representative of the run
  const auto chosen = policy.slice(out.stationary ? 0 : out.step);
  out.slice.assign(chosen.begin(), chosen.end());
  out.time = static_cast<double>(out.step) * policy.dt;
  return out;
}

double mean_payoff(const ValueTable& values, const std::vector<double>& weights,
                   const Eigen::Ref<const Eigen::VectorXd>& initial_distribution) {
  if (static_cast<std::size_t>(values.cols()) != weights.size() || values.rows() != initial_distribution.size())
    throw std::invalid_argument("mean_payoff: dimension mismatch");
  const Eigen::Map<const Eigen::VectorXd> w(weights.data(), static_cast<Eigen::Index>(weights.size()));
  return initial_distribution.dot(values * w);
}

}  // namespace oed
