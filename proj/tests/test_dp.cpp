#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oed/dp.hpp"
#include "oed/models.hpp"

using namespace oed;

namespace {

using Dense = std::vector<Eigen::MatrixXd>;  // one row-stochastic matrix per (theta, u)

struct SmallChain {
  int S, U, M;
  Dense P;                             // index theta * U + u
  std::vector<Eigen::MatrixXd> reward; // per theta, S x U
  std::vector<double> w;
};

SmallChain random_chain(int S, int U, int M, bool theta_dependent, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0, 1);
  SmallChain c{S, U, M, {}, {}, {}};
  for (int t = 0; t < M; ++t)
    for (int u = 0; u < U; ++u) {
      if (!theta_dependent && t > 0) {
        c.P.push_back(c.P[static_cast<std::size_t>(u)]);
        continue;
      }
      Eigen::MatrixXd p(S, S);
      for (int i = 0; i < S; ++i) {
        for (int j = 0; j < S; ++j) p(i, j) = unif(rng) < 0.3 ? 0.0 : unif(rng);
        if (p.row(i).sum() == 0) p(i, i) = 1;
        p.row(i) /= p.row(i).sum();
      }
      c.P.push_back(p);
    }
  for (int t = 0; t < M; ++t) {
    Eigen::MatrixXd r(S, U);
    for (int i = 0; i < S; ++i)
      for (int u = 0; u < U; ++u) r(i, u) = unif(rng);
    c.reward.push_back(r);
  }
  for (int t = 0; t < M; ++t) c.w.push_back(0.2 + unif(rng));
  double sum = 0;
  for (double x : c.w) sum += x;
  for (double& x : c.w) x /= sum;
  return c;
}

ControlledChain to_chain(const SmallChain& c) {
  ControlledChain ch;
  ch.states = c.S;
  ch.thetas = static_cast<std::size_t>(c.M);
  ch.controls = static_cast<std::size_t>(c.U);
  for (const auto& p : c.P) ch.P.push_back(p.sparseView().cast<double>());
  for (auto& p : ch.P) p.makeCompressed();
  ch.reward = c.reward;
  return ch;
}

// Per-theta values of a Markov policy, pi[i * S + s], at every step; values[i] is S x M.
std::vector<Eigen::MatrixXd> evaluate_all(const SmallChain& c, const std::vector<int>& pi, int T) {
  std::vector<Eigen::MatrixXd> V(static_cast<std::size_t>(T + 1), Eigen::MatrixXd::Zero(c.S, c.M));
  for (int i = T - 1; i >= 0; --i)
    for (int s = 0; s < c.S; ++s) {
      const int u = pi[static_cast<std::size_t>(i * c.S + s)];
      for (int t = 0; t < c.M; ++t) {
        double acc = c.reward[static_cast<std::size_t>(t)](s, u);
        for (int j = 0; j < c.S; ++j)
          acc += c.P[static_cast<std::size_t>(t * c.U + u)](s, j) * V[static_cast<std::size_t>(i + 1)](j, t);
        V[static_cast<std::size_t>(i)](s, t) = acc;
      }
    }
  return V;
}

struct BruteForce {
  Eigen::MatrixXd best;                        // T x S, optimal weighted value from (i, s)
  std::vector<std::vector<int>> best_actions;  // per (i, s): first actions of optimal policies
};

// Exhaustive search over every deterministic Markov policy.
BruteForce brute_force(const SmallChain& c, int T) {
  const int cells = T * c.S;
  long total = 1;
  for (int k = 0; k < cells; ++k) total *= c.U;
  BruteForce bf;
  bf.best = Eigen::MatrixXd::Constant(T, c.S, -1.0);
  bf.best_actions.assign(static_cast<std::size_t>(cells), {});
  Eigen::Map<const Eigen::VectorXd> w(c.w.data(), c.M);
  std::vector<int> pi(static_cast<std::size_t>(cells));
  for (long code = 0; code < total; ++code) {
    long rest = code;
    for (int k = 0; k < cells; ++k) {
      pi[static_cast<std::size_t>(k)] = static_cast<int>(rest % c.U);
      rest /= c.U;
    }
    const auto V = evaluate_all(c, pi, T);
    for (int i = 0; i < T; ++i)
      for (int s = 0; s < c.S; ++s) {
        const double v = V[static_cast<std::size_t>(i)].row(s).dot(w);
        auto& acts = bf.best_actions[static_cast<std::size_t>(i * c.S + s)];
        const int a = pi[static_cast<std::size_t>(i * c.S + s)];
        if (v > bf.best(i, s) + 1e-12) {
          bf.best(i, s) = v;
          acts = {a};
        } else if (std::abs(v - bf.best(i, s)) <= 1e-12 &&
                   std::find(acts.begin(), acts.end(), a) == acts.end()) {
          acts.push_back(a);
        }
      }
  }
  return bf;
}

void expect_brute_force_agreement(int S, int U, int M, int T, std::uint64_t seed) {
  const auto c = random_chain(S, U, M, false, seed);
  const auto chain = to_chain(c);
  std::vector<ValueTable> per_step(static_cast<std::size_t>(T + 1));
  const auto res = backward_induction(chain, c.w, static_cast<std::size_t>(T),
                                      [&](std::size_t togo, const ValueTable& V) {
                                        per_step[static_cast<std::size_t>(T) - togo] = V;
                                      });
  const auto bf = brute_force(c, T);
  Eigen::Map<const Eigen::VectorXd> w(c.w.data(), M);
  for (int i = 0; i < T; ++i)
    for (int s = 0; s < S; ++s) {
      EXPECT_NEAR(per_step[static_cast<std::size_t>(i)].row(s).dot(w), bf.best(i, s), 1e-12)
          << "step " << i << " state " << s;
      const auto& acts = bf.best_actions[static_cast<std::size_t>(i * S + s)];
      if (acts.size() == 1)
        EXPECT_EQ(res.table[static_cast<std::size_t>(i * S + s)], acts[0]) << "step " << i << " state " << s;
    }
}

}  // namespace

// ============================================================================
// Brute-force equivalence
// ============================================================================

TEST(BruteForce, ThreeStatesTwoControlsHorizonThree) { expect_brute_force_agreement(3, 2, 3, 3, 1); }
TEST(BruteForce, TwoStatesThreeControlsHorizonThree) { expect_brute_force_agreement(2, 3, 2, 3, 2); }
TEST(BruteForce, FiveStatesTwoControlsHorizonTwo) { expect_brute_force_agreement(5, 2, 3, 2, 3); }
TEST(BruteForce, FourStatesTwoControlsHorizonFour) { expect_brute_force_agreement(4, 2, 2, 4, 4); }
TEST(BruteForce, ThreeStatesThreeControlsHorizonTwo) { expect_brute_force_agreement(3, 3, 4, 2, 5); }

TEST(BruteForce, ParameterDependentTransitionsFollowSharedPolicyRule) {
  // With theta-dependent dynamics the shared policy is defined by the per-theta recursion,
  // so check the table against a direct re-derivation and each V_theta against policy evaluation.
  const int S = 5, U = 3, M = 4, T = 4;
  const auto c = random_chain(S, U, M, true, 6);
  const auto chain = to_chain(c);
  const auto res = backward_induction(chain, c.w, T);
  Eigen::MatrixXd V = Eigen::MatrixXd::Zero(S, M);
  std::vector<int> pi(static_cast<std::size_t>(T * S));
  for (int i = T - 1; i >= 0; --i) {
    Eigen::MatrixXd next(S, M);
    for (int s = 0; s < S; ++s) {
      int best = 0;
      double best_v = -1;
      std::vector<double> q_best;
      for (int u = 0; u < U; ++u) {
        std::vector<double> q(static_cast<std::size_t>(M));
        double total = 0;
        for (int t = 0; t < M; ++t) {
          q[static_cast<std::size_t>(t)] =
              c.reward[static_cast<std::size_t>(t)](s, u) + c.P[static_cast<std::size_t>(t * U + u)].row(s).dot(V.col(t));
          total += c.w[static_cast<std::size_t>(t)] * q[static_cast<std::size_t>(t)];
        }
        if (total > best_v) {
          best_v = total;
          best = u;
          q_best = q;
        }
      }
      pi[static_cast<std::size_t>(i * S + s)] = best;
      for (int t = 0; t < M; ++t) next(s, t) = q_best[static_cast<std::size_t>(t)];
    }
    V = next;
  }
  for (std::size_t k = 0; k < pi.size(); ++k) EXPECT_EQ(res.table[k], pi[k]);
  EXPECT_LE((res.values - V).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((evaluate_all(c, pi, T)[0] - res.values).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((evaluate_policy(chain, res.table, T) - res.values).cwiseAbs().maxCoeff(), 1e-12);
}

// ============================================================================
// Structural properties
// ============================================================================

TEST(BackwardInduction, ControlFreeProblemPicksFirstIndex) {
  auto c = random_chain(4, 3, 2, false, 7);
  for (int u = 1; u < 3; ++u) {
    c.P[static_cast<std::size_t>(u)] = c.P[0];
    for (auto& r : c.reward) r.col(u) = r.col(0);
  }
  for (int t = 1; t < 2; ++t)
    for (int u = 0; u < 3; ++u) c.P[static_cast<std::size_t>(t * 3 + u)] = c.P[0];
  const auto res = backward_induction(to_chain(c), c.w, 5);
  for (auto u : res.table) EXPECT_EQ(u, 0);
}

TEST(BackwardInduction, ValuesGrowWithRemainingHorizon) {
  const auto c = random_chain(5, 3, 3, true, 8);
  ValueTable prev = ValueTable::Zero(5, 3);
  backward_induction(to_chain(c), c.w, 10, [&](std::size_t, const ValueTable& V) {
    EXPECT_TRUE((V.array() >= prev.array()).all());
    prev = V;
  });
}

TEST(BackwardInduction, EnlargingControlsNeverLowersWeightedValue) {
  const auto c = random_chain(5, 3, 3, false, 9);
  SmallChain small = c;
  small.U = 2;
  small.P.clear();
  for (int t = 0; t < 3; ++t)
    for (int u = 0; u < 2; ++u) small.P.push_back(c.P[static_cast<std::size_t>(t * 3 + u)]);
  for (auto& r : small.reward) r = r.leftCols(2).eval();
  const auto big = backward_induction(to_chain(c), c.w, 6);
  const auto little = backward_induction(to_chain(small), c.w, 6);
  Eigen::Map<const Eigen::VectorXd> w(c.w.data(), 3);
  EXPECT_TRUE(((big.values * w).array() >= (little.values * w).array() - 1e-14).all());
}

TEST(BackwardInduction, WeightScalingLeavesPolicyUnchanged) {
  DoubleWell<> dw;
  Grid grid({{-5, 5, 100}});
  MCAConfig cfg{0.01, {1}};
  ControlSet controls({0, -2, 2, -4, 4});
  std::vector<double> th{2, 3, 4, 5}, w{1, 2, 3, 4}, w3{3, 6, 9, 12};
  const auto a = solve_policy(dw, grid, cfg, controls, PriorGrid(th, w), 2.0);
  const auto b = solve_policy(dw, grid, cfg, controls, PriorGrid(th, w3), 2.0);
  EXPECT_EQ(a.policy.table, b.policy.table);
}

TEST(BackwardInduction, Deterministic) {
  const auto c = random_chain(5, 3, 3, true, 10);
  const auto a = backward_induction(to_chain(c), c.w, 8);
  const auto b = backward_induction(to_chain(c), c.w, 8);
  EXPECT_EQ(a.table, b.table);
  EXPECT_EQ(a.values, b.values);
}

TEST(BackwardInduction, WeightCountMismatchIsAnError) {
  const auto c = random_chain(3, 2, 2, false, 11);
  EXPECT_THROW(backward_induction(to_chain(c), {1.0}, 2), std::invalid_argument);
}

TEST(EvaluatePolicy, RejectsBadTables) {
  const auto c = random_chain(3, 2, 2, false, 12);
  const auto chain = to_chain(c);
  std::vector<std::uint8_t> bad(6, 2);
  EXPECT_THROW(evaluate_policy(chain, bad, 2), std::out_of_range);
  EXPECT_THROW(evaluate_policy(chain, std::vector<std::uint8_t>(5, 0), 2), std::invalid_argument);
}

// ============================================================================
// Sets and grids
// ============================================================================

TEST(ControlSet, Validation) {
  EXPECT_THROW(ControlSet(std::vector<double>{}), std::invalid_argument);
  EXPECT_THROW(ControlSet({1, 2, 1}), std::invalid_argument);
  EXPECT_THROW(ControlSet(std::vector<double>(257, 0.0)), std::invalid_argument);
  ControlSet s({0, -2, 2});
  EXPECT_EQ(s.index_of(2), 2);
  EXPECT_EQ(s.index_of(3), -1);
}

TEST(PriorGrid, UniformAndNormalized) {
  const auto p = PriorGrid::uniform(2, 5, 10);
  ASSERT_EQ(p.size(), 10u);
  EXPECT_EQ(p.theta().front(), 2.0);
  EXPECT_EQ(p.theta().back(), 5.0);
  EXPECT_NEAR(p.theta()[3], 3.0, 1e-15);
  for (double w : p.weights()) EXPECT_NEAR(w, 0.1, 1e-15);
  EXPECT_EQ(p.midpoint(), 3.5);
  EXPECT_THROW(PriorGrid({1, 1}, {1, 1}), std::invalid_argument);
  EXPECT_THROW(PriorGrid({1, 2}, {0, 0}), std::invalid_argument);
  EXPECT_THROW(PriorGrid({1, 2}, {1, -1}), std::invalid_argument);
}

TEST(HorizonSteps, RoundsUpWithTolerance) {
  EXPECT_EQ(horizon_steps(30, 0.01), 3000u);
  EXPECT_EQ(horizon_steps(1000, 2), 500u);
  EXPECT_EQ(horizon_steps(0.015, 0.01), 2u);
}

// ============================================================================
// Full solves
// ============================================================================

namespace {

const PolicySolution& double_well_solution() {
  static const PolicySolution sol = [] {
    DoubleWell<> dw;
    Grid grid({{-5, 5, 100}});
    ControlSet controls({0, -2, 2, -4, 4, -6, 6, -8, 8, -10, 10});
    return solve_policy(dw, grid, MCAConfig{0.01, {1}}, controls, PriorGrid::uniform(2, 5, 10), 30.0);
  }();
  return sol;
}

}  // namespace

TEST(SolvePolicy, DoubleWellPushesAcrossTheBarrier) {
  const auto& sol = double_well_solution();
  const auto& p = sol.policy;
  EXPECT_EQ(p.steps, 3000u);
  int checked = 0;
  for (int j = 0; j < p.grid.axis(0).n; ++j) {
    const double x = p.grid.axis(0).node(j);
    if (std::abs(x) < 0.3 || std::abs(x) > 1.5) continue;
    const double u = p.controls[p.at(0, j)];
    if (x > 0) EXPECT_LT(u, 0) << "x = " << x;
    else EXPECT_GT(u, 0) << "x = " << x;
    ++checked;
  }
  EXPECT_GT(checked, 10);
}

TEST(SolvePolicy, ValuesNonNegativeAndMonotoneInHorizon) {
  DoubleWell<> dw;
  Grid grid({{-5, 5, 40}});
  ControlSet controls({0, -4, 4});
  const auto prior = PriorGrid::uniform(2, 5, 4);
  const auto a = solve_policy(dw, grid, MCAConfig{0.05, {1}}, controls, prior, 1.0);
  const auto b = solve_policy(dw, grid, MCAConfig{0.05, {1}}, controls, prior, 2.0);
  EXPECT_GE(a.values.minCoeff(), 0.0);
  Eigen::VectorXd point = Eigen::VectorXd::Zero(grid.size());
  point(grid.nearest(Eigen::VectorXd::Constant(1, -1.0))) = 1.0;
  EXPECT_LE(mean_payoff(a.values, prior.weights(), point), mean_payoff(b.values, prior.weights(), point));
}

TEST(SolvePolicy, StabilityViolationIsAnError) {
  MorrisLecar<> ml;
  Grid grid({{-80, 80, 72}, {0, 1, 72}});
  EXPECT_THROW(solve_policy(ml, grid, MCAConfig{2.0, {1, 1}}, ControlSet({0, 5}), PriorGrid::uniform(4, 5, 2), 10.0),
               StabilityError);
  EXPECT_THROW(solve_policy(ml, grid, MCAConfig{2.0, {1, 3}}, ControlSet({0, 5}), PriorGrid::uniform(4, 5, 2), 0.0),
               std::invalid_argument);
}

// ============================================================================
// Queries
// ============================================================================

namespace {

PolicyTable toy_policy() {
  PolicyTable p;
  p.model = "double_well";
  p.grid = Grid({{0, 1, 3}});  // nodes 0, 0.5, 1
  p.dt = 1.0;
  p.controls = ControlSet({10, 20, 30});
  p.prior = PriorGrid::uniform(1, 2, 2);
  p.steps = 3;
  p.table = {0, 1, 2, 2, 1, 0, 1, 1, 1};
  return p;
}

Eigen::VectorXd v1(double x) { return Eigen::VectorXd::Constant(1, x); }

}  // namespace

TEST(LookupControl, OnNodeAndStep) {
  const auto p = toy_policy();
  EXPECT_EQ(lookup_control(p, v1(0.5), 1.0).value, 20);
  EXPECT_EQ(lookup_control(p, v1(1.0), 0.0).value, 30);
  EXPECT_FALSE(lookup_control(p, v1(1.0), 0.0).out_of_horizon);
}

TEST(LookupControl, ClampsStateToGrid) {
  const auto p = toy_policy();
  EXPECT_EQ(lookup_control(p, v1(-7.0), 1.0).value, 30);
  EXPECT_EQ(lookup_control(p, v1(7.0), 1.0).value, 10);
}

TEST(LookupControl, TiesGoToLowerNodeAndEarlierStep) {
  const auto p = toy_policy();
  EXPECT_EQ(lookup_control(p, v1(0.25), 0.0).value, 10);  // node 0
  EXPECT_EQ(lookup_control(p, v1(0.0), 0.5).value, 10);   // step 0
  EXPECT_EQ(lookup_control(p, v1(0.0), 0.51).value, 30);  // step 1
}

TEST(LookupControl, OutsideHorizonUsesBoundarySlice) {
  const auto p = toy_policy();
  const auto late = lookup_control(p, v1(0.0), 7.0);
  EXPECT_TRUE(late.out_of_horizon);
  EXPECT_EQ(late.value, 20);
  const auto early = lookup_control(p, v1(0.0), -1.0);
  EXPECT_TRUE(early.out_of_horizon);
  EXPECT_EQ(early.value, 10);
  EXPECT_THROW(lookup_control(p, v1(0.0), std::nan("")), std::invalid_argument);
}

TEST(StationaryPolicy, SingleSlice) {
  auto p = toy_policy();
  p.steps = 1;
  p.table.resize(3);
  const auto s = stationary_policy(p);
  EXPECT_TRUE(s.stationary);
  EXPECT_EQ(s.slice, (std::vector<std::uint8_t>{0, 1, 2}));
}

TEST(StationaryPolicy, LeadingRun) {
  auto p = toy_policy();
  p.table = {0, 1, 2, 0, 1, 2, 1, 1, 1};
  const auto s = stationary_policy(p);
  EXPECT_TRUE(s.stationary);
  EXPECT_EQ(s.step, 1u);
  EXPECT_EQ(s.time, 1.0);
  EXPECT_EQ(s.slice, (std::vector<std::uint8_t>{0, 1, 2}));
}

TEST(StationaryPolicy, NeverStationaryReturnsHorizonSlice) {
  const auto p = toy_policy();
  const auto s = stationary_policy(p);
  EXPECT_FALSE(s.stationary);
  EXPECT_EQ(s.step, 2u);
  EXPECT_EQ(s.slice, (std::vector<std::uint8_t>{1, 1, 1}));
  auto q = toy_policy();
  q.table = {0, 1, 2, 0, 1, 0, 1, 1, 1};
  const auto tol = stationary_policy(q, 0.34);
  EXPECT_TRUE(tol.stationary);
  EXPECT_EQ(tol.step, 1u);
  EXPECT_EQ(tol.slice, (std::vector<std::uint8_t>{0, 1, 2}));
}

TEST(MeanPayoff, PointMassAndMismatch) {
  ValueTable V(3, 2);
  V << 1, 2, 3, 4, 5, 6;
  EXPECT_DOUBLE_EQ(mean_payoff(V, {0.25, 0.75}, Eigen::Vector3d(0, 1, 0)), 0.25 * 3 + 0.75 * 4);
  EXPECT_THROW(mean_payoff(V, {1.0}, Eigen::Vector3d(0, 1, 0)), std::invalid_argument);
}
