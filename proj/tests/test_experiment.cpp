#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "oed/experiment.hpp"
#include "oed/models.hpp"

using namespace oed;

namespace {

using S1 = Eigen::Matrix<double, 1, 1>;

ExperimentConfig<DoubleWell<>> double_well_config(ObservationRegime regime, double horizon) {
  ExperimentConfig<DoubleWell<>> cfg;
  cfg.model.params.A = 3.84;
  cfg.prior = PriorGrid::uniform(2, 5, 10);
  cfg.regime = regime;
  cfg.obs = default_observation(DoubleWell<>{});
  cfg.dt = 0.01;
  cfg.horizon = horizon;
  cfg.particles = 100;
  cfg.trials = 8;
  cfg.seed = 42;
  cfg.x0 = S1(-1.0);
  return cfg;
}

const PolicyTable& short_policy() {
  static const PolicyTable p = [] {
    DoubleWell<> dw;
    return solve_policy(dw, Grid({{-5, 5, 100}}), MCAConfig{0.01, {1}}, ControlSet({0, -2, 2, -4, 4, -6, 6}),
                        PriorGrid::uniform(2, 5, 10), 5.0)
        .policy;
  }();
  return p;
}

// dx = exp(x) dt + dW; leaves any grid quickly
struct Explosive {
  using Scalar = double;
  static constexpr int dim = 1;
  using State = S1;
  static constexpr std::string_view name = "explosive";
  double theta() const { return 1; }
  State lower() const { return State(-1); }
  State upper() const { return State(1); }
  State drift(const State& x, double th, double) const { return State(th * std::exp(x(0))); }
  State drift_dtheta(const State& x, double, double) const { return State(std::exp(x(0))); }
  State diffusion_diag(const State&) const { return State(1.0); }
};

}  // namespace

// ============================================================================
// Summary statistics
// ============================================================================

TEST(Summarize, DegenerateBatch) {
  const auto s = summarize({4.0, 4.0, 4.0}, {true, true, true}, 4.0, 30, "0");
  EXPECT_EQ(s.std_dev, 0.0);
  EXPECT_EQ(s.std_dev_err, 0.0);
  EXPECT_EQ(s.bias, 0.0);
  EXPECT_EQ(s.in_range, 1.0);
}

TEST(Summarize, StdDevErrFormula) {
  // sd 0.05947 with n = 256
  EXPECT_NEAR(0.05947 / std::sqrt(2.0 * 255), 0.0026334, 1e-7);
  std::vector<double> est;
  for (int k = 0; k < 256; ++k) est.push_back(k % 2 ? 1.0 : -1.0);
  const auto s = summarize(est, std::vector<bool>(256, true), 0.0, 1, "0");
  const double sd = std::sqrt(256.0 / 255.0);
  EXPECT_NEAR(s.std_dev, sd, 1e-14);
  EXPECT_NEAR(s.std_dev_err, sd / std::sqrt(510.0), 1e-14);
}

TEST(Summarize, InRangeFractionAndBias) {
  const auto s = summarize({2.0, 3.0, 4.0, 5.0}, {false, true, true, false}, 3.0, 7, "dynamic");
  EXPECT_EQ(s.in_range, 0.5);
  EXPECT_EQ(s.mean, 3.5);
  EXPECT_EQ(s.bias, 0.5);
  EXPECT_EQ(s.n, 4u);
  EXPECT_THROW(summarize({1.0}, {}, 0, 1, "0"), std::invalid_argument);
}

TEST(EmitTable, HeaderOnlyForEmptyList) {
  std::ostringstream os;
  emit_table({}, os, TableStyle::delimited);
  EXPECT_EQ(os.str(), "Duration,Control,N,In-range,Mean,Bias,Std.Dev,Std.Dev.Err\n");
}

TEST(EmitTable, FourSignificantDigits) {
  SummaryStats s;
  s.duration = 30;
  s.control = "dynamic";
  s.n = 256;
  s.in_range = 0.921875;
  s.mean = 4.53219;
  s.bias = 0.13219;
  s.std_dev = 0.0594712;
  s.std_dev_err = 0.00263412;
  std::ostringstream os;
  emit_table({s}, os, TableStyle::delimited);
  EXPECT_EQ(os.str(), "Duration,Control,N,In-range,Mean,Bias,Std.Dev,Std.Dev.Err\n"
                      "30,dynamic,256,92.19%,4.532,0.1322,0.05947,0.002634\n");
  std::ostringstream al;
  emit_table({s, s}, al, TableStyle::aligned);
  std::istringstream lines(al.str());
  std::string a, b, c;
  std::getline(lines, a);
  std::getline(lines, b);
  std::getline(lines, c);
  EXPECT_EQ(a.size(), b.size());
  EXPECT_EQ(b, c);
}

// ============================================================================
// Trials
// ============================================================================

TEST(RunTrial, FullObservationDeterministic) {
  const auto cfg = double_well_config(ObservationRegime::full, 5);
  const auto a = run_trial(cfg, nullptr, 3);
  const auto b = run_trial(cfg, nullptr, 3);
  EXPECT_EQ(a.estimate, b.estimate);
  EXPECT_EQ(a.curve.log_likelihood, b.curve.log_likelihood);
  EXPECT_EQ(a.realized_fi, b.realized_fi);
  EXPECT_NE(run_trial(cfg, nullptr, 4).estimate, a.estimate);
}

TEST(RunTrial, PartialDynamicDeterministic) {
  auto cfg = double_well_config(ObservationRegime::partial, 5);
  cfg.mode = ControlMode::dynamic;
  cfg.retain_paths = true;
  const auto a = run_trial(cfg, &short_policy(), 1);
  const auto b = run_trial(cfg, &short_policy(), 1);
  EXPECT_EQ(a.estimate, b.estimate);
  EXPECT_EQ(a.curve.log_likelihood, b.curve.log_likelihood);
  ASSERT_TRUE(a.path);
  EXPECT_EQ(a.path->states.size(), 501u);
  EXPECT_EQ(a.observations.size(), 20u);
  EXPECT_NEAR(a.observations.times.back(), 5.0, 1e-12);
  EXPECT_EQ(a.out_of_horizon_lookups, 0u);
  // control held between observations
  for (std::size_t i = 0; i < 500; ++i)
    if (i % 25) EXPECT_EQ(a.path->controls[i], a.path->controls[i - 1]) << "step " << i;
}

TEST(RunTrial, ConstantControlIsApplied) {
  auto cfg = double_well_config(ObservationRegime::partial, 1);
  cfg.constant_control = 2.0;
  cfg.retain_paths = true;
  const auto r = run_trial(cfg, nullptr, 0);
  for (double u : r.path->controls) EXPECT_EQ(u, 2.0);
  EXPECT_EQ(cfg.control_label(), "2");
}

TEST(RunTrial, ObservationsAreTruthPlusNoise) {
  auto cfg = double_well_config(ObservationRegime::partial, 30);
  cfg.retain_paths = true;
  const auto r = run_trial(cfg, nullptr, 0);
  double ss = 0;
  for (std::size_t k = 0; k < r.observations.size(); ++k) {
    const double x = r.path->states[25 * (k + 1)](0);
    ss += std::pow(r.observations.values(0, static_cast<Eigen::Index>(k)) - x, 2);
  }
  const double sd = std::sqrt(ss / static_cast<double>(r.observations.size()));
  EXPECT_NEAR(sd, 0.05, 0.01);
}

TEST(RunTrial, FullObservationRecoversOrnsteinUhlenbeckRate) {
  ExperimentConfig<OrnsteinUhlenbeck<>> cfg;
  cfg.prior = PriorGrid::uniform(0.5, 1.5, 11);
  cfg.regime = ObservationRegime::full;
  cfg.dt = 0.01;
  cfg.horizon = 200;
  cfg.trials = 16;
  const auto batch = run_batch(cfg, nullptr);
  // asymptotic sd of the rate MLE is sqrt(2 beta / T) = 0.1
  EXPECT_NEAR(batch.stats.mean, 1.0, 3 * 0.1 / 4 + 0.02);
  EXPECT_LT(batch.stats.std_dev, 0.2);
}

TEST(RunTrial, Preconditions) {
  auto cfg = double_well_config(ObservationRegime::full, 10);
  cfg.mode = ControlMode::dynamic;
  EXPECT_THROW(run_trial(cfg, nullptr, 0), std::invalid_argument);
  EXPECT_THROW(run_trial(cfg, &short_policy(), 0), std::invalid_argument);  // policy horizon 5 < 10
  auto bad = double_well_config(ObservationRegime::partial, 1);
  bad.obs.period = 0.333;
  EXPECT_THROW(run_trial(bad, nullptr, 0), std::invalid_argument);
}

TEST(RunTrial, NumericErrorsCarryTrialIndex) {
  ExperimentConfig<Explosive> cfg;
  cfg.prior = PriorGrid::uniform(0.5, 1.5, 3);
  cfg.dt = 0.1;
  cfg.horizon = 100;
  try {
    run_trial(cfg, nullptr, 7);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("trial 7"), std::string::npos);
  }
  cfg.trials = 4;
  EXPECT_THROW(run_batch(cfg, nullptr), std::runtime_error);
}

// ============================================================================
// Batches
// ============================================================================

TEST(RunBatch, MatchesIndividualTrials) {
  auto cfg = double_well_config(ObservationRegime::partial, 2);
  cfg.mode = ControlMode::dynamic;
  const auto batch = run_batch(cfg, &short_policy());
  ASSERT_EQ(batch.trials.size(), cfg.trials);
  std::vector<double> est;
  std::vector<bool> inside;
  for (std::uint64_t k = 0; k < cfg.trials; ++k) {
    const auto t = run_trial(cfg, &short_policy(), k);
    EXPECT_EQ(batch.trials[k].estimate, t.estimate);
    est.push_back(t.estimate);
    inside.push_back(t.in_range);
  }
  const auto s = summarize(est, inside, 3.84, 2, "dynamic");
  EXPECT_EQ(batch.stats.std_dev, s.std_dev);
  EXPECT_EQ(batch.stats.in_range, s.in_range);
  EXPECT_EQ(batch.stats.control, "dynamic");
}

TEST(RunBatch, NeedsTwoTrials) {
  auto cfg = double_well_config(ObservationRegime::full, 1);
  cfg.trials = 1;
  EXPECT_THROW(run_batch(cfg, nullptr), std::invalid_argument);
}

TEST(RunBatch, DynamicPayoffNotBelowBestConstant) {
  auto cfg = double_well_config(ObservationRegime::full, 5);
  cfg.trials = 64;
  cfg.mode = ControlMode::dynamic;
  const auto dyn = run_batch(cfg, &short_policy());
  cfg.mode = ControlMode::constant;
  double best = -1, best_se = 0;
  for (double u : short_policy().controls.values()) {
    cfg.constant_control = u;
    const auto c = run_batch(cfg, nullptr);
    if (c.mean_realized_fi() > best) {
      best = c.mean_realized_fi();
      best_se = c.realized_fi_se();
    }
  }
  EXPECT_GE(dyn.mean_realized_fi(), best - 3 * std::hypot(dyn.realized_fi_se(), best_se));
}
