#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

#include "oed/models.hpp"
#include "oed/random.hpp"
#include "oed/sde.hpp"

namespace oed {

// ============================================================================
// Likelihood curves and grid MLE
// ============================================================================

struct LikelihoodCurve {
  std::vector<double> theta;
  std::vector<double> log_likelihood;
};

struct MleResult {
  double estimate = 0;
  bool in_range = false;
  LikelihoodCurve curve;
};

/// Grid argmax refined by a 3-point parabola; endpoint maxima are returned as-is and flagged out of range.
MleResult grid_mle(const LikelihoodCurve& curve);

/// Gaussian prior N(m, diag(c)) conditioned on y = H x + N(0, diag(R)).
struct GaussianConditional {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  Eigen::MatrixXd gain;
  double log_predictive;  // log N(y; H m, H C H' + R)
};

GaussianConditional condition_gaussian(const Eigen::VectorXd& m, const Eigen::VectorXd& c_diag,
                                       const Eigen::MatrixXd& H, const Eigen::VectorXd& R_diag,
                                       const Eigen::VectorXd& y);

/// log(mean(exp(v)))
double log_mean_exp(const Eigen::Ref<const Eigen::VectorXd>& v);

/// Systematic resampling with a single uniform offset u0 in (0, 1).
void systematic_resample(const Eigen::Ref<const Eigen::VectorXd>& log_weights, double u0, std::vector<Eigen::Index>& ancestors);

// ============================================================================
// Observations
// ============================================================================

struct ObservationRecord {
  std::vector<double> times;
  Eigen::MatrixXd values;  // channels x observations

  std::size_t size() const { return times.size(); }
};

// ============================================================================
// Coupled particle ensembles
// ============================================================================

/**
 * @brief One particle cloud per theta. Particle i reads deviates from
 * noise.offset(i) at index `step` for every theta, so clouds are driven by
 * identical noise.
 */
template <DiffusionModel M>
struct ParticleEnsemble {
  using Scalar = typename M::Scalar;
  using State = typename M::State;
  using Cloud = Eigen::Matrix<Scalar, M::dim, Eigen::Dynamic>;

  std::vector<double> theta;
  std::vector<Cloud> particles;
  Eigen::VectorXd log_likelihood;
  NoiseStream noise;
  NoiseStream resample_noise;
  std::uint64_t step = 0;
  bool resample = true;
  std::size_t designated = 0;  // cloud used for state estimates

  // diagnostics over all updates and clouds
  double min_ess_fraction = 1.0;
  double min_unique_fraction = 1.0;

  ParticleEnsemble(std::vector<double> thetas, Eigen::Index n, const State& x0, NoiseStream noise_,
                   NoiseStream resample_noise_, bool resample_ = true, std::size_t designated_ = 0)
      : theta(std::move(thetas)),
        log_likelihood(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(theta.size()))),
        noise(noise_),
        resample_noise(resample_noise_),
        resample(resample_),
        designated(designated_) {
    if (theta.empty() || n < 1) throw std::invalid_argument("ParticleEnsemble: need at least one theta and particle");
    if (static_cast<std::uint64_t>(n) > kMaxStreamIndex)
      throw std::invalid_argument("ParticleEnsemble: particle count exceeds the stream index range");
    if (designated >= theta.size()) throw std::invalid_argument("ParticleEnsemble: designated cloud out of range");
    particles.assign(theta.size(), Cloud(M::dim, n));
    for (auto& c : particles) c.colwise() = x0;
  }

  Eigen::Index size() const { return particles.front().cols(); }
  State estimate() const { return particles[designated].rowwise().mean(); }
};

/// Advance every particle one unconditional Euler step under its own theta.
template <DiffusionModel M>
void propagate(ParticleEnsemble<M>& ens, const M& model, double u, double dt) {
  const Eigen::Index N = ens.size();
  for (Eigen::Index i = 0; i < N; ++i) {
    const auto eps = draw_state_noise<M>(ens.noise.offset(static_cast<std::uint64_t>(i)), ens.step);
    for (std::size_t t = 0; t < ens.theta.size(); ++t)
      ens.particles[t].col(i) = euler_step(model, typename M::State(ens.particles[t].col(i)), ens.theta[t], u, dt, eps);
  }
  ++ens.step;
}

/**
 * @brief Final Euler step into an observation time, sampled conditionally on y.
 *
 * Each particle moves to m = x + f dt with step covariance C = dt Sigma(x). The
 * predictive density N(y; H m, H C H' + R) gives the likelihood increment and,
 * when resampling is on, the ancestor weights. The new state is drawn from the
 * Gaussian conditional by the perturbation x = m + z + K (y - H (m + z) - v).
 * Returns the per-theta increments.
 */
template <DiffusionModel M>
Eigen::VectorXd conditional_update(ParticleEnsemble<M>& ens, const M& model, const ObservationModel& obs,
                                   const Eigen::Ref<const Eigen::VectorXd>& y, double u, double dt) {
  constexpr int D = M::dim;
  constexpr int kMaxObs = 4;
  using ObsVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxObs, 1>;
  using ObsMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxObs, kMaxObs>;
  using HMat = Eigen::Matrix<double, Eigen::Dynamic, D, 0, kMaxObs, D>;
  using Gain = Eigen::Matrix<double, D, Eigen::Dynamic, D == 1 ? Eigen::RowMajor : Eigen::ColMajor, D, kMaxObs>;
  using Vec = Eigen::Matrix<double, D, 1>;

  const Eigen::Index K = obs.channels();
  if (K < 1 || K > kMaxObs) throw std::invalid_argument("conditional_update: 1 to 4 observation channels supported");
  if (obs.H.cols() != D || y.size() != K || obs.R_diag.size() != K)
    throw std::invalid_argument("conditional_update: observation dimensions do not match the model");

  const Eigen::Index N = ens.size();
  const HMat H = obs.H;
  const ObsVec R = obs.R_diag;
  const ObsVec sqrtR = R.array().sqrt();
  const ObsVec yv = y;
  const double log2pi = std::log(2.0 * std::numbers::pi);

  // shared deviates: state part then observation perturbation
  Eigen::MatrixXd eps(D + K, N);
  for (Eigen::Index i = 0; i < N; ++i)
    ens.noise.offset(static_cast<std::uint64_t>(i))
        .normals(ens.step, std::span<double>(eps.col(i).data(), static_cast<std::size_t>(D + K)));
  const double u0 = ens.resample ? ens.resample_noise.uniform(ens.step) : 0.0;

  Eigen::VectorXd increments(static_cast<Eigen::Index>(ens.theta.size()));
  Eigen::Matrix<double, D, Eigen::Dynamic> mean(D, N), var(D, N);
  Eigen::VectorXd logw(N);
  std::vector<Eigen::Index> ancestors(static_cast<std::size_t>(N)), order(static_cast<std::size_t>(N));
  Eigen::VectorXd key(N), sorted_logw(N);

  auto innovation = [&](const Vec& c) {
    ObsMat S = H * c.asDiagonal() * H.transpose();
    S.diagonal() += R;
    Eigen::LLT<ObsMat> llt(S);
    if (llt.info() != Eigen::Success) throw NumericError("conditional_update: singular innovation covariance");
    return llt;
  };

  for (std::size_t t = 0; t < ens.theta.size(); ++t) {
    auto& cloud = ens.particles[t];
    for (Eigen::Index i = 0; i < N; ++i) {
      const typename M::State x = cloud.col(i);
      const Vec m = (x + model.drift(x, ens.theta[t], u) * dt).template cast<double>();
      const Vec c = (model.diffusion_diag(x) * dt).template cast<double>();
      mean.col(i) = m;
      var.col(i) = c;
      const auto llt = innovation(c);
      const ObsVec e = yv - H * m;
      const ObsVec a = llt.matrixL().solve(e);
      double logdet = 0;
      for (Eigen::Index k = 0; k < K; ++k) logdet += 2.0 * std::log(llt.matrixLLT()(k, k));
      logw(i) = -0.5 * (static_cast<double>(K) * log2pi + logdet + a.squaredNorm());
    }
    if (!logw.allFinite()) throw NumericError("conditional_update: non-finite predictive density");
    increments(static_cast<Eigen::Index>(t)) = log_mean_exp(logw);

    const double mx = logw.maxCoeff();
    const Eigen::ArrayXd w = (logw.array() - mx).exp();
    ens.min_ess_fraction = std::min(ens.min_ess_fraction, w.sum() * w.sum() / w.square().sum() / static_cast<double>(N));

    if (ens.resample) {
      // resample in the order of the predicted first channel so ancestors move continuously with theta
      for (Eigen::Index i = 0; i < N; ++i) {
        order[static_cast<std::size_t>(i)] = i;
        key(i) = H.row(0).dot(mean.col(i));
      }
      std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return key(a) < key(b); });
      for (Eigen::Index i = 0; i < N; ++i) sorted_logw(i) = logw(order[static_cast<std::size_t>(i)]);
      systematic_resample(sorted_logw, u0, ancestors);
      Eigen::Index unique = 1;
      for (std::size_t i = 1; i < ancestors.size(); ++i) unique += ancestors[i] != ancestors[i - 1];
      for (auto& a : ancestors) a = order[static_cast<std::size_t>(a)];
      ens.min_unique_fraction = std::min(ens.min_unique_fraction, static_cast<double>(unique) / static_cast<double>(N));
    } else {
      for (Eigen::Index i = 0; i < N; ++i) ancestors[static_cast<std::size_t>(i)] = i;
    }

    for (Eigen::Index i = 0; i < N; ++i) {
      const Eigen::Index a = ancestors[static_cast<std::size_t>(i)];
      const Vec m = mean.col(a);
      const Vec c = var.col(a);
      const auto llt = innovation(c);
      const Gain gain = llt.solve(H * c.asDiagonal()).transpose();
      const Vec z = c.array().sqrt() * eps.col(i).head<D>().array();
      const ObsVec v = sqrtR.array() * eps.col(i).tail(K).array();
      typename M::State x = (m + z + gain * (yv - H * (m + z) - v)).template cast<typename M::Scalar>();
      if (!x.allFinite()) throw NumericError("conditional_update: non-finite particle state");
      project_state(model, x);
      cloud.col(i) = x;
    }
  }
  ens.log_likelihood += increments;
  ++ens.step;
  return increments;
}

// ============================================================================
// Filtering a recorded observation sequence
// ============================================================================

struct FilterOptions {
  Eigen::Index particles = 1000;
  bool resample = true;
  std::size_t designated = 0;
};

template <DiffusionModel M>
struct FilterResult {
  LikelihoodCurve curve;
  std::vector<typename M::State> estimates;  // after each observation
  double min_ess_fraction = 1.0;
  double min_unique_fraction = 1.0;
};

/**
 * @brief Run coupled ensembles over all prior thetas. The control is queried as
 * control_source(step, t, estimate) at t = 0 and after each observation, and held
 * in between.
 */
template <DiffusionModel M, typename ControlSource>
FilterResult<M> run_filter(const M& model, const ObservationModel& obs, const ObservationRecord& data,
                           const std::vector<double>& thetas, ControlSource&& control_source, double dt,
                           const typename M::State& x0, const NoiseStream& noise, const NoiseStream& resample_noise,
                           const FilterOptions& opt) {
  if (data.values.cols() != static_cast<Eigen::Index>(data.times.size()) || data.values.rows() != obs.channels())
    throw std::invalid_argument("run_filter: observation record does not match the observation model");
  ParticleEnsemble<M> ens(thetas, opt.particles, x0, noise, resample_noise, opt.resample, opt.designated);
  FilterResult<M> out;
  std::size_t step = 0;
  double u = control_source(step, 0.0, ens.estimate());
  for (std::size_t k = 0; k < data.size(); ++k) {
    const double s = data.times[k] / dt;
    const auto target = static_cast<std::size_t>(std::llround(s));
    if (std::abs(s - static_cast<double>(target)) > 1e-6 || target <= step)
      throw std::invalid_argument("run_filter: observation times must be increasing multiples of dt");
    while (step + 1 < target) {
      propagate(ens, model, u, dt);
      ++step;
    }
    conditional_update(ens, model, obs, data.values.col(static_cast<Eigen::Index>(k)), u, dt);
    ++step;
    out.estimates.push_back(ens.estimate());
    u = control_source(step, static_cast<double>(step) * dt, out.estimates.back());
  }
  out.curve.theta = thetas;
  out.curve.log_likelihood.assign(ens.log_likelihood.data(), ens.log_likelihood.data() + ens.log_likelihood.size());
  out.min_ess_fraction = ens.min_ess_fraction;
  out.min_unique_fraction = ens.min_unique_fraction;
  return out;
}

}  // namespace oed
