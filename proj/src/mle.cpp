#include <cmath>
#include <numbers>
#include <stdexcept>

#include "oed/filter.hpp"

namespace oed {

MleResult grid_mle(const LikelihoodCurve& curve) {
  const std::size_t M = curve.theta.size();
  if (M < 3) throw std::invalid_argument("grid_mle: at least three grid points required");
  if (curve.log_likelihood.size() != M) throw std::invalid_argument("grid_mle: curve length mismatch");
  std::size_t j = 0;
  for (std::size_t k = 0; k < M; ++k) {
    if (!std::isfinite(curve.log_likelihood[k])) throw std::invalid_argument("grid_mle: non-finite log-likelihood");
    if (curve.log_likelihood[k] > curve.log_likelihood[j]) j = k;
  }
  MleResult r;
  r.curve = curve;
  if (j == 0 || j == M - 1) {
    r.estimate = curve.theta[j];
    r.in_range = false;
    return r;
  }
  const double a = curve.theta[j - 1], b = curve.theta[j], c = curve.theta[j + 1];
  const double fa = curve.log_likelihood[j - 1], fb = curve.log_likelihood[j], fc = curve.log_likelihood[j + 1];
  // vertex of the parabola through the three points
  const double p = (b - a) * (fb - fc);
  const double q = (b - c) * (fb - fa);
  const double den = p - q;
  r.estimate = den == 0 ? b : b - 0.5 * ((b - a) * p - (b - c) * q) / den;
  r.in_range = true;
  return r;
}

GaussianConditional condition_gaussian(const Eigen::VectorXd& m, const Eigen::VectorXd& c_diag,
                                       const Eigen::MatrixXd& H, const Eigen::VectorXd& R_diag,
                                       const Eigen::VectorXd& y) {
  const Eigen::MatrixXd C = c_diag.asDiagonal();
  Eigen::MatrixXd S = H * C * H.transpose();
  S.diagonal() += R_diag;
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) throw NumericError("condition_gaussian: singular innovation covariance");
  GaussianConditional g;
  g.gain = llt.solve(H * C).transpose();
  const Eigen::VectorXd e = y - H * m;
  g.mean = m + g.gain * e;
  g.cov = (Eigen::MatrixXd::Identity(m.size(), m.size()) - g.gain * H) * C;
  double logdet = 0;
  for (Eigen::Index k = 0; k < S.rows(); ++k) logdet += 2.0 * std::log(llt.matrixLLT()(k, k));
  const Eigen::VectorXd a = llt.matrixL().solve(e);
  g.log_predictive = -0.5 * (static_cast<double>(S.rows()) * std::log(2.0 * std::numbers::pi) + logdet + a.squaredNorm());
  return g;
}

double log_mean_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const double mx = v.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((v.array() - mx).exp().sum() / static_cast<double>(v.size()));
}

void systematic_resample(const Eigen::Ref<const Eigen::VectorXd>& log_weights, double u0,
                         std::vector<Eigen::Index>& ancestors) {
  const Eigen::Index N = log_weights.size();
  ancestors.resize(static_cast<std::size_t>(N));
  const double mx = log_weights.maxCoeff();
  const Eigen::ArrayXd w = (log_weights.array() - mx).exp();
  const double total = w.sum();
  double cum = w(0) / total;
  Eigen::Index j = 0;
  for (Eigen::Index i = 0; i < N; ++i) {
    const double pos = (u0 + static_cast<double>(i)) / static_cast<double>(N);
    while (pos > cum && j + 1 < N) cum += w(++j) / total;
    ancestors[static_cast<std::size_t>(i)] = j;
  }
}

}  // namespace oed
