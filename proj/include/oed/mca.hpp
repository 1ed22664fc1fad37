#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "oed/errors.hpp"
#include "oed/grid.hpp"
#include "oed/sde.hpp"

namespace oed {

// ============================================================================
// Split-operator Markov chain approximation
// ============================================================================

struct MCAConfig {
  double dt = 0;       // DP time step
  std::vector<int> r;  // diffusion skip factor per dimension

  double mu(const Grid& grid, int d) const {
    const double h = grid.axis(d).spacing();
    return dt / (h * h);
  }
};

struct StencilEntry {
  std::array<int, Grid::kMaxDim> offset{};
  double probability = 0;
};

using TransitionStencil = std::vector<StencilEntry>;

/// One-dimensional jump law: up to three (offset, probability) pairs.
struct AxisStencil {
  std::array<int, 3> offset{};
  std::array<double, 3> probability{};
  int size = 0;

  void push(int o, double p) {
    offset[static_cast<std::size_t>(size)] = o;
    probability[static_cast<std::size_t>(size)] = p;
    ++size;
  }
};

/// Biased jump: move sign(f) floor(c) cells and one more with probability c - floor(c), c = |f| dt / h.
inline AxisStencil drift_axis(double f, double dt, double h) {
  AxisStencil s;
  const double c = std::abs(f) * dt / h;
  const double whole = std::floor(c);
  const double frac = c - whole;
  const int sign = f < 0 ? -1 : 1;
  const int k = static_cast<int>(whole);
  if (frac > 0) {
    s.push(sign * (k + 1), frac);
    s.push(sign * k, 1.0 - frac);
  } else {
    s.push(sign * k, 1.0);
  }
  return s;
}

/// Symmetric walk of +-r cells, each with probability sigma mu / (2 r^2).
inline AxisStencil diffusion_axis(double sigma, double mu, int r) {
  AxisStencil s;
  const double p = 0.5 * sigma * mu / (static_cast<double>(r) * r);
  if (!(p >= 0) || p > 0.5 + 1e-12)
    throw StabilityError("diffusion probability " + std::to_string(p) + " outside [0, 1/2]");
  if (p == 0) {
    s.push(0, 1.0);
    return s;
  }
  s.push(r, p);
  s.push(-r, p);
  s.push(0, 1.0 - 2.0 * p);
  return s;
}

namespace detail {

inline TransitionStencil tensor_product(const std::vector<AxisStencil>& axes) {
  TransitionStencil out(1);
  out[0].probability = 1.0;
  for (std::size_t d = 0; d < axes.size(); ++d) {
    TransitionStencil next;
    next.reserve(out.size() * static_cast<std::size_t>(axes[d].size));
    for (const auto& e : out)
      for (int k = 0; k < axes[d].size; ++k) {
        StencilEntry n = e;
        n.offset[d] = axes[d].offset[static_cast<std::size_t>(k)];
        n.probability *= axes[d].probability[static_cast<std::size_t>(k)];
        next.push_back(n);
      }
    out = std::move(next);
  }
  return out;
}

/// Apply an offset with the stay-on-exit rule, dimension by dimension.
inline Eigen::Index shifted(const Grid& grid, Eigen::Index flat, const std::array<int, Grid::kMaxDim>& offset) {
  Eigen::Index out = flat;
  for (int d = 0; d < grid.dim(); ++d) {
    const int j = grid.coordinate_index(flat, d) + offset[static_cast<std::size_t>(d)];
    if (j >= 0 && j < grid.axis(d).n) out += offset[static_cast<std::size_t>(d)] * grid.stride(d);
  }
  return out;
}

template <DiffusionModel M>
typename M::State node_state(const Grid& grid, Eigen::Index flat) {
  typename M::State x;
  for (int d = 0; d < M::dim; ++d) x(d) = grid.axis(d).node(grid.coordinate_index(flat, d));
  return x;
}

}  // namespace detail

template <DiffusionModel M>
TransitionStencil drift_stencil(const M& model, const Grid& grid, Eigen::Index node, double theta, double u,
                                double dt) {
  const auto f = model.drift(detail::node_state<M>(grid, node), theta, u);
  std::vector<AxisStencil> axes;
  for (int d = 0; d < M::dim; ++d) axes.push_back(drift_axis(f(d), dt, grid.axis(d).spacing()));
  return detail::tensor_product(axes);
}

template <DiffusionModel M>
TransitionStencil diffusion_stencil(const M& model, const Grid& grid, Eigen::Index node, const MCAConfig& cfg) {
  const auto s = model.diffusion_diag(detail::node_state<M>(grid, node));
  std::vector<AxisStencil> axes;
  for (int d = 0; d < M::dim; ++d) {
    try {
      axes.push_back(diffusion_axis(s(d), cfg.mu(grid, d), cfg.r[static_cast<std::size_t>(d)]));
    } catch (const StabilityError& e) {
      throw StabilityError("node " + std::to_string(node) + ", dimension " + std::to_string(d) + ": " + e.what());
    }
  }
  return detail::tensor_product(axes);
}

/**
 * @brief E[V(x'')] where x' follows the drift stencil from `node` and x'' follows
 * diffusion_at(x') from x'. Exits are replaced by staying, per substep and dimension.
 */
template <typename Values, typename DiffusionAt>
double composite_expectation(const Values& V, const Grid& grid, Eigen::Index node, const TransitionStencil& drift,
                             DiffusionAt&& diffusion_at) {
  double acc = 0;
  for (const auto& a : drift) {
    const Eigen::Index mid = detail::shifted(grid, node, a.offset);
    for (const auto& b : diffusion_at(mid)) acc += a.probability * b.probability * V(detail::shifted(grid, mid, b.offset));
  }
  return acc;
}

template <DiffusionModel M, typename Values>
double composite_expectation(const Values& V, const M& model, const Grid& grid, const MCAConfig& cfg,
                             Eigen::Index node, double theta, double u) {
  return composite_expectation(V, grid, node, drift_stencil(model, grid, node, theta, u, cfg.dt),
                               [&](Eigen::Index mid) { return diffusion_stencil(model, grid, mid, cfg); });
}

/// Row-stochastic transition matrix of the composite chain for one (theta, u).
template <DiffusionModel M>
Eigen::SparseMatrix<double, Eigen::RowMajor> transition_matrix(const M& model, const Grid& grid, const MCAConfig& cfg,
                                                               double theta, double u) {
  if (grid.dim() != M::dim) throw std::invalid_argument("transition_matrix: grid and model dimensions differ");
  std::vector<TransitionStencil> diffusion(static_cast<std::size_t>(grid.size()));
  for (Eigen::Index k = 0; k < grid.size(); ++k)
    diffusion[static_cast<std::size_t>(k)] = diffusion_stencil(model, grid, k, cfg);

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(grid.size()) * 2 * diffusion[0].size());
  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    for (const auto& a : drift_stencil(model, grid, k, theta, u, cfg.dt)) {
      const Eigen::Index mid = detail::shifted(grid, k, a.offset);
      for (const auto& b : diffusion[static_cast<std::size_t>(mid)])
        trips.emplace_back(k, detail::shifted(grid, mid, b.offset), a.probability * b.probability);
    }
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor> P(grid.size(), grid.size());
  P.setFromTriplets(trips.begin(), trips.end());
  return P;
}

// ============================================================================
// Validation
// ============================================================================

struct StabilityViolation {
  Eigen::Index node;
  int dim;
  double probability;  // per-side diffusion probability, > 1/2
};

struct ValidationReport {
  std::vector<StabilityViolation> violations;
  std::vector<double> max_sigma_mu;     // max over nodes of Sigma_dd mu_d
  std::vector<int> min_r;               // smallest admissible skip factor per dimension
  std::vector<double> max_drift_cells;  // max |f_d| dt / h_d over (node, theta, u)
  double max_dt = std::numeric_limits<double>::infinity();  // largest dt for the configured r

  bool ok() const { return violations.empty(); }
};

/// Skip factors ceil(sqrt(max Sigma_dd mu_d)), at least 1.
template <DiffusionModel M>
std::vector<int> minimal_skip(const M& model, const Grid& grid, double dt) {
  std::vector<int> r(static_cast<std::size_t>(M::dim), 1);
  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    const auto s = model.diffusion_diag(detail::node_state<M>(grid, k));
    for (int d = 0; d < M::dim; ++d) {
      const double h = grid.axis(d).spacing();
      const int need = static_cast<int>(std::ceil(std::sqrt(s(d) * dt / (h * h)) - 1e-12));
      r[static_cast<std::size_t>(d)] = std::max(r[static_cast<std::size_t>(d)], std::max(need, 1));
    }
  }
  return r;
}

template <DiffusionModel M>
ValidationReport validate(const M& model, const Grid& grid, const MCAConfig& cfg, const std::vector<double>& thetas,
                          const std::vector<double>& controls) {
  ValidationReport rep;
  const auto D = static_cast<std::size_t>(M::dim);
  rep.max_sigma_mu.assign(D, 0.0);
  rep.max_drift_cells.assign(D, 0.0);
  std::vector<double> max_sigma(D, 0.0);
  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    const auto x = detail::node_state<M>(grid, k);
    const auto s = model.diffusion_diag(x);
    for (std::size_t d = 0; d < D; ++d) {
      const int dd = static_cast<int>(d);
      const double sm = s(dd) * cfg.mu(grid, dd);
      max_sigma[d] = std::max(max_sigma[d], static_cast<double>(s(dd)));
      rep.max_sigma_mu[d] = std::max(rep.max_sigma_mu[d], sm);
      const int r = d < cfg.r.size() ? cfg.r[d] : 1;
      const double p = 0.5 * sm / (static_cast<double>(r) * r);
      if (!(p <= 0.5)) rep.violations.push_back({k, dd, p});
    }
    for (double th : thetas)
      for (double u : controls) {
        const auto f = model.drift(x, th, u);
        for (std::size_t d = 0; d < D; ++d)
          rep.max_drift_cells[d] = std::max(
              rep.max_drift_cells[d], std::abs(f(static_cast<int>(d))) * cfg.dt / grid.axis(static_cast<int>(d)).spacing());
      }
  }
  for (std::size_t d = 0; d < D; ++d) {
    rep.min_r.push_back(std::max(1, static_cast<int>(std::ceil(std::sqrt(rep.max_sigma_mu[d]) - 1e-12))));
    if (max_sigma[d] > 0) {
      const double h = grid.axis(static_cast<int>(d)).spacing();
      const int r = d < cfg.r.size() ? cfg.r[d] : 1;
      rep.max_dt = std::min(rep.max_dt, static_cast<double>(r) * r * h * h / max_sigma[d]);
    }
  }
  return rep;
}

}  // namespace oed
