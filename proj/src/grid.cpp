#include "oed/grid.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace oed {

int GridAxis::nearest(double x) const {
  if (!(x > lo)) return 0;
  if (!(x < hi)) return n - 1;
  const double s = (x - lo) / spacing();
  int j = static_cast<int>(std::floor(s));
  if (s - j > 0.5) ++j;
  return std::min(std::max(j, 0), n - 1);
}

Grid::Grid(std::vector<GridAxis> axes) : axes_(std::move(axes)) {
  if (axes_.empty() || dim() > kMaxDim)
    throw std::invalid_argument("Grid: dimension must be between 1 and " + std::to_string(kMaxDim));
  size_ = 1;
  for (int d = 0; d < dim(); ++d) {
    const auto& a = axes_[static_cast<std::size_t>(d)];
    if (a.n < 3) throw std::invalid_argument("Grid: axis " + std::to_string(d) + " needs n >= 3");
    if (!(a.hi > a.lo) || !std::isfinite(a.lo) || !std::isfinite(a.hi))
      throw std::invalid_argument("Grid: axis " + std::to_string(d) + " needs finite lo < hi");
    stride_.push_back(size_);
    size_ *= a.n;
  }
}

Eigen::Index Grid::flat(std::span<const int> multi) const {
  Eigen::Index f = 0;
  for (int d = 0; d < dim(); ++d) f += multi[static_cast<std::size_t>(d)] * stride(d);
  return f;
}

Eigen::VectorXd Grid::node(Eigen::Index flat) const {
  Eigen::VectorXd x(dim());
  for (int d = 0; d < dim(); ++d) x(d) = axis(d).node(coordinate_index(flat, d));
  return x;
}

Eigen::Index Grid::nearest(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != dim()) throw std::invalid_argument("Grid::nearest: dimension mismatch");
  Eigen::Index f = 0;
  for (int d = 0; d < dim(); ++d) f += axis(d).nearest(x(d)) * stride(d);
  return f;
}

}  // namespace oed
