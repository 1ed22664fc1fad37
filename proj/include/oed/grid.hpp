#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

namespace oed {

struct GridAxis {
  double lo = 0;
  double hi = 0;
  int n = 0;

  double spacing() const { return (hi - lo) / (n - 1); }
  double node(int j) const { return lo + j * spacing(); }
  /// Nearest node index after clamping x into [lo, hi]; ties go to the lower index.
  int nearest(double x) const;

  bool operator==(const GridAxis&) const = default;
};

/**
 * @brief Regular tensor grid. Flat indices run with the first dimension fastest.
 */
class Grid {
 public:
  static constexpr int kMaxDim = 4;

  Grid() = default;
  explicit Grid(std::vector<GridAxis> axes);

  int dim() const { return static_cast<int>(axes_.size()); }
  Eigen::Index size() const { return size_; }
  const GridAxis& axis(int d) const { return axes_[static_cast<std::size_t>(d)]; }
  const std::vector<GridAxis>& axes() const { return axes_; }
  Eigen::Index stride(int d) const { return stride_[static_cast<std::size_t>(d)]; }

  int coordinate_index(Eigen::Index flat, int d) const {
    return static_cast<int>((flat / stride(d)) % axis(d).n);
  }
  Eigen::Index flat(std::span<const int> multi) const;
  Eigen::VectorXd node(Eigen::Index flat) const;
  Eigen::Index nearest(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  bool operator==(const Grid& o) const { return axes_ == o.axes_; }

 private:
  std::vector<GridAxis> axes_;
  std::vector<Eigen::Index> stride_;
  Eigen::Index size_ = 0;
};

}  // namespace oed
