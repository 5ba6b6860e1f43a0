#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "trapnet/error.hpp"

namespace trapnet {

using PointId = std::int64_t;

/// Finite rooted metric space. Points are addressed by index; ids are labels.
class FiniteMetricSpace {
 public:
  FiniteMetricSpace(std::vector<PointId> ids, Eigen::MatrixXd dist, std::size_t root = 0)
      : ids_(std::move(ids)), dist_(std::move(dist)), root_(root) {
    const auto n = static_cast<Eigen::Index>(ids_.size());
    if (n == 0) fail(Errc::EmptySet, "metric space needs at least one point");
    if (dist_.rows() != n || dist_.cols() != n) fail(Errc::PreconditionViolated, "distance matrix shape");
    if (root_ >= ids_.size()) fail(Errc::UnknownVertex, "root index out of range");
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!(dist_(i, i) == 0.0)) fail(Errc::PreconditionViolated, "nonzero diagonal");
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double a = dist_(i, j), b = dist_(j, i);
        if (!(a > 0.0) || !(b > 0.0)) fail(Errc::PreconditionViolated, "distance between distinct points must be positive");
        if (a != b) fail(Errc::PreconditionViolated, "distance matrix not symmetric");
      }
    }
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      if (!index_.emplace(ids_[i], i).second) fail(Errc::PreconditionViolated, "duplicate point id");
    }
  }

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t root() const noexcept { return root_; }
  const std::vector<PointId>& ids() const noexcept { return ids_; }
  PointId id(std::size_t i) const { return ids_.at(i); }
  double operator()(std::size_t i, std::size_t j) const {
    return dist_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  double root_distance(std::size_t i) const { return (*this)(root_, i); }
  const Eigen::MatrixXd& matrix() const noexcept { return dist_; }

  std::size_t index_of(PointId id) const {
    auto it = index_.find(id);
    if (it == index_.end()) fail(Errc::UnknownVertex, "unknown point id " + std::to_string(id));
    return it->second;
  }
  bool contains(PointId id) const { return index_.count(id) != 0; }

  /// Largest violation of the triangle inequality, 0 if none.
  double triangle_violation() const {
    const std::size_t n = size();
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k) worst = std::max(worst, (*this)(i, j) - (*this)(i, k) - (*this)(k, j));
    return worst;
  }

 private:
  std::vector<PointId> ids_;
  Eigen::MatrixXd dist_;
  std::size_t root_;
  std::unordered_map<PointId, std::size_t> index_;
};

using SpacePtr = std::shared_ptr<const FiniteMetricSpace>;

inline SpacePtr make_space(std::vector<PointId> ids, Eigen::MatrixXd dist, std::size_t root = 0) {
  return std::make_shared<const FiniteMetricSpace>(std::move(ids), std::move(dist), root);
}

/// Points on the real line, rooted at the point with index `root`.
inline SpacePtr line_space(const std::vector<double>& coords, std::size_t root = 0) {
  const auto n = static_cast<Eigen::Index>(coords.size());
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) d(i, j) = std::abs(coords[i] - coords[j]);
  std::vector<PointId> ids(coords.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<PointId>(i);
  return make_space(std::move(ids), std::move(d), root);
}

/// Points in the plane with the Euclidean metric.
inline SpacePtr plane_space(const std::vector<std::array<double, 2>>& pts, std::vector<PointId> ids, std::size_t root = 0) {
  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) d(i, j) = std::hypot(pts[i][0] - pts[j][0], pts[i][1] - pts[j][1]);
  return make_space(std::move(ids), std::move(d), root);
}

}  // namespace trapnet
