#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "trapnet/error.hpp"
#include "trapnet/metric_space.hpp"

namespace trapnet {

/// Finite measure: positive weights on points of a carrier, keyed by point index.
class DiscreteMeasure {
 public:
  DiscreteMeasure() = default;
  explicit DiscreteMeasure(SpacePtr carrier) : carrier_(std::move(carrier)) {}
  DiscreteMeasure(SpacePtr carrier, const std::map<std::size_t, double>& atoms) : carrier_(std::move(carrier)) {
    for (const auto& [x, w] : atoms) add(x, w);
  }

  /// Adds mass w > 0 at point x.
  void add(std::size_t x, double w) {
    if (!(w > 0.0) || !std::isfinite(w)) fail(Errc::PreconditionViolated, "atom weight must be positive and finite");
    if (carrier_ && x >= carrier_->size()) fail(Errc::UnknownVertex, "atom outside carrier");
    atoms_[x] += w;
  }

  const SpacePtr& carrier() const noexcept { return carrier_; }
  const std::map<std::size_t, double>& atoms() const noexcept { return atoms_; }
  std::size_t support_size() const noexcept { return atoms_.size(); }
  bool empty() const noexcept { return atoms_.empty(); }

  double weight(std::size_t x) const {
    auto it = atoms_.find(x);
    return it == atoms_.end() ? 0.0 : it->second;
  }

  double mass() const {
    double s = 0.0;
    for (const auto& [x, w] : atoms_) s += w;
    return s;
  }

  DiscreteMeasure scaled(double factor) const {
    DiscreteMeasure out(carrier_);
    for (const auto& [x, w] : atoms_) out.add(x, w * factor);
    return out;
  }

  friend bool operator==(const DiscreteMeasure& a, const DiscreteMeasure& b) {
    return a.carrier_ == b.carrier_ && a.atoms_ == b.atoms_;
  }

 private:
  SpacePtr carrier_;
  std::map<std::size_t, double> atoms_;
};

/// Atom of a point measure: (point, weight) or (point, mark, weight), with multiplicity.
struct PointAtom {
  std::size_t point = 0;
  double weight = 0.0;
  double mark = 0.0;
  std::size_t multiplicity = 1;

  friend bool operator==(const PointAtom&, const PointAtom&) = default;
};

/// Finite integer-valued measure on carrier x (0,inf), optionally with marks.
class PointMeasure {
 public:
  PointMeasure() = default;
  explicit PointMeasure(SpacePtr carrier, bool marked = false) : carrier_(std::move(carrier)), marked_(marked) {}

  void add(std::size_t point, double weight, std::size_t multiplicity = 1) { add_marked(point, 0.0, weight, multiplicity); }

  void add_marked(std::size_t point, double mark, double weight, std::size_t multiplicity = 1) {
    if (!(weight > 0.0) || !std::isfinite(weight)) fail(Errc::PreconditionViolated, "atom weight coordinate must be positive");
    if (!(mark >= 0.0)) fail(Errc::PreconditionViolated, "marks must be nonnegative");
    if (multiplicity == 0) fail(Errc::PreconditionViolated, "multiplicity must be positive");
    if (carrier_ && point >= carrier_->size()) fail(Errc::UnknownVertex, "atom outside carrier");
    atoms_.push_back({point, weight, mark, multiplicity});
  }

  const SpacePtr& carrier() const noexcept { return carrier_; }
  bool marked() const noexcept { return marked_; }
  const std::vector<PointAtom>& atoms() const noexcept { return atoms_; }
  bool empty() const noexcept { return atoms_.empty(); }

  std::size_t total_count() const {
    std::size_t n = 0;
    for (const auto& a : atoms_) n += a.multiplicity;
    return n;
  }

 private:
  SpacePtr carrier_;
  bool marked_ = false;
  std::vector<PointAtom> atoms_;
};

}  // namespace trapnet
