#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <utility>
#include <vector>

#include "trapnet/detail/max_flow.hpp"
#include "trapnet/error.hpp"
#include "trapnet/measure.hpp"
#include "trapnet/metric_space.hpp"

namespace trapnet {

namespace detail {

inline const FiniteMetricSpace& common_carrier(const SpacePtr& a, const SpacePtr& b) {
  if (!a || !b || a != b) fail(Errc::CarrierMismatch, "measures live on different carriers");
  return *a;
}

struct Atoms {
  std::vector<std::size_t> points;
  std::vector<double> weights;
};

inline Atoms atoms_of(const DiscreteMeasure& m) {
  Atoms a;
  for (const auto& [x, w] : m.atoms()) {
    a.points.push_back(x);
    a.weights.push_back(w);
  }
  return a;
}

/// from(A) - to(A^eps) for A given as a mask over from's atoms, summed in index order.
inline double set_deficit(const FiniteMetricSpace& S, const Atoms& from, const Atoms& to, const std::vector<char>& inA, double eps) {
  double gain = 0.0;
  for (std::size_t i = 0; i < from.points.size(); ++i)
    if (inA[i]) gain += from.weights[i];
  double cover = 0.0;
  for (std::size_t j = 0; j < to.points.size(); ++j) {
    bool near = false;
    for (std::size_t i = 0; i < from.points.size() && !near; ++i)
      near = inA[i] && S(from.points[i], to.points[j]) <= eps;
    if (near) cover += to.weights[j];
  }
  return gain - cover;
}

/// max over A of from(A) - to(A^eps), via the minimum cut of the transport network.
inline double flow_deficit(const FiniteMetricSpace& S, const Atoms& from, const Atoms& to, double eps) {
  const std::size_t nf = from.points.size(), nt = to.points.size();
  if (nf == 0) return 0.0;
  double total = 0.0;
  for (double w : from.weights) total += w;
  for (double w : to.weights) total += w;
  const std::size_t src = nf + nt, sink = nf + nt + 1;
  MaxFlow flow(nf + nt + 2, 1e-13 * total);
  for (std::size_t i = 0; i < nf; ++i) flow.add_edge(src, i, from.weights[i]);
  for (std::size_t j = 0; j < nt; ++j) flow.add_edge(nf + j, sink, to.weights[j]);
  for (std::size_t i = 0; i < nf; ++i)
    for (std::size_t j = 0; j < nt; ++j)
      if (S(from.points[i], to.points[j]) <= eps) flow.add_edge(i, nf + j, std::numeric_limits<double>::infinity());
  flow.run(src, sink);
  const auto side = flow.source_side(src);
  std::vector<char> inA(nf, 0);
  for (std::size_t i = 0; i < nf; ++i) inA[i] = side[i];
  return std::max(0.0, set_deficit(S, from, to, inA, eps));
}

inline double subset_deficit(const FiniteMetricSpace& S, const Atoms& from, const Atoms& to, double eps) {
  const std::size_t nf = from.points.size();
  if (nf > 20) fail(Errc::TooLargeForEnumeration, "subset enumeration needs support <= 20");
  double best = 0.0;
  std::vector<char> inA(nf, 0);
  for (std::uint32_t mask = 1; mask < (1U << nf); ++mask) {
    for (std::size_t i = 0; i < nf; ++i) inA[i] = (mask >> i) & 1U;
    best = std::max(best, set_deficit(S, from, to, inA, eps));
  }
  return best;
}

/// Candidate radii: 0 and every distance between the two supports, sorted.
inline std::vector<double> cross_distances(const FiniteMetricSpace& S, const Atoms& a, const Atoms& b) {
  std::vector<double> c{0.0};
  for (auto x : a.points)
    for (auto y : b.points) c.push_back(S(x, y));
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
  return c;
}

}  // namespace detail

/// Prohorov distance between finite measures on a common carrier.
///
/// The two-sided mass deficit D(eps) is a nonincreasing step function that
/// only changes at cross-support distances e_k, and d_P = min_k max(e_k, D(e_k)).
/// The first k with D(e_k) <= e_k is located by binary search.
inline double prohorov(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  const auto& S = detail::common_carrier(mu.carrier(), nu.carrier());
  const auto a = detail::atoms_of(mu), b = detail::atoms_of(nu);
  if (a.points.empty() && b.points.empty()) return 0.0;
  if (a.points.empty()) return nu.mass();
  if (b.points.empty()) return mu.mass();
  const auto cand = detail::cross_distances(S, a, b);
  auto D = [&](double e) { return std::max(detail::flow_deficit(S, a, b, e), detail::flow_deficit(S, b, a, e)); };
  std::size_t lo = 0, hi = cand.size();
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (D(cand[mid]) <= cand[mid])
      hi = mid;
    else
      lo = mid + 1;
  }
  if (lo == cand.size()) return D(cand.back());
  if (lo == 0) return 0.0;
  return std::min(cand[lo], D(cand[lo - 1]));
}

/// Prohorov distance from the definition: every candidate radius, every subset.
inline double prohorov_by_subsets(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  const auto& S = detail::common_carrier(mu.carrier(), nu.carrier());
  const auto a = detail::atoms_of(mu), b = detail::atoms_of(nu);
  if (a.points.empty() && b.points.empty()) return 0.0;
  if (a.points.empty()) return nu.mass();
  if (b.points.empty()) return mu.mass();
  double best = std::numeric_limits<double>::infinity();
  for (double e : detail::cross_distances(S, a, b)) {
    const double d = std::max(detail::subset_deficit(S, a, b, e), detail::subset_deficit(S, b, a, e));
    best = std::min(best, std::max(e, d));
  }
  return best;
}

/// Keeps atoms with d(root, x) < r.
inline DiscreteMeasure restrict(const DiscreteMeasure& m, double r) {
  if (!m.carrier()) fail(Errc::PreconditionViolated, "restriction needs a carrier");
  DiscreteMeasure out(m.carrier());
  for (const auto& [x, w] : m.atoms())
    if (m.carrier()->root_distance(x) < r) out.add(x, w);
  return out;
}

inline std::vector<std::size_t> restrict(const FiniteMetricSpace& S, const std::vector<std::size_t>& set, double r) {
  std::vector<std::size_t> out;
  for (auto x : set)
    if (S.root_distance(x) < r) out.push_back(x);
  return out;
}

namespace detail {

/// Sorted distinct root distances of the given points, starting with 0.
inline std::vector<double> root_breakpoints(const FiniteMetricSpace& S, const std::vector<std::size_t>& pts) {
  std::vector<double> a{0.0};
  for (auto x : pts) a.push_back(S.root_distance(x));
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  return a;
}

/// Integral over r of e^{-r} f(r) where f is constant on (a_k, a_{k+1}] and
/// equals value(k), with a_{K+1} = infinity.
template <class F>
double exp_weighted_sum(const std::vector<double>& a, F&& value) {
  double total = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double lo = std::exp(-a[k]);
    const double w = (k + 1 < a.size()) ? -lo * std::expm1(-(a[k + 1] - a[k])) : lo;
    if (w > 0.0) total += w * value(k);
  }
  return total;
}

}  // namespace detail

/// Vague distance: integral of e^{-r} (1 ^ d_P(mu^(r), nu^(r))) dr, evaluated exactly.
inline double vague_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  const auto& S = detail::common_carrier(mu.carrier(), nu.carrier());
  std::vector<std::size_t> pts;
  for (const auto& [x, w] : mu.atoms()) pts.push_back(x);
  for (const auto& [x, w] : nu.atoms()) pts.push_back(x);
  const auto a = detail::root_breakpoints(S, pts);
  return detail::exp_weighted_sum(a, [&](std::size_t k) {
    DiscreteMeasure m1(mu.carrier()), m2(nu.carrier());
    for (const auto& [x, w] : mu.atoms())
      if (S.root_distance(x) <= a[k]) m1.add(x, w);
    for (const auto& [x, w] : nu.atoms())
      if (S.root_distance(x) <= a[k]) m2.add(x, w);
    return std::min(1.0, prohorov(m1, m2));
  });
}

/// One unit atom (x, w) per atom of the measure.
inline PointMeasure point_map(const DiscreteMeasure& nu) {
  PointMeasure out(nu.carrier());
  for (const auto& [x, w] : nu.atoms()) out.add(x, w);
  return out;
}

/// M(pi)({x}) = sum of multiplicity times weight coordinate at x.
inline DiscreteMeasure measure_map(const PointMeasure& pi) {
  DiscreteMeasure out(pi.carrier());
  for (const auto& a : pi.atoms()) out.add(a.point, a.weight * static_cast<double>(a.multiplicity));
  return out;
}

/// Point measures lifted to the product carrier S x (0,inf) with the metric
/// max(d(x,y), |log v - log w|), rooted at (root, 1).
struct ProductLift {
  SpacePtr carrier;
  DiscreteMeasure first;
  DiscreteMeasure second;
};

inline ProductLift lift_to_product(const PointMeasure& p1, const PointMeasure& p2) {
  const auto& S = detail::common_carrier(p1.carrier(), p2.carrier());
  std::map<std::pair<std::size_t, double>, std::size_t> index;
  std::vector<std::pair<std::size_t, double>> pts;
  auto intern = [&](std::size_t x, double w) {
    auto [it, fresh] = index.emplace(std::make_pair(x, w), pts.size());
    if (fresh) pts.emplace_back(x, w);
    return it->second;
  };
  const std::size_t root = intern(S.root(), 1.0);
  for (const auto& a : p1.atoms()) intern(a.point, a.weight);
  for (const auto& a : p2.atoms()) intern(a.point, a.weight);
  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& [x, v] = pts[static_cast<std::size_t>(i)];
      const auto& [y, w] = pts[static_cast<std::size_t>(j)];
      d(i, j) = (i == j) ? 0.0 : std::max(S(x, y), std::abs(std::log(v) - std::log(w)));
    }
  }
  std::vector<PointId> ids(pts.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<PointId>(i);
  auto carrier = make_space(std::move(ids), std::move(d), root);
  DiscreteMeasure m1(carrier), m2(carrier);
  for (const auto& a : p1.atoms()) m1.add(index.at({a.point, a.weight}), static_cast<double>(a.multiplicity));
  for (const auto& a : p2.atoms()) m2.add(index.at({a.point, a.weight}), static_cast<double>(a.multiplicity));
  return {carrier, std::move(m1), std::move(m2)};
}

/// Vague distance between point measures on the product carrier.
inline double point_vague_distance(const PointMeasure& p1, const PointMeasure& p2) {
  auto lift = lift_to_product(p1, p2);
  return vague_distance(lift.first, lift.second);
}

/// max of the vague distance and the vague distance of the point maps.
inline double dis_measure_distance(const DiscreteMeasure& nu1, const DiscreteMeasure& nu2) {
  const double dv = vague_distance(nu1, nu2);
  return std::max(dv, point_vague_distance(point_map(nu1), point_map(nu2)));
}

struct PointProcessFunctionals {
  /// m^(r): weight value -> total mass (multiplicity times weight) at that value.
  std::map<double, double> m;
  double M_eps = 0.0;
  double W = 0.0;
};

inline PointProcessFunctionals pp_functionals(const PointMeasure& pi, double r, double eps) {
  if (!(r > 0.0) || !(eps > 0.0)) fail(Errc::PreconditionViolated, "r and eps must be positive");
  if (!pi.carrier()) fail(Errc::PreconditionViolated, "point measure needs a carrier");
  PointProcessFunctionals out;
  for (const auto& a : pi.atoms()) {
    if (!(pi.carrier()->root_distance(a.point) < r)) continue;
    const double mass = static_cast<double>(a.multiplicity) * a.weight;
    out.m[a.weight] += mass;
    out.W = std::max(out.W, a.weight);
  }
  for (const auto& [w, mass] : out.m)
    if (w <= eps) out.M_eps += mass;
  return out;
}

/// Hausdorff distance between index sets; infinity if exactly one side is empty.
inline double hausdorff(const FiniteMetricSpace& S, const std::vector<std::size_t>& A, const std::vector<std::size_t>& B) {
  if (A.empty() && B.empty()) return 0.0;
  if (A.empty() || B.empty()) return std::numeric_limits<double>::infinity();
  auto one_side = [&](const std::vector<std::size_t>& X, const std::vector<std::size_t>& Y) {
    double worst = 0.0;
    for (auto x : X) {
      double best = std::numeric_limits<double>::infinity();
      for (auto y : Y) best = std::min(best, S(x, y));
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(one_side(A, B), one_side(B, A));
}

/// Integral of e^{-r} (1 ^ d_H(A^(r), B^(r))) dr.
inline double local_hausdorff(const FiniteMetricSpace& S, const std::vector<std::size_t>& A, const std::vector<std::size_t>& B) {
  std::vector<std::size_t> pts(A);
  pts.insert(pts.end(), B.begin(), B.end());
  const auto a = detail::root_breakpoints(S, pts);
  return detail::exp_weighted_sum(a, [&](std::size_t k) {
    std::vector<std::size_t> ra, rb;
    for (auto x : A)
      if (S.root_distance(x) <= a[k]) ra.push_back(x);
    for (auto x : B)
      if (S.root_distance(x) <= a[k]) rb.push_back(x);
    return std::min(1.0, hausdorff(S, ra, rb));
  });
}

/// Relation between index sets of two spaces.
struct Correspondence {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
};

namespace detail {

inline void check_correspondence(const Correspondence& C, const FiniteMetricSpace& A, const FiniteMetricSpace& B) {
  std::vector<char> ca(A.size(), 0), cb(B.size(), 0);
  for (const auto& [u, x] : C.pairs) {
    if (u >= A.size() || x >= B.size()) fail(Errc::NotACorrespondence, "pair outside the spaces");
    ca[u] = 1;
    cb[x] = 1;
  }
  if (std::find(ca.begin(), ca.end(), 0) != ca.end() || std::find(cb.begin(), cb.end(), 0) != cb.end())
    fail(Errc::NotACorrespondence, "relation does not cover both spaces");
}

}  // namespace detail

inline double distortion(const Correspondence& C, const FiniteMetricSpace& A, const FiniteMetricSpace& B) {
  detail::check_correspondence(C, A, B);
  double worst = 0.0;
  for (const auto& [u, x] : C.pairs)
    for (const auto& [v, y] : C.pairs) worst = std::max(worst, std::abs(A(u, v) - B(x, y)));
  return worst;
}

/// Disjoint union of A and B (A's points first) with cross distances
/// inf over (u',x') in C of dA(u,u') + dis/2 + slack + dB(x',x). Rooted at A's root.
inline SpacePtr glue(const Correspondence& C, const FiniteMetricSpace& A, const FiniteMetricSpace& B, double slack) {
  if (!(slack > 0.0)) fail(Errc::PreconditionViolated, "slack must be positive");
  const double dis = distortion(C, A, B);
  const std::size_t na = A.size(), nb = B.size();
  const auto n = static_cast<Eigen::Index>(na + nb);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < na; ++j) d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = A(i, j);
  for (std::size_t i = 0; i < nb; ++i)
    for (std::size_t j = 0; j < nb; ++j) d(static_cast<Eigen::Index>(na + i), static_cast<Eigen::Index>(na + j)) = B(i, j);
  for (std::size_t u = 0; u < na; ++u) {
    for (std::size_t x = 0; x < nb; ++x) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& [up, xp] : C.pairs) best = std::min(best, A(u, up) + B(xp, x));
      const double v = best + 0.5 * dis + slack;
      d(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(na + x)) = v;
      d(static_cast<Eigen::Index>(na + x), static_cast<Eigen::Index>(u)) = v;
    }
  }
  std::vector<PointId> ids(na + nb);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<PointId>(i);
  return make_space(std::move(ids), std::move(d), A.root());
}

/// Partial map from a domain space to a value space, given by its graph.
struct PartialMap {
  SpacePtr domain;
  SpacePtr values;
  std::vector<std::pair<std::size_t, std::size_t>> graph;
};

/// Smallest eps such that every graph point of each map is within eps of a
/// graph point of the other in both coordinates, clamped at 1.
inline double vardom_distance(const PartialMap& f, const PartialMap& g) {
  if (!f.domain || f.domain != g.domain || !f.values || f.values != g.values)
    fail(Errc::CarrierMismatch, "partial maps must share domain and value spaces");
  if (f.graph.empty() && g.graph.empty()) return 0.0;
  if (f.graph.empty() || g.graph.empty()) return 1.0;
  const auto& M = *f.domain;
  const auto& X = *f.values;
  auto one_side = [&](const PartialMap& p, const PartialMap& q) {
    double worst = 0.0;
    for (const auto& [x, a] : p.graph) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& [y, b] : q.graph) best = std::min(best, std::max(M(x, y), X(a, b)));
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::min(1.0, std::max(one_side(f, g), one_side(g, f)));
}

}  // namespace trapnet
