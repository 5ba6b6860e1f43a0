#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <queue>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "trapnet/error.hpp"
#include "trapnet/measure.hpp"
#include "trapnet/metric_space.hpp"

namespace trapnet {

using VertexId = std::int64_t;

struct WeightedEdge {
  VertexId u = 0;
  VertexId v = 0;
  double weight = 1.0;
};

/// Finite connected network with symmetric positive conductances and a root.
///
/// Parallel edges given to the constructor are merged by adding conductances.
class ElectricalNetwork {
 public:
  struct Neighbor {
    std::size_t vertex;
    double conductance;
  };
  struct Edge {
    std::size_t u;
    std::size_t v;
    double conductance;
  };

  ElectricalNetwork(std::vector<VertexId> vertices, const std::vector<WeightedEdge>& edges, VertexId root)
      : ids_(std::move(vertices)) {
    if (ids_.empty()) fail(Errc::EmptySet, "network needs at least one vertex");
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      if (!index_.emplace(ids_[i], i).second)
        fail(Errc::PreconditionViolated, "duplicate vertex id " + std::to_string(ids_[i]));
    }
    root_ = index_of(root);
    std::map<std::pair<std::size_t, std::size_t>, double> merged;
    for (const auto& e : edges) {
      auto iu = index_.find(e.u), iv = index_.find(e.v);
      if (iu == index_.end() || iv == index_.end())
        fail(Errc::UnknownVertex, "edge (" + std::to_string(e.u) + "," + std::to_string(e.v) + ")");
      if (e.u == e.v) fail(Errc::SelfLoop, "vertex " + std::to_string(e.u));
      if (!(e.weight > 0.0) || !std::isfinite(e.weight))
        fail(Errc::NonpositiveConductance, "edge (" + std::to_string(e.u) + "," + std::to_string(e.v) + ")");
      auto key = std::minmax(iu->second, iv->second);
      merged[{key.first, key.second}] += e.weight;
    }
    adj_.assign(ids_.size(), {});
    degree_.assign(ids_.size(), 0.0);
    edges_.reserve(merged.size());
    for (const auto& [key, w] : merged) {
      edges_.push_back({key.first, key.second, w});
      adj_[key.first].push_back({key.second, w});
      adj_[key.second].push_back({key.first, w});
    }
    for (std::size_t i = 0; i < adj_.size(); ++i) {
      std::sort(adj_[i].begin(), adj_[i].end(), [](const Neighbor& a, const Neighbor& b) { return a.vertex < b.vertex; });
      for (const auto& nb : adj_[i]) degree_[i] += nb.conductance;
    }
    if (!connected()) fail(Errc::DisconnectedGraph, "positive-conductance graph is not connected");
  }

  std::size_t size() const noexcept { return ids_.size(); }
  const std::vector<VertexId>& ids() const noexcept { return ids_; }
  VertexId id(std::size_t i) const { return ids_.at(i); }
  std::size_t root() const noexcept { return root_; }
  VertexId root_id() const { return ids_[root_]; }
  bool contains(VertexId v) const { return index_.count(v) != 0; }

  std::size_t index_of(VertexId v) const {
    auto it = index_.find(v);
    if (it == index_.end()) fail(Errc::UnknownVertex, "vertex " + std::to_string(v));
    return it->second;
  }

  const std::vector<Neighbor>& neighbors(std::size_t i) const { return adj_.at(i); }
  const std::vector<Edge>& edges() const noexcept { return edges_; }

  /// mu(x): sum of conductances at x.
  double total_conductance(std::size_t i) const { return degree_.at(i); }

  double conductance(std::size_t i, std::size_t j) const {
    const auto& nb = adj_.at(i);
    auto it = std::lower_bound(nb.begin(), nb.end(), j, [](const Neighbor& a, std::size_t v) { return a.vertex < v; });
    return (it != nb.end() && it->vertex == j) ? it->conductance : 0.0;
  }

  std::vector<WeightedEdge> weighted_edges() const {
    std::vector<WeightedEdge> out;
    out.reserve(edges_.size());
    for (const auto& e : edges_) out.push_back({ids_[e.u], ids_[e.v], e.conductance});
    return out;
  }

  Eigen::MatrixXd laplacian() const {
    const auto n = static_cast<Eigen::Index>(size());
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
    for (const auto& e : edges_) {
      const auto u = static_cast<Eigen::Index>(e.u), v = static_cast<Eigen::Index>(e.v);
      L(u, v) -= e.conductance;
      L(v, u) -= e.conductance;
      L(u, u) += e.conductance;
      L(v, v) += e.conductance;
    }
    return L;
  }

  /// Laplacian restricted to rows/columns where keep[i] is true; index[i] gives the new position.
  Eigen::SparseMatrix<double> restricted_laplacian(const std::vector<char>& keep, std::vector<Eigen::Index>& index) const {
    index.assign(size(), -1);
    Eigen::Index m = 0;
    for (std::size_t i = 0; i < size(); ++i)
      if (keep[i]) index[i] = m++;
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(4 * edges_.size() + size());
    for (std::size_t i = 0; i < size(); ++i)
      if (keep[i]) trips.emplace_back(index[i], index[i], degree_[i]);
    for (const auto& e : edges_) {
      if (keep[e.u] && keep[e.v]) {
        trips.emplace_back(index[e.u], index[e.v], -e.conductance);
        trips.emplace_back(index[e.v], index[e.u], -e.conductance);
      }
    }
    Eigen::SparseMatrix<double> L(m, m);
    L.setFromTriplets(trips.begin(), trips.end());
    return L;
  }

 private:
  bool connected() const {
    std::vector<char> seen(size(), 0);
    std::queue<std::size_t> q;
    q.push(root_);
    seen[root_] = 1;
    std::size_t count = 1;
    while (!q.empty()) {
      auto x = q.front();
      q.pop();
      for (const auto& nb : adj_[x]) {
        if (!seen[nb.vertex]) {
          seen[nb.vertex] = 1;
          ++count;
          q.push(nb.vertex);
        }
      }
    }
    return count == size();
  }

  std::vector<VertexId> ids_;
  std::unordered_map<VertexId, std::size_t> index_;
  std::vector<std::vector<Neighbor>> adj_;
  std::vector<double> degree_;
  std::vector<Edge> edges_;
  std::size_t root_ = 0;
};

inline ElectricalNetwork build_network(std::vector<VertexId> vertices, const std::vector<WeightedEdge>& edges, VertexId root) {
  return ElectricalNetwork(std::move(vertices), edges, root);
}

/// Sentinel returned when a ball covers the whole network.
inline constexpr double kInfiniteResistance = std::numeric_limits<double>::infinity();

/// Relative slack for ball membership, so that computed distances equal to the
/// radius up to roundoff sit on the sphere.
inline constexpr double kRadiusTolerance = 1e-12;

inline bool in_closed_ball(double d, double r) noexcept { return d <= r * (1.0 + kRadiusTolerance); }
inline bool in_open_ball(double d, double r) noexcept { return d < r * (1.0 - kRadiusTolerance); }

/// Pointwise resistance queries from one sparse factorization of the
/// Laplacian grounded at the root.
class ResistanceSolver {
 public:
  explicit ResistanceSolver(const ElectricalNetwork& net) : net_(&net) {
    if (net.size() == 1) return;
    std::vector<char> keep(net.size(), 1);
    keep[net.root()] = 0;
    auto L = net.restricted_laplacian(keep, index_);
    solver_.compute(L);
    if (solver_.info() != Eigen::Success) fail(Errc::NumericalFailure, "grounded Laplacian factorization failed");
  }

  double operator()(std::size_t x, std::size_t y) const {
    if (x >= net_->size() || y >= net_->size()) fail(Errc::UnknownVertex, "vertex index out of range");
    if (x == y) return 0.0;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net_->size() - 1));
    if (index_[x] >= 0) b(index_[x]) += 1.0;
    if (index_[y] >= 0) b(index_[y]) -= 1.0;
    Eigen::VectorXd v = solver_.solve(b);
    if (solver_.info() != Eigen::Success) fail(Errc::NumericalFailure, "grounded solve failed");
    return b.dot(v);
  }

 private:
  const ElectricalNetwork* net_;
  std::vector<Eigen::Index> index_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_;
};

inline double effective_resistance(const ElectricalNetwork& net, VertexId x, VertexId y) {
  const std::size_t i = net.index_of(x), j = net.index_of(y);
  if (i == j) return 0.0;
  return ResistanceSolver(net)(i, j);
}

/// All-pairs effective resistance from the dense inverse of the Laplacian
/// grounded at the root: R(x,y) = G(x,x) + G(y,y) - 2 G(x,y).
inline Eigen::MatrixXd all_pairs_resistance(const ElectricalNetwork& net) {
  const auto n = static_cast<Eigen::Index>(net.size());
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(n, n);
  if (n == 1) return R;
  const Eigen::MatrixXd L = net.laplacian();
  const auto r = static_cast<Eigen::Index>(net.root());
  std::vector<Eigen::Index> keep;
  keep.reserve(static_cast<std::size_t>(n - 1));
  for (Eigen::Index i = 0; i < n; ++i)
    if (i != r) keep.push_back(i);
  Eigen::MatrixXd Lg(n - 1, n - 1);
  for (Eigen::Index a = 0; a < n - 1; ++a)
    for (Eigen::Index b = 0; b < n - 1; ++b) Lg(a, b) = L(keep[a], keep[b]);
  Eigen::LLT<Eigen::MatrixXd> llt(Lg);
  if (llt.info() != Eigen::Success) fail(Errc::NumericalFailure, "grounded Laplacian not positive definite");
  const Eigen::MatrixXd Gg = llt.solve(Eigen::MatrixXd::Identity(n - 1, n - 1));
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index a = 0; a < n - 1; ++a)
    for (Eigen::Index b = 0; b < n - 1; ++b) G(keep[a], keep[b]) = 0.5 * (Gg(a, b) + Gg(b, a));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = std::max(G(i, i) + G(j, j) - 2.0 * G(i, j), 0.0);
      R(i, j) = v;
      R(j, i) = v;
    }
  }
  return R;
}

/// The resistance metric as a finite metric space, rooted at the network root.
inline SpacePtr resistance_space(const ElectricalNetwork& net) {
  return make_space(std::vector<PointId>(net.ids().begin(), net.ids().end()), all_pairs_resistance(net), net.root());
}

namespace detail {

inline std::vector<char> vertex_mask(const ElectricalNetwork& net, const std::vector<VertexId>& set) {
  if (set.empty()) fail(Errc::EmptySet, "vertex set is empty");
  std::vector<char> mask(net.size(), 0);
  for (auto v : set) mask[net.index_of(v)] = 1;
  return mask;
}

}  // namespace detail

/// R(A,B) from masks over vertex indices; both masks nonempty.
inline double resistance_between_masks(const ElectricalNetwork& net, const std::vector<char>& inA, const std::vector<char>& inB) {
  const std::size_t n = net.size();
  for (std::size_t i = 0; i < n; ++i)
    if (inA[i] && inB[i]) return 0.0;
  std::vector<char> interior(n, 0);
  bool any_interior = false;
  for (std::size_t i = 0; i < n; ++i) {
    interior[i] = !inA[i] && !inB[i];
    any_interior = any_interior || interior[i];
  }
  std::vector<double> f(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    if (inA[i]) f[i] = 1.0;
  if (any_interior) {
    std::vector<Eigen::Index> index;
    auto L = net.restricted_laplacian(interior, index);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(L.rows());
    for (std::size_t i = 0; i < n; ++i) {
      if (!interior[i]) continue;
      for (const auto& nb : net.neighbors(i))
        if (inA[nb.vertex]) rhs(index[i]) += nb.conductance;
    }
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(L);
    if (solver.info() != Eigen::Success) fail(Errc::NumericalFailure, "Dirichlet factorization failed");
    Eigen::VectorXd sol = solver.solve(rhs);
    for (std::size_t i = 0; i < n; ++i)
      if (interior[i]) f[i] = sol(index[i]);
  }
  double current = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    if (!inA[a]) continue;
    for (const auto& nb : net.neighbors(a))
      if (!inA[nb.vertex]) current += nb.conductance * (1.0 - f[nb.vertex]);
  }
  if (!(current > 0.0)) fail(Errc::NumericalFailure, "no current between sets");
  return 1.0 / current;
}

inline double resistance_between_sets(const ElectricalNetwork& net, const std::vector<VertexId>& A, const std::vector<VertexId>& B) {
  const auto inA = detail::vertex_mask(net, A);
  const auto inB = detail::vertex_mask(net, B);
  return resistance_between_masks(net, inA, inB);
}

/// R({x}, B_R(x,r)^c) using a precomputed all-pairs resistance matrix.
inline double boundary_resistance(const ElectricalNetwork& net, const Eigen::MatrixXd& R, std::size_t x, double r) {
  if (!(r > 0.0)) fail(Errc::PreconditionViolated, "radius must be positive");
  std::vector<char> inA(net.size(), 0), inB(net.size(), 0);
  inA[x] = 1;
  bool any = false;
  for (std::size_t y = 0; y < net.size(); ++y) {
    if (!in_open_ball(R(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)), r)) {
      inB[y] = 1;
      any = true;
    }
  }
  if (!any) return kInfiniteResistance;
  return resistance_between_masks(net, inA, inB);
}

inline double boundary_resistance(const ElectricalNetwork& net, VertexId x, double r) {
  const std::size_t i = net.index_of(x);
  return boundary_resistance(net, all_pairs_resistance(net), i, r);
}

struct EntropyResult {
  std::size_t count = 0;
  bool exact = false;
};

namespace detail {

inline bool cover_search(const std::vector<std::uint32_t>& balls, std::uint32_t covered, std::uint32_t full, std::size_t budget) {
  if (covered == full) return true;
  if (budget == 0) return false;
  const std::uint32_t open = full & ~covered;
  const int first = __builtin_ctz(open);
  for (const auto b : balls) {
    if ((b >> first) & 1U) {
      if (cover_search(balls, covered | b, full, budget - 1)) return true;
    }
  }
  return false;
}

}  // namespace detail

/// Minimum number of closed delta-balls centred at points covering the space.
inline EntropyResult metric_entropy(const FiniteMetricSpace& space, double delta) {
  if (!(delta > 0.0)) fail(Errc::PreconditionViolated, "delta must be positive");
  const std::size_t n = space.size();
  std::vector<std::vector<char>> ball(n, std::vector<char>(n, 0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) ball[i][j] = in_closed_ball(space(i, j), delta);
  std::vector<char> covered(n, 0);
  std::size_t greedy = 0, left = n;
  while (left > 0) {
    std::size_t best = 0, best_gain = 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t gain = 0;
      for (std::size_t j = 0; j < n; ++j) gain += ball[i][j] && !covered[j];
      if (gain > best_gain) {
        best_gain = gain;
        best = i;
      }
    }
    for (std::size_t j = 0; j < n; ++j)
      if (ball[best][j] && !covered[j]) {
        covered[j] = 1;
        --left;
      }
    ++greedy;
  }
  if (n > 20) return {greedy, false};
  std::vector<std::uint32_t> masks(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (ball[i][j]) masks[i] |= (1U << j);
  const std::uint32_t full = n == 32 ? ~0U : ((1U << n) - 1U);
  std::size_t best = greedy;
  for (std::size_t k = 1; k < greedy; ++k) {
    if (detail::cover_search(masks, 0U, full, k)) {
      best = k;
      break;
    }
  }
  return {best, true};
}

struct FusedNetwork {
  ElectricalNetwork network;
  /// canonical_map[i] is the quotient index of original vertex index i.
  std::vector<std::size_t> canonical_map;

  VertexId image(const ElectricalNetwork& original, VertexId v) const {
    return network.id(canonical_map[original.index_of(v)]);
  }
};

/// Identifies each class of disjoint vertex sets to a single vertex.
/// A class is represented by its smallest vertex id; internal edges are dropped.
inline FusedNetwork fuse(const ElectricalNetwork& net, const std::vector<std::vector<VertexId>>& classes) {
  const std::size_t n = net.size();
  std::vector<long> cls(n, -1);
  for (std::size_t c = 0; c < classes.size(); ++c) {
    if (classes[c].empty()) fail(Errc::EmptyClass, "class " + std::to_string(c));
    for (auto v : classes[c]) {
      const auto i = net.index_of(v);
      if (cls[i] >= 0 && cls[i] != static_cast<long>(c)) fail(Errc::OverlappingClasses, "vertex " + std::to_string(v));
      cls[i] = static_cast<long>(c);
    }
  }
  std::vector<std::size_t> map(n);
  std::vector<long> class_index(classes.size(), -1);
  std::vector<VertexId> qids;
  for (std::size_t i = 0; i < n; ++i) {
    if (cls[i] < 0) {
      map[i] = qids.size();
      qids.push_back(net.id(i));
    } else {
      auto& slot = class_index[static_cast<std::size_t>(cls[i])];
      if (slot < 0) {
        slot = static_cast<long>(qids.size());
        const auto& members = classes[static_cast<std::size_t>(cls[i])];
        qids.push_back(*std::min_element(members.begin(), members.end()));
      }
      map[i] = static_cast<std::size_t>(slot);
    }
  }
  std::vector<WeightedEdge> edges;
  for (const auto& e : net.edges()) {
    if (map[e.u] != map[e.v]) edges.push_back({qids[map[e.u]], qids[map[e.v]], e.conductance});
  }
  ElectricalNetwork q(qids, edges, qids[map[net.root()]]);
  return {std::move(q), std::move(map)};
}

/// Increments the conductance of each listed pair by one.
inline ElectricalNetwork add_unit_edges(const ElectricalNetwork& net, const std::vector<std::pair<VertexId, VertexId>>& pairs) {
  std::set<std::pair<VertexId, VertexId>> seen;
  std::vector<WeightedEdge> edges = net.weighted_edges();
  for (const auto& [u, v] : pairs) {
    net.index_of(u);
    net.index_of(v);
    if (u == v) fail(Errc::PairNotDistinct, "pair (" + std::to_string(u) + "," + std::to_string(v) + ")");
    auto key = std::minmax(u, v);
    if (!seen.insert({key.first, key.second}).second)
      fail(Errc::PairNotDistinct, "pair listed twice (" + std::to_string(u) + "," + std::to_string(v) + ")");
    edges.push_back({u, v, 1.0});
  }
  return ElectricalNetwork(net.ids(), edges, net.root_id());
}

/// Marked atoms (x, mu(x)) of unit weight, one per vertex; points are vertex indices.
inline PointMeasure degree_marked_measure(const ElectricalNetwork& net, SpacePtr carrier = nullptr) {
  PointMeasure out(std::move(carrier), true);
  for (std::size_t i = 0; i < net.size(); ++i) out.add_marked(i, net.total_conductance(i), 1.0);
  return out;
}

}  // namespace trapnet
