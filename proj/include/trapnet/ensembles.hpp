#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <queue>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "trapnet/error.hpp"
#include "trapnet/network.hpp"
#include "trapnet/rng.hpp"
#include "trapnet/trap.hpp"

namespace trapnet {

// ---------------------------------------------------------------- gasket

inline constexpr int kGasketMaxLevel = 9;

/// Level-n graph approximation of the Sierpinski gasket.
///
/// Vertices sit on the triangular lattice with corners (0,0), (2^n,0), (0,2^n);
/// lattice point (i,j) has planar position ((i + j/2) 2^-n, j (sqrt 3/2) 2^-n).
/// Vertex ids encode the position on the finest lattice, so a vertex keeps
/// its id at every level that contains it.
struct SierpinskiGasket {
  int level = 0;
  ElectricalNetwork network;
  std::vector<std::array<double, 2>> coords;
  std::vector<std::array<int, 2>> lattice;
  std::unordered_map<std::int64_t, std::size_t> lattice_index;
  /// Number of level-n triangles containing each vertex.
  std::vector<int> triangle_count;

  std::size_t index_at(int i, int j) const { return lattice_index.at(key(i, j)); }
  static std::int64_t key(int i, int j) { return static_cast<std::int64_t>(i) * 4096 + j; }
};

inline VertexId gasket_vertex_id(int level, int i, int j) {
  const int shift = kGasketMaxLevel - level;
  const std::int64_t side = (1 << kGasketMaxLevel) + 1;
  return static_cast<VertexId>((static_cast<std::int64_t>(i) << shift) * side + (static_cast<std::int64_t>(j) << shift));
}

inline std::size_t gasket_vertex_count(int n) {
  std::size_t p = 1;
  for (int k = 0; k <= n; ++k) p *= 3;
  return (p + 3) / 2;
}

namespace detail {

using LatticeTriangle = std::array<std::array<int, 2>, 3>;

inline std::array<int, 2> midpoint(const std::array<int, 2>& a, const std::array<int, 2>& b) { return {(a[0] + b[0]) / 2, (a[1] + b[1]) / 2}; }

/// Sub-triangle at corner d of t.
inline LatticeTriangle corner_subtriangle(const LatticeTriangle& t, int d) {
  const auto ab = midpoint(t[0], t[1]), ac = midpoint(t[0], t[2]), bc = midpoint(t[1], t[2]);
  switch (d) {
    case 0: return {t[0], ab, ac};
    case 1: return {ab, t[1], bc};
    default: return {ac, bc, t[2]};
  }
}

inline std::vector<LatticeTriangle> gasket_triangles(int n) {
  const int S = 1 << n;
  std::vector<LatticeTriangle> tris{{{{0, 0}, {S, 0}, {0, S}}}};
  for (int k = 0; k < n; ++k) {
    std::vector<LatticeTriangle> next;
    next.reserve(tris.size() * 3);
    for (const auto& t : tris)
      for (int d = 0; d < 3; ++d) next.push_back(corner_subtriangle(t, d));
    tris.swap(next);
  }
  return tris;
}

}  // namespace detail

inline SierpinskiGasket sierpinski(int n) {
  if (n < 0) fail(Errc::PreconditionViolated, "level must be nonnegative");
  if (n > kGasketMaxLevel) fail(Errc::LevelTooLarge, "gasket level above " + std::to_string(kGasketMaxLevel));
  const auto tris = detail::gasket_triangles(n);
  std::map<std::array<int, 2>, int> count;
  for (const auto& t : tris)
    for (const auto& p : t) ++count[p];
  std::vector<std::array<int, 2>> pts;
  pts.reserve(count.size());
  for (const auto& [p, c] : count) pts.push_back(p);
  std::vector<VertexId> ids;
  ids.reserve(pts.size());
  for (const auto& p : pts) ids.push_back(gasket_vertex_id(n, p[0], p[1]));
  std::vector<WeightedEdge> edges;
  edges.reserve(3 * tris.size());
  for (const auto& t : tris) {
    const VertexId a = gasket_vertex_id(n, t[0][0], t[0][1]);
    const VertexId b = gasket_vertex_id(n, t[1][0], t[1][1]);
    const VertexId c = gasket_vertex_id(n, t[2][0], t[2][1]);
    edges.push_back({a, b, 1.0});
    edges.push_back({a, c, 1.0});
    edges.push_back({b, c, 1.0});
  }
  ElectricalNetwork net(ids, edges, gasket_vertex_id(n, 0, 0));
  SierpinskiGasket g{n, std::move(net), {}, {}, {}, {}};
  const double h = std::ldexp(1.0, -n);
  const double s3 = std::sqrt(3.0) / 2.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    g.coords.push_back({(pts[i][0] + 0.5 * pts[i][1]) * h, pts[i][1] * s3 * h});
    g.lattice.push_back(pts[i]);
    g.lattice_index.emplace(SierpinskiGasket::key(pts[i][0], pts[i][1]), i);
    g.triangle_count.push_back(count[pts[i]]);
  }
  return g;
}

/// Truncated Poisson random measure over the gasket with base mass 3/2
/// spread uniformly over triangle addresses of the given depth.
struct GasketPrm {
  int depth = kGasketMaxLevel + 1;
  double v_floor = 1e-8;
  std::vector<std::uint64_t> address;  // base-3 digits, most significant first
  std::vector<double> weight;
};

inline GasketPrm sample_gasket_prm(double alpha, double v_floor, RngStream& rng, int depth = kGasketMaxLevel + 1) {
  if (!(v_floor > 0.0)) fail(Errc::InvalidTruncation, "v_floor must be positive");
  if (depth < 1 || depth > 39) fail(Errc::PreconditionViolated, "address depth");
  GasketPrm prm;
  prm.depth = depth;
  prm.v_floor = v_floor;
  std::uint64_t cells = 1;
  for (int k = 0; k < depth; ++k) cells *= 3;
  const auto count = poisson(rng, 1.5 * std::pow(v_floor, -alpha));
  prm.address.reserve(count);
  prm.weight.reserve(count);
  for (std::uint64_t k = 0; k < count; ++k) {
    prm.address.push_back(rng.below(cells));
    prm.weight.push_back(v_floor * std::pow(rng.uniform(), -1.0 / alpha));
  }
  return prm;
}

/// Vertex of level n owning a PRM address: the first n digits select a
/// level-n triangle and digit n+1 selects its corner.
inline std::size_t gasket_address_vertex(const SierpinskiGasket& g, std::uint64_t address, int depth) {
  const int n = g.level;
  if (n + 1 > depth) fail(Errc::PreconditionViolated, "PRM depth too shallow for this level");
  std::uint64_t place = 1;
  for (int k = 1; k < depth; ++k) place *= 3;
  const int S = 1 << n;
  detail::LatticeTriangle t{{{0, 0}, {S, 0}, {0, S}}};
  int corner = 0;
  for (int k = 0; k <= n; ++k) {
    const int d = static_cast<int>((address / place) % 3);
    place /= 3;
    if (k < n)
      t = detail::corner_subtriangle(t, d);
    else
      corner = d;
  }
  return g.index_at(t[corner][0], t[corner][1]);
}

/// Pareto traps on a gasket level, coupled across levels through one PRM.
/// The cell of a vertex is the union of the corner sub-triangles at it, with
/// base mass 3^-n / 2 per adjacent level-n triangle.
inline std::vector<double> gasket_coupled_traps(const SierpinskiGasket& g, const GasketPrm& prm, const TrapLaw& law, const RngStream& rng) {
  law.validate();
  std::vector<double> maxw(g.network.size(), 0.0);
  for (std::size_t k = 0; k < prm.address.size(); ++k) {
    const auto v = gasket_address_vertex(g, prm.address[k], prm.depth);
    maxw[v] = std::max(maxw[v], prm.weight[k]);
  }
  const double unit = 0.5 * std::pow(3.0, -g.level);
  std::vector<double> nu(g.network.size());
  for (std::size_t v = 0; v < nu.size(); ++v) {
    auto sub = rng.substream(static_cast<std::uint64_t>(g.network.id(v)));
    nu[v] = quantile_coupled_trap(law, unit * g.triangle_count[v], maxw[v], prm.v_floor, sub);
  }
  return nu;
}

// ---------------------------------------------------------- line ensembles

/// Law of i.i.d. conductances with zeta^{-1} uniform on [1-h, 1+h], where h is
/// the largest half-width keeping zeta within [c, c'] (so E[zeta^{-1}] = 1).
struct ConductanceLaw {
  double c = 0.5;
  double c_prime = 2.0;

  double half_width() const {
    if (!(c > 0.0) || !(c <= 1.0) || !(c_prime >= 1.0) || !(c < c_prime || (c == 1.0 && c_prime == 1.0)) || !std::isfinite(c_prime))
      fail(Errc::InvalidBounds, "need 0 < c <= 1 <= c' with c < c' (or c = c' = 1)");
    return std::min(1.0 - 1.0 / c_prime, 1.0 / c - 1.0);
  }

  double sample(RngStream& rng) const {
    const double h = half_width();
    const double inv = 1.0 - h + 2.0 * h * rng.uniform_open_right();
    return 1.0 / inv;
  }
};

/// Path on {-N..N} with the conductance of edge {i, i+1} drawn from the
/// substream keyed by i, so paths of different length share conductances.
inline ElectricalNetwork conductance_path(std::int64_t N, const ConductanceLaw& law, const RngStream& rng) {
  if (N < 1) fail(Errc::PreconditionViolated, "N must be at least 1");
  law.half_width();
  std::vector<VertexId> ids;
  for (std::int64_t i = -N; i <= N; ++i) ids.push_back(i);
  std::vector<WeightedEdge> edges;
  for (std::int64_t i = -N; i < N; ++i) {
    auto sub = rng.substream(static_cast<std::uint64_t>(i));
    edges.push_back({i, i + 1, law.sample(sub)});
  }
  return ElectricalNetwork(ids, edges, 0);
}

/// Truncated PRM on the interval [-L, L] with Lebesgue base measure.
struct LinePrm {
  double half_length = 1.0;
  double v_floor = 1e-8;
  std::vector<double> position;
  std::vector<double> weight;
};

inline LinePrm sample_line_prm(double alpha, double v_floor, double half_length, RngStream& rng) {
  if (!(v_floor > 0.0)) fail(Errc::InvalidTruncation, "v_floor must be positive");
  LinePrm prm{half_length, v_floor, {}, {}};
  const auto count = poisson(rng, 2.0 * half_length * std::pow(v_floor, -alpha));
  for (std::uint64_t k = 0; k < count; ++k) {
    prm.position.push_back(-half_length + 2.0 * half_length * rng.uniform_open_right());
    prm.weight.push_back(v_floor * std::pow(rng.uniform(), -1.0 / alpha));
  }
  return prm;
}

/// Traps on the path network whose vertex i sits at i 2^-n, coupled through a
/// line PRM; the cell of i is [i - 1/2, i + 1/2) 2^-n clipped to [-L, L].
inline std::vector<double> line_coupled_traps(const ElectricalNetwork& path, int n, const LinePrm& prm, const TrapLaw& law, const RngStream& rng) {
  law.validate();
  const double h = std::ldexp(1.0, -n);
  std::unordered_map<VertexId, double> maxw;
  for (std::size_t k = 0; k < prm.position.size(); ++k) {
    const auto i = static_cast<VertexId>(std::floor(prm.position[k] / h + 0.5));
    auto& m = maxw[i];
    m = std::max(m, prm.weight[k]);
  }
  std::vector<double> nu(path.size());
  for (std::size_t v = 0; v < path.size(); ++v) {
    const VertexId i = path.id(v);
    const double lo = std::max(-prm.half_length, (static_cast<double>(i) - 0.5) * h);
    const double hi = std::min(prm.half_length, (static_cast<double>(i) + 0.5) * h);
    const double mass = std::max(hi - lo, 0.0);
    auto it = maxw.find(i);
    auto sub = rng.substream(static_cast<std::uint64_t>(i));
    if (!(mass > 0.0)) {
      nu[v] = pareto_sample(law, sub);
      continue;
    }
    nu[v] = quantile_coupled_trap(law, mass, it == maxw.end() ? 0.0 : it->second, prm.v_floor, sub);
  }
  return nu;
}

// ------------------------------------------------------------------ trees

/// Tree on labels 1..m.
struct LabeledTree {
  int m = 1;
  std::vector<std::pair<int, int>> edges;
};

inline LabeledTree prufer_decode(const std::vector<int>& seq, int m) {
  LabeledTree t{m, {}};
  if (m == 1) return t;
  if (m == 2) {
    t.edges.emplace_back(1, 2);
    return t;
  }
  if (static_cast<int>(seq.size()) != m - 2) fail(Errc::PreconditionViolated, "Pruefer sequence length");
  std::vector<int> degree(static_cast<std::size_t>(m + 1), 1);
  for (int x : seq) {
    if (x < 1 || x > m) fail(Errc::PreconditionViolated, "Pruefer label out of range");
    ++degree[static_cast<std::size_t>(x)];
  }
  std::priority_queue<int, std::vector<int>, std::greater<>> leaves;
  for (int v = 1; v <= m; ++v)
    if (degree[static_cast<std::size_t>(v)] == 1) leaves.push(v);
  for (int x : seq) {
    const int leaf = leaves.top();
    leaves.pop();
    t.edges.emplace_back(std::min(leaf, x), std::max(leaf, x));
    if (--degree[static_cast<std::size_t>(x)] == 1) leaves.push(x);
  }
  const int u = leaves.top();
  leaves.pop();
  const int v = leaves.top();
  t.edges.emplace_back(std::min(u, v), std::max(u, v));
  std::sort(t.edges.begin(), t.edges.end());
  return t;
}

/// Uniform over the m^{m-2} labeled trees.
inline LabeledTree uniform_cayley_tree(int m, RngStream& rng) {
  if (m < 1) fail(Errc::PreconditionViolated, "m must be at least 1");
  std::vector<int> seq;
  for (int k = 0; k + 2 < m; ++k) seq.push_back(1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(m))));
  return prufer_decode(seq, m);
}

/// Plane tree stored in depth-first order.
struct PlaneTree {
  std::vector<int> parent;                 // -1 at the root
  std::vector<std::vector<int>> children;  // in plane order
  std::vector<int> label;                  // label of each depth-first vertex
  std::vector<int> height;

  std::size_t size() const noexcept { return parent.size(); }

  /// Unit-conductance network on the labels, rooted at the first vertex.
  ElectricalNetwork network() const {
    std::vector<VertexId> ids(label.begin(), label.end());
    std::vector<WeightedEdge> edges;
    for (std::size_t i = 1; i < size(); ++i) edges.push_back({label[static_cast<std::size_t>(parent[i])], label[i], 1.0});
    return ElectricalNetwork(ids, edges, label[0]);
  }
};

/// Depth-first preorder from ordered child lists over arbitrary vertex names.
inline PlaneTree plane_tree_from_children(const std::vector<std::vector<int>>& kids, int root, const std::vector<int>& labels) {
  PlaneTree t;
  std::vector<std::pair<int, int>> stack{{root, -1}};
  std::vector<int> depth_of;
  while (!stack.empty()) {
    auto [v, par] = stack.back();
    stack.pop_back();
    const int idx = static_cast<int>(t.parent.size());
    t.parent.push_back(par);
    t.label.push_back(labels[static_cast<std::size_t>(v)]);
    t.children.emplace_back();
    t.height.push_back(par < 0 ? 0 : t.height[static_cast<std::size_t>(par)] + 1);
    if (par >= 0) t.children[static_cast<std::size_t>(par)].push_back(idx);
    const auto& ks = kids[static_cast<std::size_t>(v)];
    for (auto it = ks.rbegin(); it != ks.rend(); ++it) stack.emplace_back(*it, idx);
  }
  return t;
}

/// Root at label 1, children ordered by increasing label.
inline PlaneTree as_plane_tree(const LabeledTree& tree) {
  const int m = tree.m;
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(m + 1));
  for (const auto& [u, v] : tree.edges) {
    adj[static_cast<std::size_t>(u)].push_back(v);
    adj[static_cast<std::size_t>(v)].push_back(u);
  }
  std::vector<std::vector<int>> kids(static_cast<std::size_t>(m + 1));
  std::vector<char> seen(static_cast<std::size_t>(m + 1), 0);
  std::vector<int> stack{1};
  seen[1] = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int w : adj[static_cast<std::size_t>(v)])
      if (!seen[static_cast<std::size_t>(w)]) {
        seen[static_cast<std::size_t>(w)] = 1;
        kids[static_cast<std::size_t>(v)].push_back(w);
        stack.push_back(w);
      }
  }
  for (auto& k : kids) std::sort(k.begin(), k.end());
  std::vector<int> labels(static_cast<std::size_t>(m + 1));
  std::iota(labels.begin(), labels.end(), 0);
  return plane_tree_from_children(kids, 1, labels);
}

struct CodingFunctions {
  std::vector<int> H;                    // H(i), i = 0..m-1
  std::vector<int> X;                    // X(i), i = 0..m
  std::vector<std::vector<int>> N;       // N[k][i]: vertices among v_0..v_i with outdegree k
  std::vector<std::vector<int>> D;       // D[k][i]: same for degree k
  long long a = 0;                       // sum_{i=1}^{m-1} X(i)
};

inline CodingFunctions coding_functions(const PlaneTree& t) {
  const std::size_t m = t.size();
  CodingFunctions c;
  c.H = t.height;
  c.X.assign(m + 1, 0);
  std::size_t maxdeg = 0;
  for (std::size_t i = 0; i < m; ++i) maxdeg = std::max(maxdeg, t.children[i].size() + 1);
  c.N.assign(maxdeg + 1, std::vector<int>(m, 0));
  c.D.assign(maxdeg + 1, std::vector<int>(m, 0));
  for (std::size_t i = 0; i < m; ++i) {
    const int k = static_cast<int>(t.children[i].size());
    c.X[i + 1] = c.X[i] + k - 1;
    const std::size_t deg = t.children[i].size() + (i == 0 ? 0 : 1);
    for (std::size_t d = 0; d <= maxdeg; ++d) {
      c.N[d][i] = (i ? c.N[d][i - 1] : 0) + (static_cast<std::size_t>(k) == d);
      c.D[d][i] = (i ? c.D[d][i - 1] : 0) + (deg == d);
    }
  }
  for (std::size_t i = 1; i < m; ++i) c.a += c.X[i];
  if (c.X[m] != -1) fail(Errc::NumericalFailure, "depth-first walk does not end at -1");
  for (std::size_t i = 0; i < m; ++i)
    if (c.X[i] < 0) fail(Errc::NumericalFailure, "depth-first walk negative before the end");
  return c;
}

/// a(T) of the star at the root, the largest value over trees with m vertices.
inline long long max_area(int m) { return static_cast<long long>(m - 1) * (m - 2) / 2; }

enum class TiltMethod { Enumeration, Rejection };

/// Exact sampler for P(T) proportional to (1-p)^{-a(T)} over labeled trees, by enumeration.
class TiltedTreeSampler {
 public:
  TiltedTreeSampler(int m, double p) : m_(m), p_(p) {
    if (m < 1) fail(Errc::PreconditionViolated, "m must be at least 1");
    if (m > 8) fail(Errc::TooLargeForEnumeration, "enumeration supports m <= 8");
    if (!(p > 0.0 && p < 1.0)) fail(Errc::PreconditionViolated, "p must lie in (0,1)");
    const int len = std::max(0, m - 2);
    std::size_t total = 1;
    for (int k = 0; k < len; ++k) total *= static_cast<std::size_t>(m);
    std::vector<int> seq(static_cast<std::size_t>(len), 1);
    double acc = 0.0;
    for (std::size_t code = 0; code < total; ++code) {
      std::size_t c = code;
      for (int k = 0; k < len; ++k) {
        seq[static_cast<std::size_t>(k)] = 1 + static_cast<int>(c % static_cast<std::size_t>(m));
        c /= static_cast<std::size_t>(m);
      }
      trees_.push_back(as_plane_tree(prufer_decode(seq, m)));
      labeled_.push_back(prufer_decode(seq, m));
      const long long a = coding_functions(trees_.back()).a;
      acc += std::pow(1.0 - p, static_cast<double>(max_area(m) - a));
      cdf_.push_back(acc);
    }
  }

  std::size_t count() const noexcept { return trees_.size(); }
  const PlaneTree& tree(std::size_t k) const { return trees_.at(k); }
  const LabeledTree& labeled(std::size_t k) const { return labeled_.at(k); }
  double probability(std::size_t k) const { return (cdf_[k] - (k ? cdf_[k - 1] : 0.0)) / cdf_.back(); }

  PlaneTree sample(RngStream& rng) const { return trees_[sample_index(rng)]; }
  std::size_t sample_index(RngStream& rng) const {
    const double u = rng.uniform_open_right() * cdf_.back();
    return static_cast<std::size_t>(std::upper_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin());
  }

 private:
  int m_;
  double p_;
  std::vector<PlaneTree> trees_;
  std::vector<LabeledTree> labeled_;
  std::vector<double> cdf_;
};

inline PlaneTree tilted_tree(int m, double p, RngStream& rng, TiltMethod method = TiltMethod::Rejection) {
  if (!(p > 0.0 && p < 1.0)) fail(Errc::PreconditionViolated, "p must lie in (0,1)");
  if (method == TiltMethod::Enumeration) return TiltedTreeSampler(m, p).sample(rng);
  const long long amax = max_area(m);
  while (true) {
    PlaneTree t = as_plane_tree(uniform_cayley_tree(m, rng));
    const long long a = coding_functions(t).a;
    if (rng.uniform_open_right() < std::pow(1.0 - p, static_cast<double>(amax - a))) return t;
  }
}

/// Markers (x, y) for lattice points (i, j), 0 <= j < X(i), kept with probability p:
/// x = i and y = inf{k >= i : X(k) = j}.
inline std::vector<std::pair<int, int>> surplus_markers(const PlaneTree& t, double p, RngStream& rng) {
  const auto c = coding_functions(t);
  const int m = static_cast<int>(t.size());
  std::vector<std::pair<int, int>> out;
  for (int i = 1; i < m; ++i) {
    for (int j = 0; j < c.X[static_cast<std::size_t>(i)]; ++j) {
      if (!bernoulli(rng, p)) continue;
      int k = i;
      while (c.X[static_cast<std::size_t>(k)] != j) ++k;
      out.emplace_back(i, k);
    }
  }
  return out;
}

struct SurplusGraph {
  ElectricalNetwork network;
  std::vector<std::pair<int, int>> markers;
};

/// The tree with one extra unit edge v_x - v_y per marker; repeated pairs add conductance.
inline SurplusGraph surplus_attachment(const PlaneTree& t, double p, RngStream& rng) {
  if (!(p > 0.0 && p < 1.0)) fail(Errc::PreconditionViolated, "p must lie in (0,1)");
  auto markers = surplus_markers(t, p, rng);
  std::vector<VertexId> ids(t.label.begin(), t.label.end());
  std::vector<WeightedEdge> edges;
  for (std::size_t i = 1; i < t.size(); ++i) edges.push_back({t.label[static_cast<std::size_t>(t.parent[i])], t.label[i], 1.0});
  for (const auto& [x, y] : markers) edges.push_back({t.label[static_cast<std::size_t>(x)], t.label[static_cast<std::size_t>(y)], 1.0});
  return {ElectricalNetwork(ids, edges, t.label[0]), std::move(markers)};
}

/// Poisson(1) Galton-Watson tree conditioned on m vertices, by rejection.
inline PlaneTree conditioned_gw_tree(int m, RngStream& rng, std::size_t max_tries = 10000000) {
  if (m < 1) fail(Errc::PreconditionViolated, "m must be at least 1");
  for (std::size_t attempt = 0; attempt < max_tries; ++attempt) {
    std::vector<std::vector<int>> kids(1);
    std::size_t next = 0;
    bool too_big = false;
    while (next < kids.size()) {
      const auto k = poisson(rng, 1.0);
      for (std::uint64_t c = 0; c < k; ++c) {
        kids[next].push_back(static_cast<int>(kids.size()));
        kids.emplace_back();
        if (kids.size() > static_cast<std::size_t>(m)) {
          too_big = true;
          break;
        }
      }
      if (too_big) break;
      ++next;
    }
    if (too_big || kids.size() != static_cast<std::size_t>(m)) continue;
    std::vector<int> labels(kids.size());
    std::iota(labels.begin(), labels.end(), 1);
    return plane_tree_from_children(kids, 0, labels);
  }
  fail(Errc::NumericalFailure, "conditioned Galton-Watson rejection exhausted");
}

// ------------------------------------------------------------ random graphs

struct ErComponent {
  ElectricalNetwork network;
  std::size_t vertices = 0;
  std::size_t edges = 0;
  long long surplus = 0;
  double p = 0.0;
};

/// Largest component of G(n, 1/n + lambda n^{-4/3}) with labels 1..n; ties go
/// to the component holding the smallest label, which is also the root.
inline ErComponent er_largest_component(std::int64_t n, double lambda, RngStream& rng) {
  if (n < 2) fail(Errc::PreconditionViolated, "n must be at least 2");
  const double nn = static_cast<double>(n);
  const double p = 1.0 / nn + lambda * std::pow(nn, -4.0 / 3.0);
  if (!(p > 0.0 && p < 1.0)) fail(Errc::InvalidWindow, "edge probability outside (0,1)");
  std::vector<std::int64_t> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::int64_t(std::int64_t)> find = [&](std::int64_t x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  std::vector<std::pair<std::int64_t, std::int64_t>> edges;
  const std::uint64_t pairs = static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n - 1) / 2;
  std::uint64_t idx = 0, row_start = 0;
  std::int64_t i = 0;
  bool first = true;
  while (true) {
    const auto skip = geometric_failures(rng, p);
    if (skip >= pairs) break;
    idx += (first ? 0 : 1) + skip;
    first = false;
    if (idx >= pairs) break;
    while (idx >= row_start + static_cast<std::uint64_t>(n - 1 - i)) {
      row_start += static_cast<std::uint64_t>(n - 1 - i);
      ++i;
    }
    const std::int64_t j = i + 1 + static_cast<std::int64_t>(idx - row_start);
    edges.emplace_back(i, j);
    const auto a = find(i), b = find(j);
    if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
  }
  std::vector<std::size_t> size(static_cast<std::size_t>(n), 0);
  for (std::int64_t v = 0; v < n; ++v) ++size[static_cast<std::size_t>(find(v))];
  // With union by smaller root, every root is the smallest label of its component.
  std::int64_t best = 0;
  for (std::int64_t v = 0; v < n; ++v)
    if (size[static_cast<std::size_t>(v)] > size[static_cast<std::size_t>(best)]) best = v;
  std::vector<VertexId> ids;
  for (std::int64_t v = 0; v < n; ++v)
    if (find(v) == best) ids.push_back(v + 1);
  std::vector<WeightedEdge> comp_edges;
  for (const auto& [u, v] : edges)
    if (find(u) == best) comp_edges.push_back({u + 1, v + 1, 1.0});
  ErComponent out{ElectricalNetwork(ids, comp_edges, best + 1), ids.size(), comp_edges.size(), 0, p};
  out.surplus = static_cast<long long>(out.edges) - static_cast<long long>(out.vertices) + 1;
  return out;
}

/// Uniform random tree on labels 1..n plus each further pair with probability
/// `extra`, conductances uniform on [w_lo, w_hi]; rooted at label 1.
inline ElectricalNetwork random_network(int n, RngStream& rng, double extra = 0.2, double w_lo = 0.5, double w_hi = 2.0) {
  const auto tree = uniform_cayley_tree(n, rng);
  std::vector<VertexId> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), 1);
  std::vector<WeightedEdge> edges;
  std::map<std::pair<int, int>, char> present;
  for (const auto& [u, v] : tree.edges) {
    edges.push_back({u, v, w_lo + (w_hi - w_lo) * rng.uniform_open_right()});
    present[{u, v}] = 1;
  }
  for (int u = 1; u <= n; ++u)
    for (int v = u + 1; v <= n; ++v)
      if (!present.count({u, v}) && bernoulli(rng, extra)) edges.push_back({u, v, w_lo + (w_hi - w_lo) * rng.uniform_open_right()});
  return ElectricalNetwork(ids, edges, 1);
}

// --------------------------------------------------------- default scales

enum class EnsembleKind { Sierpinski, ConductancePath, CayleyTree, ErCritical };

inline EnsembleKind parse_ensemble(const std::string& s) {
  if (s == "sierpinski" || s == "gasket") return EnsembleKind::Sierpinski;
  if (s == "conductance_path" || s == "path") return EnsembleKind::ConductancePath;
  if (s == "cayley_tree" || s == "gw_tree" || s == "tree") return EnsembleKind::CayleyTree;
  if (s == "er_critical" || s == "er") return EnsembleKind::ErCritical;
  fail(Errc::InvalidConfig, "unknown ensemble '" + s + "'");
}

inline const char* to_string(EnsembleKind k) {
  switch (k) {
    case EnsembleKind::Sierpinski: return "sierpinski";
    case EnsembleKind::ConductancePath: return "conductance_path";
    case EnsembleKind::CayleyTree: return "cayley_tree";
    case EnsembleKind::ErCritical: return "er_critical";
  }
  return "unknown";
}

/// Default (a_n, b_n): gasket ((5/3)^n, 3^n); path (2^n, 2^n); tree (n^{1/2}, n); ER (n^{1/3}, n^{2/3}).
inline std::pair<double, double> default_scale_ab(EnsembleKind kind, double n) {
  switch (kind) {
    case EnsembleKind::Sierpinski: return {std::pow(5.0 / 3.0, n), std::pow(3.0, n)};
    case EnsembleKind::ConductancePath: return {std::pow(2.0, n), std::pow(2.0, n)};
    case EnsembleKind::CayleyTree: return {std::sqrt(n), n};
    case EnsembleKind::ErCritical: return {std::cbrt(n), std::pow(n, 2.0 / 3.0)};
  }
  return {1.0, 1.0};
}

inline Scale default_scale(EnsembleKind kind, double n, const TrapLaw& law) {
  const auto [a, b] = default_scale_ab(kind, n);
  return make_scale(law, a, b);
}

}  // namespace trapnet
