#include <boost/math/distributions/chi_squared.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "trapnet/trapnet.hpp"

using namespace trapnet;

namespace {

double chi2_sf(double x, double dof) { return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), x)); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// Oracle: R from the Moore-Penrose inverse of the Laplacian.
Eigen::MatrixXd pinv_resistance(const ElectricalNetwork& net) {
  const Eigen::MatrixXd L = net.laplacian();
  const Eigen::MatrixXd Lp = L.completeOrthogonalDecomposition().pseudoInverse();
  const auto n = L.rows();
  Eigen::MatrixXd R(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) R(i, j) = Lp(i, i) + Lp(j, j) - 2.0 * Lp(i, j);
  return R;
}

ElectricalNetwork from_pairs(int m, const std::vector<std::pair<int, int>>& pairs, RngStream* rng) {
  std::vector<VertexId> ids;
  for (int i = 1; i <= m; ++i) ids.push_back(i);
  std::vector<WeightedEdge> edges;
  for (const auto& [u, v] : pairs) edges.push_back({u, v, rng ? 0.5 + 1.5 * rng->uniform_open_right() : 1.0});
  return ElectricalNetwork(ids, edges, 1);
}

std::string graph_key(const ElectricalNetwork& g) {
  std::vector<std::string> parts;
  for (const auto& e : g.weighted_edges()) {
    const auto [u, v] = std::minmax(e.u, e.v);
    parts.push_back(std::to_string(u) + "-" + std::to_string(v) + ":" + fmt(e.weight));
  }
  std::sort(parts.begin(), parts.end());
  std::string s;
  for (const auto& p : parts) s += p + ";";
  return s;
}

// 1. Resistance closed forms and metric axioms.
Outcome criterion1() {
  ElectricalNetwork series({1, 2, 3}, {{1, 2, 2.0}, {2, 3, 4.0}}, 1);
  ElectricalNetwork parallel({1, 2}, {{1, 2, 2.0}, {1, 2, 3.0}}, 1);
  ElectricalNetwork triangle({1, 2, 3}, {{1, 2, 1.0}, {2, 3, 1.0}, {1, 3, 1.0}}, 1);
  double closed = std::abs(effective_resistance(series, 1, 3) - (0.5 + 0.25));
  closed = std::max(closed, std::abs(effective_resistance(parallel, 1, 2) - 1.0 / 5.0));
  closed = std::max(closed, std::abs(effective_resistance(triangle, 1, 3) - 2.0 / 3.0));
  RngStream rng(1001, 0);
  double axiom = 0.0, oracle = 0.0;
  for (int k = 0; k < 100; ++k) {
    const auto net = random_network(2 + static_cast<int>(rng.below(29)), rng);
    const auto R = all_pairs_resistance(net);
    const auto O = pinv_resistance(net);
    const auto n = R.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
      axiom = std::max(axiom, std::abs(R(i, i)));
      for (Eigen::Index j = 0; j < n; ++j) {
        axiom = std::max(axiom, std::abs(R(i, j) - R(j, i)));
        if (i != j && !(R(i, j) > 0.0)) axiom = std::max(axiom, 1.0);
        oracle = std::max(oracle, std::abs(R(i, j) - O(i, j)) / std::max(1.0, O(i, j)));
        for (Eigen::Index l = 0; l < n; ++l) axiom = std::max(axiom, R(i, l) - R(i, j) - R(j, l));
      }
    }
  }
  return {closed <= 1e-10 && axiom <= 1e-9 && oracle <= 1e-9,
          "closed-form error " + fmt(closed) + ", worst axiom violation " + fmt(axiom) + ", worst pinv deviation " + fmt(oracle)};
}

// 2. Fusing sandwich.
Outcome criterion2() {
  RngStream rng(1002, 0);
  double lower = -1e300, upper = -1e300;
  for (int k = 0; k < 100; ++k) {
    const auto net = random_network(3 + static_cast<int>(rng.below(25)), rng);
    const auto& e = net.edges()[rng.below(net.edges().size())];
    const auto f = fuse(net, {{net.id(e.u), net.id(e.v)}});
    const auto R = all_pairs_resistance(net);
    const auto Rf = all_pairs_resistance(f.network);
    const double mu_ab = net.conductance(e.u, e.v);
    for (std::size_t x = 0; x < net.size(); ++x)
      for (std::size_t y = 0; y < net.size(); ++y) {
        const double rg = R(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y));
        const double rf = Rf(static_cast<Eigen::Index>(f.canonical_map[x]), static_cast<Eigen::Index>(f.canonical_map[y]));
        lower = std::max(lower, rf - rg);
        upper = std::max(upper, rg - rf - 1.0 / mu_ab);
      }
  }
  return {lower <= 1e-9 && upper <= 1e-9, "max(R~ - R) " + fmt(lower) + ", max(R - R~ - 1/mu(a,b)) " + fmt(upper)};
}

// 3. Gasket counts and corner resistance.
Outcome criterion3() {
  bool counts = true;
  for (int n = 0; n <= 8; ++n) {
    const std::size_t expected = (static_cast<std::size_t>(std::pow(3.0, n + 1)) + 3) / 2;
    counts = counts && sierpinski(n).network.size() == expected;
  }
  double worst = 0.0;
  for (int n = 0; n <= 6; ++n) {
    const auto g = sierpinski(n);
    const double r = effective_resistance(g.network, gasket_vertex_id(n, 0, 0), gasket_vertex_id(n, 1 << n, 0));
    worst = std::max(worst, std::abs(r - 2.0 / 3.0 * std::pow(5.0 / 3.0, n)));
  }
  return {counts && worst <= 1e-9, std::string("vertex counts ") + (counts ? "exact" : "wrong") + " for n <= 8, worst resistance error " + fmt(worst)};
}

// 4. Scaling identity for the Pareto law. The identity is exact where
// c_n u >= u_min; u is drawn from that range.
Outcome criterion4() {
  RngStream rng(1004, 0);
  int bad = 0;
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const double alpha = 0.05 + 0.9 * rng.uniform_open_right();
    const TrapLaw law{alpha, 1.0};
    const double b = std::exp(15.0 * rng.uniform_open_right());
    const double u_low = 1.0000000001 * std::pow(b, -1.0 / alpha);
    const double u = u_low * std::exp(std::log(50.0 / u_low) * rng.uniform_open_right());
    const double lhs = scaled_tail(law, b, u), rhs = power_tail(alpha, u);
    bad += lhs != rhs;
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  return {bad == 0, std::to_string(bad) + " of 100 residuals nonzero, worst " + fmt(worst)};
}

// 5. Void probabilities of pi_n and of the limiting PRM.
Outcome criterion5() {
  ExperimentConfig c;
  c.kind = "traps";
  c.ensemble.kind = EnsembleKind::Sierpinski;
  c.ensemble.sizes = {4};
  c.alpha = 0.5;
  c.replicas = 10000;
  c.seed = 1005;
  c.v_floor = 0.1;
  const auto t = run_trap_convergence(c);
  const double p = t.select("void_pvalue_pooled").at(0)->value;
  const double p_prm = t.select("prm_void_pvalue_pooled").at(0)->value;
  double min_box = 1.0, min_box_prm = 1.0;
  for (const auto* r : t.select("void_pvalue")) min_box = std::min(min_box, r->value);
  for (const auto* r : t.select("prm_void_pvalue")) min_box_prm = std::min(min_box_prm, r->value);
  bool residual = true;
  for (const auto* r : t.select("tail_identity_residual")) residual = residual && r->value == 0.0;
  return {p > 0.01 && p_prm > 0.01 && residual && c.boxes.size() == 20,
          "20 boxes, 10^4 replicas: pooled p " + fmt(p) + " (finite), " + fmt(p_prm) + " (PRM); smallest per-box p " + fmt(min_box) + ", " +
              fmt(min_box_prm)};
}

// 6. Gillespie marginals against the spectral kernel, and two-state closed forms.
Outcome criterion6() {
  RngStream rng(1006, 0);
  std::vector<ElectricalNetwork> zoo;
  for (int m = 1; m <= 6; ++m) {
    std::vector<std::pair<int, int>> path, cycle, star, complete;
    for (int i = 1; i < m; ++i) path.emplace_back(i, i + 1);
    cycle = path;
    if (m >= 3) cycle.emplace_back(m, 1);
    for (int i = 2; i <= m; ++i) star.emplace_back(1, i);
    for (int i = 1; i <= m; ++i)
      for (int j = i + 1; j <= m; ++j) complete.emplace_back(i, j);
    std::set<std::vector<std::pair<int, int>>> shapes{path, cycle, star, complete};
    for (const auto& s : shapes) zoo.push_back(from_pairs(m, s, &rng));
    if (m >= 3) zoo.push_back(random_network(m, rng));
  }
  const std::size_t N = 100000;
  std::size_t outside = 0, checks = 0;
  double worst_z = 0.0;
  for (std::size_t k = 0; k < zoo.size(); ++k) {
    const auto& net = zoo[k];
    std::vector<double> nu(net.size());
    for (auto& w : nu) w = 0.2 + 3.0 * rng.uniform_open_right();
    const Generator gen(net, nu);
    const SpectralKernel K(gen);
    const double t = 0.3 + 1.5 * rng.uniform_open_right();
    std::vector<double> hits(net.size(), 0.0);
    for (std::size_t j = 0; j < N; ++j) {
      RngStream r(2006 + k, j);
      hits[state_at_time(gen, net.root(), t, r)] += 1.0;
    }
    const auto row = K.row(net.root(), t);
    for (std::size_t x = 0; x < net.size(); ++x) {
      const double p = std::clamp(row(static_cast<Eigen::Index>(x)), 0.0, 1.0);
      const double sigma = std::sqrt(p * (1.0 - p) / static_cast<double>(N));
      const double diff = std::abs(hits[x] / static_cast<double>(N) - p);
      ++checks;
      if (sigma > 0.0) worst_z = std::max(worst_z, diff / sigma);
      outside += diff > 3.0 * sigma + 1e-15;
    }
  }
  // Two states with conductance mu and traps nu1, nu2 started at 1.
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const double mu = 0.5 + rng.uniform_open_right(), n1 = 0.2 + 3.0 * rng.uniform_open_right(), n2 = 0.2 + 3.0 * rng.uniform_open_right();
    const ElectricalNetwork two({1, 2}, {{1, 2, mu}}, 1);
    const SpectralKernel K(Generator(two, {n1, n2}));
    const double a = mu / n1, b = mu / n2, q = a + b;
    auto P11 = [&](double s) { return b / q + a / q * std::exp(-q * s); };
    auto P22 = [&](double s) { return a / q + b / q * std::exp(-q * s); };
    const double s = 2.0 * rng.uniform_open_right() + 0.01, t = s + 2.0 * rng.uniform_open_right();
    const double phi = P11(s) * P11(t - s) + (1.0 - P11(s)) * P22(t - s);
    const double psi = P11(t) * std::exp(-a * s) + (1.0 - P11(t)) * std::exp(-b * s);
    worst = std::max(worst, std::abs(aging_phi(K, 0, s, t) - phi));
    worst = std::max(worst, std::abs(subaging_psi(K, two, 0, s, t) - psi));
  }
  return {outside == 0 && worst <= 1e-10, std::to_string(zoo.size()) + " networks, " + std::to_string(checks) + " state marginals, " +
                                               std::to_string(outside) + " outside 3 sigma (max |z| " + fmt(worst_z) +
                                               "); two-state error " + fmt(worst)};
}

// 7. Exit-time bound, return-probability lower bounds and positivity.
Outcome criterion7() {
  RngStream rng(1007, 0);
  std::size_t instances = 0, exit_fail = 0, exit_exact_fail = 0, global_fail = 0, local_fail = 0, positive_fail = 0, nontrivial = 0;
  while (instances < 100) {
    const int m = 4 + static_cast<int>(rng.below(12));
    const auto net = random_network(m, rng);
    const auto nu = sample_trap(net, TrapLaw{0.3 + 0.6 * rng.uniform_open_right(), 1.0}, rng.substream(1000 + instances));
    const Generator gen(net, nu);
    const SpectralKernel K(gen);
    const auto R = all_pairs_resistance(net);
    const std::size_t x = rng.below(net.size());
    const double rmax = R.row(static_cast<Eigen::Index>(x)).maxCoeff();
    const double r = (0.2 + 0.8 * rng.uniform_open_right()) * rmax;
    const double Rb = boundary_resistance(net, R, x, r);
    const double t = std::exp(4.0 * rng.uniform_open_right() - 3.0);
    if (std::isinf(Rb)) continue;
    const double delta = Rb * (0.05 + 0.5 * rng.uniform_open_right());
    const auto ec = exit_time_bound_check(gen, R, x, r, delta, t, rng.substream(2000 + instances), 2000, 0.99);
    exit_fail += !ec.holds;
    exit_exact_fail += !ec.exact_holds;
    nontrivial += ec.bound < 1.0;
    const double eps = (0.1 + rng.uniform_open_right()) * rmax;
    const auto rc = return_probability_bounds_check(K, gen, R, x, t, eps, rng.substream(3000 + instances), 500);
    global_fail += !rc.global_holds;
    local_fail += !rc.local_holds_exact || !rc.local_holds_mc;
    positive_fail += !rc.positive;
    ++instances;
  }
  const bool ok = exit_fail == 0 && exit_exact_fail == 0 && global_fail == 0 && local_fail == 0 && positive_fail == 0;
  return {ok, "100 instances: exit bound failures " + std::to_string(exit_fail) + " (MC 99%), " + std::to_string(exit_exact_fail) +
                  " (exact), nontrivial bounds " + std::to_string(nontrivial) + "; global/local lower bound failures " +
                  std::to_string(global_fail) + "/" + std::to_string(local_fail) + "; positivity failures " + std::to_string(positive_fail)};
}

// 8. Prohorov oracle and the collision example.
Outcome criterion8() {
  RngStream rng(1008, 0);
  int mismatches = 0, pairs = 0;
  while (pairs < 200) {
    const int n = 1 + static_cast<int>(rng.below(6));
    std::vector<double> coords;
    for (int i = 0; i < n; ++i) coords.push_back(2.0 * rng.uniform_open_right());
    std::sort(coords.begin(), coords.end());
    if (std::adjacent_find(coords.begin(), coords.end()) != coords.end()) continue;
    const auto S = line_space(coords);
    DiscreteMeasure a(S), b(S);
    for (int i = 0; i < n; ++i) {
      if (bernoulli(rng, 0.6)) a.add(static_cast<std::size_t>(i), 0.05 + 1.5 * rng.uniform_open_right());
      if (bernoulli(rng, 0.6)) b.add(static_cast<std::size_t>(i), 0.05 + 1.5 * rng.uniform_open_right());
    }
    mismatches += prohorov(a, b) != prohorov_by_subsets(a, b);
    ++pairs;
  }
  // nu_n = delta_0 + delta_{1/n} against 2 delta_0. The integrand of d_Mdis is
  // 1 for r <= log 2, which bounds it below by 1/2.
  double min_dis = 1e300, first_vague = 0.0, last_vague = 0.0, worst_formula = 0.0;
  bool vague_decreasing = true;
  double prev = 1e300;
  for (int n = 1; n <= 100; ++n) {
    const double h = 1.0 / n;
    const auto S = line_space({0.0, h});
    const DiscreteMeasure nun(S, {{0, 1.0}, {1, 1.0}}), two(S, {{0, 2.0}});
    const double v = vague_distance(nun, two);
    worst_formula = std::max(worst_formula, std::abs(v - ((1.0 - std::exp(-h)) + std::exp(-h) * std::min(h, 1.0))));
    vague_decreasing = vague_decreasing && v < prev;
    prev = v;
    if (n == 1) first_vague = v;
    last_vague = v;
    min_dis = std::min(min_dis, dis_measure_distance(nun, two));
  }
  const bool ok = mismatches == 0 && vague_decreasing && worst_formula <= 1e-12 && min_dis >= 0.5 - 1e-12;
  return {ok, std::to_string(mismatches) + " flow/subset mismatches in 200 pairs; vague " + fmt(first_vague) + " -> " + fmt(last_vague) +
                  " (formula error " + fmt(worst_formula) + "); min d_Mdis " + fmt(min_dis) + " >= 1/2"};
}

// 9. Cayley, tilted+surplus and degree laws.
Outcome criterion9() {
  RngStream rng(1009, 0);
  const double N = 100000;
  std::map<std::vector<std::pair<int, int>>, double> cay;
  for (int k = 0; k < N; ++k) cay[uniform_cayley_tree(3, rng).edges] += 1.0;
  double chi = 0.0;
  for (const auto& [e, c] : cay) chi += (c - N / 3.0) * (c - N / 3.0) / (N / 3.0);
  const double p_cay = cay.size() == 3 ? chi2_sf(chi, 2.0) : 0.0;

  // Enumerated G(3,p) conditioned on being connected.
  const double p = 0.35;
  std::map<std::string, double> law;
  const std::vector<std::pair<int, int>> all{{1, 2}, {1, 3}, {2, 3}};
  double Z = 0.0;
  for (int mask = 0; mask < 8; ++mask) {
    std::vector<std::pair<int, int>> e;
    for (int k = 0; k < 3; ++k)
      if (mask >> k & 1) e.push_back(all[static_cast<std::size_t>(k)]);
    if (e.size() < 2) continue;
    const double w = std::pow(p, static_cast<double>(e.size())) * std::pow(1.0 - p, 3.0 - static_cast<double>(e.size()));
    law[graph_key(from_pairs(3, e, nullptr))] = w;
    Z += w;
  }
  std::map<std::string, double> obs;
  for (int k = 0; k < N; ++k) obs[graph_key(surplus_attachment(tilted_tree(3, p, rng), p, rng).network)] += 1.0;
  double chi_er = 0.0;
  bool support = obs.size() == law.size();
  for (const auto& [key, w] : law) {
    const double e = N * w / Z, o = obs.count(key) ? obs[key] : 0.0;
    chi_er += (o - e) * (o - e) / e;
  }
  const double p_er = support ? chi2_sf(chi_er, static_cast<double>(law.size() - 1)) : 0.0;

  // Degree fractions over a single tree of size 2000.
  const int m = 2000;
  const auto tree = uniform_cayley_tree(m, rng);
  std::vector<int> deg(m + 1, 0);
  for (const auto& [u, v] : tree.edges) ++deg[static_cast<std::size_t>(u)], ++deg[static_cast<std::size_t>(v)];
  double worst_z = 0.0;
  double fact = 1.0;
  for (int k = 1; k <= 5; ++k) {
    if (k > 1) fact *= k - 1;
    const double pk = std::exp(-1.0) / fact;
    const double f = static_cast<double>(std::count(deg.begin() + 1, deg.end(), k)) / m;
    worst_z = std::max(worst_z, std::abs(f - pk) / std::sqrt(pk * (1.0 - pk) / m));
  }
  return {p_cay > 0.01 && p_er > 0.01 && worst_z <= 3.0,
          "Cayley m=3 p " + fmt(p_cay) + "; tilted+surplus vs connected G(3,0.35) p " + fmt(p_er) + "; degree fractions max |z| " + fmt(worst_z)};
}

// 10. Gasket aging and sub-aging stabilization.
Outcome criterion10() {
  ExperimentConfig c;
  c.kind = "aging";
  c.ensemble.kind = EnsembleKind::Sierpinski;
  c.ensemble.sizes = {1, 2, 3, 4, 5};
  c.alpha = 0.5;
  c.s_grid = {0.0, 1.0};
  c.t_grid = {1.0, 2.0};
  c.replicas = 2000;
  c.seed = 1010;
  c.coupling = Coupling::Prm;
  const auto [phi, psi] = run_two_point_experiments(c);
  const auto sp = stabilization(phi, "phi", 1.0, 2.0);
  const auto ss = stabilization(psi, "psi", 1.0, 1.0);
  bool exact = true;
  std::size_t cols = 0;
  for (const auto* r : phi.select("phi"))
    if (r->s == r->t) exact = exact && r->value == 1.0, ++cols;
  for (const auto* r : psi.select("psi"))
    if (r->s == 0.0) exact = exact && r->value == 1.0, ++cols;
  std::string d1, d2;
  for (double d : sp.differences) d1 += " " + fmt(d);
  for (double d : ss.differences) d2 += " " + fmt(d);
  const bool ok = sp.monotone && ss.monotone && sp.final_difference < 0.05 && ss.final_difference < 0.05 && exact && cols > 0 &&
                  sp.differences.size() == 4 && ss.differences.size() == 4;
  return {ok, "Phi(1,2) differences" + d1 + "; Psi(1,1) differences" + d2 + "; identity columns " + (exact ? "exact" : "inexact") + " (" +
                  std::to_string(cols) + " values)"};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "resistance exactness", 10, criterion1},     {2, "fusing sandwich", 10, criterion2},
      {3, "gasket quantitative", 30, criterion3},      {4, "scaling constants", 1, criterion4},
      {5, "trap point processes", 60, criterion5},     {6, "dynamics oracle equivalence", 120, criterion6},
      {7, "inequality suite", 120, criterion7},        {8, "metric oracles", 30, criterion8},
      {9, "ensemble laws", 120, criterion9},           {10, "aging/sub-aging convergence", 600, criterion10},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool pass = o.pass && secs < c.limit;
    failures += !pass;
    std::printf("%s %d %s: %s [%.2f s, limit %.0f s]\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs, c.limit);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
