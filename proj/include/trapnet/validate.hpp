#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "trapnet/dynamics.hpp"
#include "trapnet/ensembles.hpp"
#include "trapnet/measure_metrics.hpp"
#include "trapnet/network.hpp"
#include "trapnet/rng.hpp"
#include "trapnet/trap.hpp"

namespace trapnet {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

/// Largest violation of the metric axioms; negative entries count as violations.
inline double metric_axiom_violation(const Eigen::MatrixXd& R) {
  const auto n = R.rows();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    worst = std::max(worst, std::abs(R(i, i)));
    for (Eigen::Index j = 0; j < n; ++j) {
      worst = std::max(worst, std::abs(R(i, j) - R(j, i)));
      if (i != j) worst = std::max(worst, -R(i, j));
      for (Eigen::Index k = 0; k < n; ++k) worst = std::max(worst, R(i, k) - R(i, j) - R(j, k));
    }
  }
  return worst;
}

}  // namespace detail

/// Network invariants: resistance metric axioms, Laplacian rows, and the
/// Rayleigh comparison R_G~ <= R_G <= R_G~ + 1/mu(a,b) for each edge fused.
inline std::vector<CheckResult> network_invariants(const ElectricalNetwork& net) {
  std::vector<CheckResult> out;
  const auto R = all_pairs_resistance(net);
  const double viol = detail::metric_axiom_violation(R);
  out.push_back({"resistance metric axioms", viol <= 1e-9, "worst violation " + detail::fmt(viol)});
  const Eigen::MatrixXd L = net.laplacian();
  const double rowsum = L.rowwise().sum().cwiseAbs().maxCoeff();
  out.push_back({"laplacian rows sum to zero", rowsum <= 1e-9 * std::max(1.0, L.cwiseAbs().maxCoeff()), "max |row sum| " + detail::fmt(rowsum)});
  double worst = 0.0;
  std::size_t checked = 0;
  for (const auto& e : net.edges()) {
    if (checked++ >= 8) break;
    auto fused = fuse(net, {{net.id(e.u), net.id(e.v)}});
    const auto Rf = all_pairs_resistance(fused.network);
    for (std::size_t x = 0; x < net.size(); ++x)
      for (std::size_t y = 0; y < net.size(); ++y) {
        const double rg = R(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y));
        const double rf = Rf(static_cast<Eigen::Index>(fused.canonical_map[x]), static_cast<Eigen::Index>(fused.canonical_map[y]));
        worst = std::max({worst, rf - rg, rg - rf - 1.0 / e.conductance});
      }
  }
  out.push_back({"fusing sandwich", worst <= 1e-9, "worst excess " + detail::fmt(worst)});
  return out;
}

/// Kernel invariants for one (network, trap): stochastic rows, nu-symmetry,
/// positivity and the exact identities Phi(s,s) = 1, Psi(0,t) = 1.
inline std::vector<CheckResult> kernel_invariants(const ElectricalNetwork& net, const std::vector<double>& nu, double t) {
  std::vector<CheckResult> out;
  const Generator gen(net, nu);
  const SpectralKernel K(gen);
  const Eigen::MatrixXd P = K.matrix(t);
  double row = 0.0, sym = 0.0, minp = 1.0;
  for (Eigen::Index x = 0; x < P.rows(); ++x) {
    row = std::max(row, std::abs(P.row(x).sum() - 1.0));
    for (Eigen::Index y = 0; y < P.cols(); ++y) {
      sym = std::max(sym, std::abs(nu[static_cast<std::size_t>(x)] * P(x, y) - nu[static_cast<std::size_t>(y)] * P(y, x)) /
                              std::max(nu[static_cast<std::size_t>(x)], nu[static_cast<std::size_t>(y)]));
      minp = std::min(minp, P(x, y));
    }
  }
  out.push_back({"kernel rows sum to one", row <= 1e-9, "max deviation " + detail::fmt(row)});
  out.push_back({"kernel reversible w.r.t. nu", sym <= 1e-9, "max asymmetry " + detail::fmt(sym)});
  const Eigen::VectorXd d = K.diagonal(t);
  out.push_back({"return probabilities positive", d.minCoeff() > 1e-300, "min P_t(x,x) " + detail::fmt(d.minCoeff())});
  out.push_back({"kernel entries nonnegative", minp >= -1e-12, "min entry " + detail::fmt(minp)});
  const bool phi = aging_phi(K, net.root(), t, t) == 1.0;
  const bool psi = subaging_psi(K, net, net.root(), 0.0, t) == 1.0;
  out.push_back({"aging identities exact", phi && psi, std::string("phi(s,s) ") + (phi ? "1" : "!= 1") + ", psi(0,t) " + (psi ? "1" : "!= 1")});
  return out;
}

/// Cross-module suite on seeded random inputs, plus the given network if any.
inline std::vector<CheckResult> run_invariant_suite(std::uint64_t seed, const ElectricalNetwork* extra = nullptr) {
  std::vector<CheckResult> out;
  auto append = [&](const std::string& prefix, std::vector<CheckResult> v) {
    for (auto& c : v) {
      c.name = prefix + c.name;
      out.push_back(std::move(c));
    }
  };
  const RngStream root(seed, 0xA11);

  // Closed forms.
  {
    ElectricalNetwork series({1, 2, 3}, {{1, 2, 2.0}, {2, 3, 4.0}}, 1);
    ElectricalNetwork parallel({1, 2}, {{1, 2, 2.0}, {2, 1, 3.0}}, 1);
    ElectricalNetwork triangle({1, 2, 3}, {{1, 2, 1.0}, {2, 3, 1.0}, {1, 3, 1.0}}, 1);
    const double e1 = std::abs(effective_resistance(series, 1, 3) - 0.75);
    const double e2 = std::abs(effective_resistance(parallel, 1, 2) - 0.2);
    const double e3 = std::abs(effective_resistance(triangle, 1, 2) - 2.0 / 3.0);
    const double worst = std::max({e1, e2, e3});
    out.push_back({"series/parallel/triangle resistances", worst <= 1e-10, "worst error " + detail::fmt(worst)});
  }

  // Random networks.
  for (int k = 0; k < 5; ++k) {
    auto rng = root.substream(static_cast<std::uint64_t>(k));
    const auto net = random_network(4 + 3 * k, rng);
    append("random network " + std::to_string(k) + ": ", network_invariants(net));
    const auto nu = sample_trap(net, {0.5, 1.0}, root.substream(100 + static_cast<std::uint64_t>(k)));
    append("random network " + std::to_string(k) + ": ", kernel_invariants(net, nu, 0.5));
  }

  // Gasket.
  {
    bool counts = true;
    for (int n = 0; n <= 6; ++n) counts = counts && sierpinski(n).network.size() == gasket_vertex_count(n);
    double worst = 0.0;
    for (int n = 0; n <= 4; ++n) {
      const auto g = sierpinski(n);
      const double r = effective_resistance(g.network, gasket_vertex_id(n, 0, 0), gasket_vertex_id(n, 1 << n, 0));
      worst = std::max(worst, std::abs(r - 2.0 / 3.0 * std::pow(5.0 / 3.0, n)));
    }
    out.push_back({"gasket vertex counts", counts, "(3^{n+1}+3)/2 for n <= 6"});
    out.push_back({"gasket corner resistance", worst <= 1e-9, "worst error " + detail::fmt(worst)});
  }

  // Scaling identity.
  {
    auto rng = root.substream(200);
    std::size_t bad = 0;
    for (int k = 0; k < 100; ++k) {
      const TrapLaw law{0.05 + 0.9 * rng.uniform_open_right(), 1.0};
      const double b = std::exp(20.0 * rng.uniform_open_right());
      // Exact once c_n u >= u_min; below that the tail probability is 1.
      const double u_low = 1.0000000001 * std::pow(b, -1.0 / law.alpha);
      double u = std::exp(4.0 * rng.uniform_open_right() - 2.0);
      while (u < u_low) u = std::exp(4.0 * rng.uniform_open_right() - 2.0);
      bad += scaled_tail(law, b, u) != power_tail(law.alpha, u);
    }
    out.push_back({"scaled Pareto tail identity", bad == 0, std::to_string(bad) + " mismatches in 100"});
  }

  // Prohorov oracle.
  {
    auto rng = root.substream(300);
    double worst = 0.0;
    for (int k = 0; k < 30; ++k) {
      std::vector<double> coords;
      for (int i = 0; i < 6; ++i) coords.push_back(rng.uniform_open_right() * 3.0);
      const auto S = line_space(coords);
      DiscreteMeasure a(S), b(S);
      for (std::size_t i = 0; i < 6; ++i) {
        if (bernoulli(rng, 0.6)) a.add(i, 0.1 + rng.uniform_open_right());
        if (bernoulli(rng, 0.6)) b.add(i, 0.1 + rng.uniform_open_right());
      }
      worst = std::max(worst, std::abs(prohorov(a, b) - prohorov_by_subsets(a, b)));
    }
    out.push_back({"prohorov flow equals subset search", worst == 0.0, "worst difference " + detail::fmt(worst)});
  }

  // Trees.
  {
    auto rng = root.substream(400);
    bool ok = true;
    for (int k = 0; k < 20; ++k) {
      const auto t = as_plane_tree(uniform_cayley_tree(2 + k, rng));
      const auto c = coding_functions(t);
      ok = ok && static_cast<int>(c.X.back()) == -1 && t.size() == static_cast<std::size_t>(2 + k);
    }
    out.push_back({"depth-first walk ends at -1", ok, "20 uniform trees"});
  }

  if (extra) {
    append("input network: ", network_invariants(*extra));
    append("input network: ", kernel_invariants(*extra, sample_trap(*extra, {0.5, 1.0}, root.substream(500)), 1.0));
  }
  return out;
}

}  // namespace trapnet
