#include <catch_amalgamated.hpp>

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <vector>

#include "trapnet/ensembles.hpp"
#include "trapnet/measure_metrics.hpp"
#include "trapnet/trap.hpp"

using namespace trapnet;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinULP;

namespace {

ElectricalNetwork unit_path(int n) {
  std::vector<VertexId> ids;
  std::vector<WeightedEdge> edges;
  for (int i = 1; i <= n; ++i) ids.push_back(i);
  for (int i = 1; i < n; ++i) edges.push_back({i, i + 1, 1.0});
  return ElectricalNetwork(ids, edges, 1);
}

// Binomial frequency within k standard deviations of p.
bool within_sigma(std::size_t hits, std::size_t n, double p, double k) {
  const double f = static_cast<double>(hits) / static_cast<double>(n);
  return std::abs(f - p) <= k * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

// n distinct points within distance 1 of the root.
SpacePtr spread(int n) {
  std::vector<double> c;
  for (int i = 0; i < n; ++i) c.push_back(1e-3 * i);
  return line_space(c);
}

double chi2_sf(double x, double dof) { return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), x)); }

}  // namespace

TEST_CASE("pareto quantile", "[trap]") {
  const TrapLaw law{0.5, 1.0};
  CHECK(pareto_quantile(law, 1.0) == 1.0);
  CHECK(pareto_quantile(TrapLaw{0.3, 2.5}, 1.0) == 2.5);
  CHECK(pareto_quantile(law, 0.25) == 16.0);
  RngStream rng(1, 0);
  const std::size_t n = 1000000;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double x = pareto_sample(law, rng);
    REQUIRE(x >= 1.0);
    hits += x > 10.0;
  }
  CHECK(within_sigma(hits, n, std::pow(10.0, -0.5), 3.0));
  CHECK_THROWS_AS((TrapLaw{1.0, 1.0}.validate()), Error);
  CHECK_THROWS_AS((TrapLaw{0.5, 0.0}.validate()), Error);
}

TEST_CASE("scaling constant", "[trap]") {
  const TrapLaw law{0.5, 1.0};
  CHECK(scaling_constant(law, 100.0) == 10000.0);
  CHECK(scaling_constant(law, 1.0) == 1.0);
  CHECK(scaling_constant(TrapLaw{0.25, 3.0}, 1.0) == 3.0);
  CHECK_THROWS_AS(scaling_constant(law, 0.5), Error);
  try {
    scaling_constant(law, 0.5);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InvalidScale);
  }
  CHECK_THAT(scaled_tail(law, 100.0, 2.0), WithinULP(std::pow(2.0, -0.5), 1));
  CHECK(scaled_tail(law, 100.0, 2.0) == power_tail(0.5, 2.0));
  const auto s = make_scale(law, 4.0, 100.0);
  CHECK(s.a == 4.0);
  CHECK(s.c == 10000.0);
  CHECK_THROWS_AS(make_scale(law, 0.0, 100.0), Error);
}

TEST_CASE("scaled tail identity holds exactly for the Pareto law", "[trap]") {
  RngStream rng(2, 0);
  for (int k = 0; k < 2000; ++k) {
    const TrapLaw law{0.02 + 0.96 * rng.uniform_open_right(), 0.5 + 2.0 * rng.uniform_open_right()};
    const double b = std::exp(30.0 * rng.uniform_open_right());
    const double c = scaling_constant(law, b);
    // Keep u clear of the rounded threshold u_min / c, below which P(xi > c u) = 1.
    const double u = std::max(law.u_min / c * (1.0 + 1e-12), std::exp(6.0 * rng.uniform_open_right() - 3.0));
    const double v = scaled_tail(law, b, u);
    REQUIRE(v == power_tail(law.alpha, u));
    REQUIRE_THAT(v, WithinULP(std::pow(u, -law.alpha), 2));
  }
}

TEST_CASE("sample_trap", "[trap]") {
  const TrapLaw law{0.5, 1.0};
  ElectricalNetwork single({9}, {}, 9);
  const auto nu1 = sample_trap(single, law, RngStream(3, 0));
  REQUIRE(nu1.size() == 1);
  CHECK(nu1[0] >= 1.0);

  const auto p = unit_path(50);
  const auto a = sample_trap(p, law, RngStream(3, 1));
  const auto b = sample_trap(p, law, RngStream(3, 1));
  CHECK(a == b);
  for (double w : a) CHECK(w >= 1.0);
  const auto c = sample_trap(p, law, RngStream(3, 2));
  CHECK(a != c);

  // Weights are keyed by vertex id.
  const auto shorter = unit_path(20);
  const auto d = sample_trap(shorter, law, RngStream(3, 1));
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(d[i] == a[i]);

  CHECK_THROWS_AS(make_environment(p, std::vector<double>(3, 1.0)), Error);
  CHECK_THROWS_AS(make_environment(shorter, std::vector<double>(20, 0.0)), Error);
}

TEST_CASE("trap point processes", "[trap]") {
  const TrapLaw law{0.5, 1.0};
  const auto g = sierpinski(2);
  const auto nu = sample_trap(g.network, law, RngStream(4, 0));
  const auto env = make_environment(g.network, nu, make_scale(law, 1.0, 16.0));
  const auto S = resistance_space(g.network);
  const auto pp = trap_point_process(env, S);
  CHECK(pp.pi.atoms().size() == g.network.size());
  const auto m = measure_map(pp.pi);
  for (std::size_t i = 0; i < nu.size(); ++i) CHECK(m.weight(i) == nu[i] / env.scale.c);
  const auto deg = degree_marked_measure(g.network, S);
  REQUIRE(pp.pi_marked.atoms().size() == deg.atoms().size());
  for (std::size_t i = 0; i < deg.atoms().size(); ++i) CHECK(pp.pi_marked.atoms()[i].mark == deg.atoms()[i].mark);
  CHECK(pp.pi_marked.marked());
}

TEST_CASE("trap point process void probabilities", "[trap]") {
  // P(no atom of pi_n in A x (u, inf)) = (1 - P(xi > c u))^{|A|}, one replica set per u.
  const TrapLaw law{0.5, 1.0};
  const auto p = unit_path(12);
  const double b = 10.0;
  const auto scale = make_scale(law, 1.0, b);
  const std::size_t inA = 6, reps = 10000;
  double chi2 = 0.0;
  const std::vector<double> us{0.05, 0.2, 1.0, 5.0};
  for (std::size_t l = 0; l < us.size(); ++l) {
    const double tail = std::pow(scale.c * us[l], -law.alpha);
    const double p0 = std::pow(1.0 - tail, static_cast<double>(inA));
    std::size_t voids = 0;
    for (std::size_t r = 0; r < reps; ++r) {
      const auto nu = sample_trap(p, law, RngStream(5, 100000 * l + r));
      bool empty = true;
      for (std::size_t i = 0; i < inA; ++i) empty = empty && !(nu[i] / scale.c > us[l]);
      voids += empty;
    }
    const double e = static_cast<double>(reps) * p0;
    chi2 += (voids - e) * (voids - e) / (e * (1.0 - p0));
  }
  CHECK(chi2_sf(chi2, static_cast<double>(us.size())) > 0.01);
}

TEST_CASE("M_eps expectation bound", "[trap]") {
  const TrapLaw law{0.5, 1.0};
  const double eps = 0.1;
  for (int n : {20, 80, 320}) {
    const auto p = unit_path(n);
    const auto scale = make_scale(law, 1.0, static_cast<double>(n));
    const double bound = law.alpha / (1.0 - law.alpha) * n / scale.c * std::pow(eps * scale.c, 1.0 - law.alpha);
    std::vector<double> vals;
    for (int r = 0; r < 2000; ++r) {
      const auto nu = sample_trap(p, law, RngStream(6, static_cast<std::uint64_t>(r)));
      auto pp = trap_point_process(make_environment(p, nu, scale), spread(n));
      vals.push_back(pp_functionals(pp.pi, 1.0, eps).M_eps);
    }
    double m = 0.0, s2 = 0.0;
    for (double v : vals) m += v / vals.size();
    for (double v : vals) s2 += (v - m) * (v - m) / (vals.size() - 1);
    CHECK(m <= bound + 3.0 * std::sqrt(s2 / vals.size()));
  }
}

TEST_CASE("truncated Poisson random measure", "[trap]") {
  const auto S = line_space({0.0, 1.0, 2.0});
  DiscreteMeasure base(S, {{0, 0.5}, {1, 1.5}, {2, 2.0}});
  const double alpha = 0.4, v_floor = 0.05;
  RngStream r0(1);
  CHECK_THROWS_AS(truncated_prm(base, alpha, 0.0, r0), Error);
  try {
    RngStream r(1);
    truncated_prm(base, alpha, -1.0, r);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InvalidTruncation);
  }

  const std::size_t reps = 10000;
  const double rate = std::pow(v_floor, -alpha);
  double count_A = 0.0;
  std::vector<double> us{0.05, 0.2, 1.0, 3.0};
  std::vector<std::size_t> voids(us.size(), 0);
  for (std::size_t r = 0; r < reps; ++r) {
    RngStream rng(7, r);
    const auto pi = truncated_prm(base, alpha, v_floor, rng);
    std::vector<char> hit(us.size(), 0);
    for (const auto& a : pi.atoms()) {
      REQUIRE(a.weight >= v_floor);
      if (a.point == 1) {
        count_A += 1.0;
        for (std::size_t l = 0; l < us.size(); ++l)
          if (a.weight > us[l]) hit[l] = 1;
      }
    }
    for (std::size_t l = 0; l < us.size(); ++l) voids[l] += !hit[l];
  }
  // Cell A = {1}: Poisson(1.5 v_floor^{-alpha}) atoms.
  const double mean = 1.5 * rate;
  CHECK(std::abs(count_A / reps - mean) <= 3.0 * std::sqrt(mean / reps));
  // Void probabilities exp(-mu(A) u^{-alpha}), each checked at 3 sigma.
  for (std::size_t l = 0; l < us.size(); ++l) CHECK(within_sigma(voids[l], reps, std::exp(-1.5 * std::pow(us[l], -alpha)), 3.0));

  // Independent replica sets per u, pooled chi-square at 1%.
  double chi2 = 0.0;
  for (std::size_t l = 0; l < us.size(); ++l) {
    std::size_t v = 0;
    for (std::size_t r = 0; r < reps; ++r) {
      RngStream rng(8, 100000 * l + r);
      const auto pi = truncated_prm(base, alpha, v_floor, rng);
      bool empty = true;
      for (const auto& a : pi.atoms()) empty = empty && !(a.point == 1 && a.weight > us[l]);
      v += empty;
    }
    const double p0 = std::exp(-1.5 * std::pow(us[l], -alpha));
    const double e = reps * p0;
    chi2 += (v - e) * (v - e) / (e * (1.0 - p0));
  }
  CHECK(chi2_sf(chi2, static_cast<double>(us.size())) > 0.01);

  // A floor above everything plausible gives an empty measure in most draws.
  std::size_t empty = 0;
  for (std::size_t r = 0; r < 100; ++r) {
    RngStream rng(9, r);
    empty += truncated_prm(base, alpha, 1e12, rng).empty();
  }
  CHECK(empty >= 99);
}

TEST_CASE("truncated mass below the floor", "[trap]") {
  // Oracle: midpoint quadrature of v * alpha v^{-1-alpha} on (0, v_floor) after v = v_floor s^k.
  for (double alpha : {0.2, 0.5, 0.8}) {
    for (double vf : {1e-4, 0.1, 1.0}) {
      const int k = 8;
      const int m = 200000;
      double sum = 0.0;
      for (int i = 0; i < m; ++i) {
        const double s = (i + 0.5) / m;
        const double v = vf * std::pow(s, k);
        const double dv = vf * k * std::pow(s, k - 1) / m;
        sum += alpha * std::pow(v, -alpha) * dv;
      }
      CHECK_THAT(prm_truncated_mass(alpha, vf), WithinAbs(sum, 1e-6 * sum));
    }
  }
}

TEST_CASE("quantile coupling gives Pareto traps", "[trap]") {
  const TrapLaw law{0.5, 1.0};
  const double cell = 0.3, v_floor = 1e-6;
  const std::size_t reps = 40000;
  const std::vector<double> us{1.5, 4.0, 20.0, 200.0};
  std::vector<std::size_t> above(us.size(), 0);
  for (std::size_t r = 0; r < reps; ++r) {
    RngStream rng(10, r);
    const auto k = poisson(rng, cell * std::pow(v_floor, -law.alpha));
    double M = 0.0;
    for (std::uint64_t j = 0; j < k; ++j) M = std::max(M, v_floor * std::pow(rng.uniform(), -1.0 / law.alpha));
    RngStream fb(11, r);
    const double x = quantile_coupled_trap(law, cell, M, v_floor, fb);
    REQUIRE(x >= 1.0);
    for (std::size_t l = 0; l < us.size(); ++l) above[l] += x > us[l];
  }
  for (std::size_t l = 0; l < us.size(); ++l) CHECK(within_sigma(above[l], reps, std::pow(us[l], -law.alpha), 3.5));

  // Empty cells: the fallback keeps the law exact.
  RngStream fb(12, 0);
  std::size_t big = 0;
  for (std::size_t r = 0; r < reps; ++r) big += quantile_coupled_trap(law, cell, 0.0, 1.0, fb) > 1.5;
  // Conditioned on {M < 1}: U uniform on (0, e^{-0.3}), so P(xi > 1.5) = P(1-U < 1.5^{-1/2}).
  const double cap = std::exp(-cell);
  const double p = std::max(0.0, (std::pow(1.5, -0.5) - (1.0 - cap)) / cap);
  CHECK(within_sigma(big, reps, p, 3.5));
}
