#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unsupported/Eigen/MatrixFunctions>

#include "trapnet/experiments.hpp"
#include "trapnet/io.hpp"

using namespace trapnet;
using Catch::Matchers::WithinAbs;

namespace {

ExperimentConfig gasket_config(std::vector<int> sizes, std::size_t replicas) {
  ExperimentConfig c;
  c.ensemble.kind = EnsembleKind::Sierpinski;
  c.ensemble.sizes = std::move(sizes);
  c.replicas = replicas;
  c.seed = 99;
  c.bootstrap = 200;
  return c;
}

Errc config_error(const json& j) {
  try {
    parse_config(j);
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::NumericalFailure;
}

json base_json() {
  return json{{"kind", "aging"}, {"ensemble", {{"kind", "sierpinski"}, {"sizes", {1, 2}}}}, {"alpha", 0.5}, {"seed", 3}};
}

bool same_rows(const ResultTable& a, const ResultTable& b) {
  if (a.rows.size() != b.rows.size()) return false;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    const auto &x = a.rows[i], &y = b.rows[i];
    if (x.n != y.n || x.replica != y.replica || x.s != y.s || x.t != y.t || x.statistic != y.statistic || x.value != y.value ||
        x.ci_low != y.ci_low || x.ci_high != y.ci_high)
      return false;
  }
  return true;
}

std::string temp_path(const std::string& name) { return (std::filesystem::temp_directory_path() / name).string(); }

}  // namespace

TEST_CASE("config parsing and validation", "[experiments]") {
  const auto c = parse_config(base_json());
  CHECK(c.kind == "aging");
  CHECK(c.ensemble.sizes == std::vector<int>{1, 2});
  CHECK(c.seed == 3);
  CHECK(c.replicas == 1);
  CHECK(c.coupling == Coupling::Prm);
  CHECK(c.boxes.size() == 20);

  // Round trip through the serialized form.
  const auto again = parse_config(config_to_json(c));
  CHECK(config_to_json(again) == config_to_json(c));

  auto j = base_json();
  j.erase("seed");
  CHECK(config_error(j) == Errc::InvalidConfig);
  j = base_json();
  j["ensemble"]["sizes"] = {2, 2};
  CHECK(config_error(j) == Errc::InvalidConfig);
  j["ensemble"]["sizes"] = {3, 1};
  CHECK(config_error(j) == Errc::InvalidConfig);
  j = base_json();
  j["alpha"] = 1.0;
  CHECK(config_error(j) == Errc::InvalidConfig);
  j["alpha"] = 0.0;
  CHECK(config_error(j) == Errc::InvalidConfig);
  j = base_json();
  j["replicas"] = 0;
  CHECK(config_error(j) == Errc::InvalidConfig);
  j = base_json();
  j["kind"] = "plots";
  CHECK(config_error(j) == Errc::InvalidConfig);
  j = base_json();
  j["coupling"] = "magic";
  CHECK(config_error(j) == Errc::InvalidConfig);
  j = base_json();
  j["alpha"] = "half";
  CHECK(config_error(j) == Errc::InvalidConfig);
  j = base_json();
  j["scale"] = {{"a", {1.0}}};
  CHECK(config_error(j) == Errc::InvalidConfig);
  CHECK(config_error(json::array()) == Errc::InvalidConfig);
}

TEST_CASE("default scales per ensemble", "[experiments]") {
  const double alpha = 0.5;
  auto [a, b] = default_scale_ab(EnsembleKind::Sierpinski, 3);
  CHECK_THAT(a, WithinAbs(std::pow(5.0 / 3.0, 3), 1e-12));
  CHECK_THAT(b, WithinAbs(27.0, 1e-12));
  // c~_n = a_n * b_n^{1/alpha} per ensemble.
  auto s = default_scale(EnsembleKind::Sierpinski, 3, TrapLaw{alpha, 1.0});
  CHECK_THAT(s.a * s.c, WithinAbs(std::pow(5.0 / 3.0, 3) * std::pow(3.0, 3 / alpha), 1e-6));
  s = default_scale(EnsembleKind::ConductancePath, 4, TrapLaw{alpha, 1.0});
  CHECK_THAT(s.a * s.c, WithinAbs(16.0 * std::pow(2.0, 4 / alpha), 1e-6));
  s = default_scale(EnsembleKind::CayleyTree, 100, TrapLaw{alpha, 1.0});
  CHECK_THAT(s.a * s.c, WithinAbs(10.0 * std::pow(100.0, 1 / alpha), 1e-6));
  s = default_scale(EnsembleKind::ErCritical, 1000, TrapLaw{alpha, 1.0});
  CHECK_THAT(s.a * s.c / (10.0 * std::pow(1000.0, 2.0 / (3.0 * alpha))), WithinAbs(1.0, 1e-12));
}

TEST_CASE("aging tables are reproducible and well formed", "[experiments]") {
  auto c = gasket_config({1, 2, 3}, 4);
  c.s_grid = {0.0, 1.0, 2.0};
  c.t_grid = {1.0, 2.0};
  c.workers = 1;
  const auto t1 = run_aging_experiment(c);
  c.workers = 3;
  const auto t2 = run_aging_experiment(c);
  CHECK(same_rows(t1, t2));
  CHECK(!t1.rows.empty());
  for (const auto& r : t1.rows) {
    REQUIRE(std::isfinite(r.value));
    REQUIRE(r.ci_low <= r.value);
    REQUIRE(r.value <= r.ci_high);
    if (r.statistic == "phi" || r.statistic == "phi_mean") {
      REQUIRE(r.value >= -1e-12);
      REQUIRE(r.value <= 1.0 + 1e-12);
      if (r.s == r.t) REQUIRE(r.value == 1.0);
    }
  }
  CHECK(t1.select("phi").size() == 3 * 4 * 6);
  CHECK(t1.select("phi_mean").size() == 3 * 6);
  CHECK(t1.select("phi_diff").size() == 2 * 6);

  // A different seed changes the trap environments.
  c.seed = 100;
  CHECK(!same_rows(t1, run_aging_experiment(c)));
}

TEST_CASE("single replica and single level gives one row per grid point", "[experiments]") {
  auto c = gasket_config({2}, 1);
  c.s_grid = {0.5, 1.0};
  c.t_grid = {1.0, 2.0, 3.0};
  const auto t = run_aging_experiment(c);
  CHECK(t.rows.size() == 6);
  for (const auto& r : t.rows) CHECK(r.statistic == "phi");
}

TEST_CASE("aging values agree with an independent matrix exponential", "[experiments]") {
  auto c = gasket_config({1, 2}, 2);
  c.s_grid = {0.0, 0.5, 1.0};
  c.t_grid = {2.0};
  const auto [phi, psi] = run_two_point_experiments(c);
  const InstanceFactory f(c);
  for (std::size_t l = 0; l < 2; ++l)
    for (std::size_t r = 0; r < 2; ++r) {
      const auto inst = f.make(l, r);
      const auto& net = *inst.network;
      const auto n = static_cast<Eigen::Index>(net.size());
      Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, n);
      for (const auto& e : net.edges()) {
        Q(e.u, e.v) += e.conductance / inst.nu[e.u];
        Q(e.v, e.u) += e.conductance / inst.nu[e.v];
      }
      for (Eigen::Index x = 0; x < n; ++x) Q(x, x) = -Q.row(x).sum() + Q(x, x);
      const double unit = inst.scale.a * inst.scale.c;
      const auto rho = static_cast<Eigen::Index>(net.root());
      for (const auto* row : phi.select("phi")) {
        if (row->n != inst.n || row->replica != static_cast<long long>(r)) continue;
        const Eigen::MatrixXd Ps = (Q * (row->s * unit)).exp();
        const Eigen::MatrixXd Pd = (Q * ((row->t - row->s) * unit)).exp();
        double expected = 0.0;
        for (Eigen::Index y = 0; y < n; ++y) expected += Ps(rho, y) * Pd(y, y);
        CHECK_THAT(row->value, WithinAbs(expected, 1e-8));
      }
      for (const auto* row : psi.select("psi")) {
        if (row->n != inst.n || row->replica != static_cast<long long>(r)) continue;
        const Eigen::MatrixXd Pt = (Q * (row->t * unit)).exp();
        double expected = 0.0;
        for (Eigen::Index y = 0; y < n; ++y) expected += Pt(rho, y) * std::exp(Q(y, y) * row->s * inst.scale.c);
        CHECK_THAT(row->value, WithinAbs(expected, 1e-8));
      }
    }
}

TEST_CASE("sub-aging column at s = 0 is one", "[experiments]") {
  auto c = gasket_config({1, 2}, 3);
  c.kind = "subaging";
  c.s_grid = {0.0, 1.0};
  c.t_grid = {0.5, 1.0};
  const auto t = run_experiment(c);
  for (const auto* r : t.select("psi")) {
    CHECK(r->value <= 1.0 + 1e-12);
    CHECK(r->value >= 0.0);
    if (r->s == 0.0) CHECK(r->value == 1.0);
  }
}

TEST_CASE("gasket stabilization diagnostic", "[experiments]") {
  auto c = gasket_config({1, 2, 3, 4}, 100);
  c.s_grid = {1.0};
  c.t_grid = {1.0, 2.0};
  const auto [phi, psi] = run_two_point_experiments(c);
  const auto sp = stabilization(phi, "phi", 1.0, 2.0);
  const auto ss = stabilization(psi, "psi", 1.0, 1.0);
  REQUIRE(sp.differences.size() == 3);
  CHECK(sp.monotone);
  CHECK(ss.monotone);
  // The _diff rows measure the paired mean change between consecutive levels.
  const auto diffs = phi.select("phi_diff");
  for (const auto* d : diffs) {
    CHECK(d->value >= 0.0);
    CHECK(d->ci_low <= d->value);
  }
}

TEST_CASE("stabilization on a synthetic table", "[experiments]") {
  ResultTable t;
  t.add(3, -1, 1, 2, "phi_mean", 0.5);
  t.add(1, -1, 1, 2, "phi_mean", 0.8);
  t.add(2, -1, 1, 2, "phi_mean", 0.6);
  t.add(2, -1, 1, 3, "phi_mean", 0.0);
  auto s = stabilization(t, "phi", 1, 2);
  REQUIRE(s.differences.size() == 2);
  CHECK_THAT(s.differences[0], WithinAbs(0.2, 1e-15));
  CHECK_THAT(s.differences[1], WithinAbs(0.1, 1e-15));
  CHECK(s.monotone);
  CHECK_THAT(s.final_difference, WithinAbs(0.1, 1e-15));
  t.add(4, -1, 1, 2, "phi_mean", 0.8);
  CHECK(!stabilization(t, "phi", 1, 2).monotone);
}

TEST_CASE("random ensembles run and report failures", "[experiments]") {
  ExperimentConfig c;
  c.ensemble.kind = EnsembleKind::CayleyTree;
  c.ensemble.sizes = {5, 10};
  c.replicas = 3;
  c.seed = 5;
  c.bootstrap = 100;
  const auto t = run_aging_experiment(c);
  CHECK(t.select("phi").size() == 6);
  CHECK(std::find(t.notes.begin(), t.notes.end(), "no common embedding; prm coupling falls back to location coupling") != t.notes.end());

  // n = 1 leaves no critical window, so every replica fails.
  ExperimentConfig e;
  e.ensemble.kind = EnsembleKind::ErCritical;
  e.ensemble.sizes = {1, 30};
  e.replicas = 2;
  e.seed = 5;
  e.bootstrap = 100;
  const auto te = run_aging_experiment(e);
  const auto f = te.select("failures");
  REQUIRE(f.size() == 1);
  CHECK(f[0]->n == 1);
  CHECK(f[0]->value == 2.0);
  CHECK(te.select("phi").size() == 2);
  CHECK(!te.notes.empty());

  ExperimentConfig p;
  p.ensemble.kind = EnsembleKind::ConductancePath;
  p.ensemble.sizes = {1, 2};
  p.replicas = 2;
  p.seed = 5;
  p.bootstrap = 100;
  const auto tp = run_aging_experiment(p);
  CHECK(tp.select("phi").size() == 4);
  for (const auto* r : tp.select("path_exit_bound")) CHECK(r->value >= 0.0);
}

TEST_CASE("trap convergence table", "[experiments]") {
  auto c = gasket_config({2, 3}, 2000);
  c.kind = "traps";
  c.v_floor = 0.1;
  BoxSpec far;
  far.shape = BoxSpec::Shape::Rect;
  far.x = {5.0, 6.0};
  far.y = {5.0, 6.0};
  far.u = 1.0;
  c.boxes.push_back(far);
  const auto t = run_experiment(c);
  for (const auto* r : t.select("tail_identity_residual")) CHECK(r->value == 0.0);
  for (const auto& r : t.rows) {
    REQUIRE(std::isfinite(r.value));
    if (r.statistic.find("void") != std::string::npos || r.statistic.find("pvalue") != std::string::npos) {
      REQUIRE(r.value >= 0.0);
      REQUIRE(r.value <= 1.0);
    }
  }
  const long long far_idx = static_cast<long long>(c.boxes.size() - 1);
  for (const auto* r : t.select("void_empirical"))
    if (r->replica == far_idx) CHECK(r->value == 1.0);
  for (const auto* r : t.select("void_exact"))
    if (r->replica == far_idx) CHECK(r->value == 1.0);
  for (const auto* r : t.select("box_mass"))
    if (r->replica == far_idx) CHECK(r->value == 0.0);
  for (const auto* r : t.select("void_pvalue_pooled")) CHECK(r->value > 0.01);
  for (const auto* r : t.select("prm_void_pvalue_pooled")) CHECK(r->value > 0.01);
  CHECK(t.select("void_pvalue_pooled").size() == 2);

  // With the root resistance ball of radius r, the mass is |{x : R(rho,x) < r a_n}| / b_n.
  const auto g = sierpinski(2);
  const auto scale = default_scale(EnsembleKind::Sierpinski, 2, c.law());
  const ResistanceSolver solver(g.network);
  for (const auto* r : t.select("box_mass")) {
    if (r->n != 2 || r->replica == far_idx) continue;
    double count = 0.0;
    for (std::size_t x = 0; x < g.network.size(); ++x) count += solver(g.network.root(), x) / scale.a < r->s;
    CHECK_THAT(r->value, WithinAbs(count / scale.b, 1e-15));
  }
}

TEST_CASE("metric convergence", "[experiments]") {
  auto c = gasket_config({1, 2, 3, 4}, 2);
  c.kind = "metrics";
  const InstanceFactory f(c);
  const auto a = f.make(1, 0);
  const auto same = level_distances(a, a);
  CHECK(same.dis_measure == 0.0);
  CHECK(same.local_hausdorff == 0.0);

  const auto t = run_experiment(c);
  CHECK(t.select("local_hausdorff").size() == 3 * 2);
  for (const auto* r : t.select("local_hausdorff")) {
    const int coarse = static_cast<int>(r->s);
    CHECK(r->value <= std::ldexp(1.0, -coarse) + 1e-12);
    CHECK(r->value >= 0.0);
  }
  for (const auto* r : t.select("dis_measure")) {
    CHECK(r->value >= 0.0);
    CHECK(std::isfinite(r->value));
  }

  ExperimentConfig tree;
  tree.kind = "metrics";
  tree.ensemble.kind = EnsembleKind::CayleyTree;
  tree.ensemble.sizes = {4, 8};
  tree.seed = 1;
  const auto tt = run_experiment(tree);
  CHECK(tt.rows.empty());
  REQUIRE(tt.notes.size() == 1);
  CHECK(tt.notes[0].find("NoCommonEmbedding") != std::string::npos);

  const InstanceFactory tf(tree);
  CHECK_THROWS_AS(level_distances(tf.make(0, 0), tf.make(1, 0)), Error);
}

TEST_CASE("CSV and JSON outputs", "[experiments]") {
  auto c = gasket_config({1, 2}, 2);
  c.csv_out = temp_path("trapnet_test_table.csv");
  c.json_out = temp_path("trapnet_test_table.json");
  const auto t = run_aging_experiment(c);

  std::ifstream in(c.csv_out);
  std::string header;
  std::getline(in, header);
  CHECK(header == "n,replica,s,t,statistic,value,ci_low,ci_high\r");
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  CHECK(lines == t.rows.size());

  const auto j = read_json_file(c.json_out);
  REQUIRE(j.at("rows").size() == t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const double v = j["rows"][i]["value"].get<double>();
    CHECK(v == round15(t.rows[i].value));
    CHECK(std::abs(v - t.rows[i].value) <= 1e-14 * std::max(1.0, std::abs(t.rows[i].value)));
  }
  CHECK(parse_config(j.at("config")).seed == c.seed);
  std::filesystem::remove(c.csv_out);
  std::filesystem::remove(c.json_out);

  std::ostringstream os;
  write_csv_row(os, {"a,b", "say \"hi\"", "plain"});
  CHECK(os.str() == "\"a,b\",\"say \"\"hi\"\"\",plain\r\n");
  CHECK(format_number(1.0 / 3.0) == "0.333333333333333");
  CHECK(format_number(std::numeric_limits<double>::infinity()) == "inf");
}

TEST_CASE("path window follows the exit bound heuristic", "[experiments]") {
  const double L = path_half_width(0.5, 2.0);
  CHECK(L > 0.0);
  CHECK(L <= 8.0);
  CHECK(path_half_width(0.5, 2.0, 1e-3, 1e6) >= L);
  // A larger horizon needs a wider window.
  CHECK(path_half_width(0.5, 0.001, 0.5, 1e6) <= path_half_width(0.5, 1.0, 0.5, 1e6));
  CHECK_THAT(median_max_atom(0.5, 1.0), WithinAbs(std::pow(1.0 / std::log(2.0), 2.0), 1e-12));
}
