#pragma once

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "trapnet/dynamics.hpp"
#include "trapnet/ensembles.hpp"
#include "trapnet/error.hpp"
#include "trapnet/experiments.hpp"
#include "trapnet/io.hpp"
#include "trapnet/measure_metrics.hpp"
#include "trapnet/network.hpp"
#include "trapnet/trap.hpp"
#include "trapnet/validate.hpp"

namespace trapnet {

namespace detail {

/// Signals a usage problem detected after parsing (exit code 2).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void emit(std::ostream& out, const std::string& path, const std::string& text) {
  if (path.empty() || path == "-")
    out << text;
  else
    write_text_file(path, text);
}

struct TrapOptions {
  std::string traps_path;
  double alpha = 0.5;
  std::optional<std::uint64_t> seed;
  double a = 0.0, b = 0.0;
};

inline void add_trap_options(CLI::App* cmd, TrapOptions& o) {
  cmd->add_option("--traps", o.traps_path, "trap JSON file (otherwise traps are sampled)");
  cmd->add_option("--alpha", o.alpha, "Pareto index in (0,1)");
  cmd->add_option("--seed", o.seed, "random seed");
  cmd->add_option("--a", o.a, "space scale a_n (enables rescaled time)");
  cmd->add_option("--b", o.b, "mass scale b_n (enables rescaled time)");
}

struct LoadedTraps {
  std::vector<double> nu;
  Scale scale;
  bool scaled = false;
};

inline LoadedTraps load_traps(const ElectricalNetwork& net, const TrapOptions& o) {
  LoadedTraps out;
  const TrapLaw law{o.alpha, 1.0};
  if (!o.traps_path.empty()) {
    const auto t = trap_from_json(read_json_file(o.traps_path));
    out.nu = trap_weights_for(net, t);
    out.scale = t.scale;
    out.scaled = true;
  } else {
    if (!o.seed) throw UsageError("--seed is required when traps are sampled");
    if (!(o.alpha > 0.0 && o.alpha < 1.0)) throw UsageError("--alpha must lie in (0,1)");
    out.nu = sample_trap(net, law, RngStream(*o.seed, 0));
  }
  if (o.a > 0.0 || o.b > 0.0) {
    out.scale = make_scale(law, o.a > 0.0 ? o.a : 1.0, o.b > 0.0 ? o.b : 1.0);
    out.scaled = true;
  }
  return out;
}

inline std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("not a number list: '" + s + "'");
    }
  }
  if (out.empty()) throw UsageError("empty number list");
  return out;
}

}  // namespace detail

/// Runs the command line; returns 0 on success, 1 on a validation failure
/// or a library error, 2 on a usage error.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bouchaud trap models on electrical networks"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  // generate
  auto* gen = app.add_subcommand("generate", "write an ensemble network as JSON");
  std::string g_ensemble = "sierpinski", g_out;
  int g_level = 1;
  std::optional<std::uint64_t> g_seed;
  double g_c = 0.5, g_cp = 2.0, g_lambda = 0.0;
  gen->add_option("--ensemble", g_ensemble, "sierpinski | conductance_path | cayley_tree | er_critical")->required();
  gen->add_option("--level,--size,-n", g_level, "gasket/path level, tree size or ER vertex count");
  gen->add_option("--seed", g_seed, "random seed (required for random ensembles)");
  gen->add_option("--c", g_c, "lower conductance bound");
  gen->add_option("--c-prime", g_cp, "upper conductance bound");
  gen->add_option("--lambda", g_lambda, "critical window parameter");
  gen->add_option("--out", g_out, "output path (default stdout)");

  // resistance
  auto* res = app.add_subcommand("resistance", "effective resistances");
  std::string r_net;
  std::optional<VertexId> r_from, r_to, r_center;
  double r_radius = 0.0;
  res->add_option("--net", r_net, "network JSON")->required();
  res->add_option("--from", r_from, "first vertex id");
  res->add_option("--to", r_to, "second vertex id");
  res->add_option("--boundary", r_center, "centre for R(x, B(x,r)^c)");
  res->add_option("--radius", r_radius, "ball radius");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Gillespie path of the trap model as CSV");
  std::string s_net, s_out;
  detail::TrapOptions s_traps;
  double s_horizon = 1.0;
  std::optional<VertexId> s_start;
  sim->add_option("--net", s_net, "network JSON")->required();
  detail::add_trap_options(sim, s_traps);
  sim->add_option("--horizon", s_horizon, "time horizon");
  sim->add_option("--start", s_start, "start vertex id (default root)");
  sim->add_option("--out", s_out, "output CSV (default stdout)");

  // aging / subaging
  std::string a_net, a_out, a_s = "1", a_t = "2";
  detail::TrapOptions a_traps;
  auto* age = app.add_subcommand("aging", "aging function surface as CSV");
  auto* sub = app.add_subcommand("subaging", "sub-aging function surface as CSV");
  for (auto* cmd : {age, sub}) {
    cmd->add_option("--net", a_net, "network JSON")->required();
    detail::add_trap_options(cmd, a_traps);
    cmd->add_option("--s", a_s, "comma-separated s values");
    cmd->add_option("--t", a_t, "comma-separated t values");
    cmd->add_option("--out", a_out, "output CSV (default stdout)");
  }

  // traps
  auto* trp = app.add_subcommand("traps", "sample a trap environment as JSON");
  std::string t_net, t_out, t_ensemble;
  detail::TrapOptions t_traps;
  int t_level = -1;
  trp->add_option("--net", t_net, "network JSON")->required();
  detail::add_trap_options(trp, t_traps);
  trp->add_option("--ensemble", t_ensemble, "use the default scale of this ensemble");
  trp->add_option("--level", t_level, "ensemble level for the default scale");
  trp->add_option("--out", t_out, "output path (default stdout)");

  // metrics
  auto* met = app.add_subcommand("metrics", "distances between two measures on a network");
  std::string m_net, m_mu, m_nu;
  met->add_option("--net", m_net, "network JSON (resistance carrier)")->required();
  met->add_option("--mu", m_mu, "first measure JSON")->required();
  met->add_option("--nu", m_nu, "second measure JSON")->required();

  // experiment
  auto* exp = app.add_subcommand("experiment", "run a JSON experiment config");
  std::string e_config, e_csv, e_json;
  exp->add_option("--config", e_config, "config JSON")->required();
  exp->add_option("--csv", e_csv, "override CSV output path");
  exp->add_option("--json", e_json, "override JSON output path");

  // validate
  auto* val = app.add_subcommand("validate", "run the invariant suite");
  std::string v_net;
  std::uint64_t v_seed = 20240101;
  val->add_option("--net", v_net, "also check this network");
  val->add_option("--seed", v_seed, "seed of the random inputs");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) {
      const auto kind = parse_ensemble(g_ensemble);
      json j;
      if (kind == EnsembleKind::Sierpinski) {
        const auto g = sierpinski(g_level);
        j = network_to_json(g.network);
        j["coords"] = pointset_to_json(g.coords);
      } else {
        if (!g_seed) throw detail::UsageError("--seed is required for random ensembles");
        RngStream rng(*g_seed, 0);
        if (kind == EnsembleKind::ConductancePath) {
          j = network_to_json(conductance_path(g_level, ConductanceLaw{g_c, g_cp}, rng));
        } else if (kind == EnsembleKind::CayleyTree) {
          const auto t = as_plane_tree(uniform_cayley_tree(g_level, rng));
          j = network_to_json(t.network());
          j["tree"] = tree_to_json(t);
        } else {
          const auto c = er_largest_component(g_level, g_lambda, rng);
          j = network_to_json(c.network);
          j["surplus"] = c.surplus;
        }
      }
      j["ensemble"] = to_string(kind);
      j["level"] = g_level;
      detail::emit(out, g_out, j.dump(2) + "\n");
      return 0;
    }

    if (*res) {
      const auto net = network_from_json(read_json_file(r_net));
      std::ostringstream os;
      if (r_center) {
        if (!(r_radius > 0.0)) throw detail::UsageError("--radius must be positive");
        write_csv_row(os, {"x", "radius", "boundary_resistance"});
        write_csv_row(os, {std::to_string(*r_center), format_number(r_radius), format_number(boundary_resistance(net, *r_center, r_radius))});
      } else if (r_from || r_to) {
        if (!r_from || !r_to) throw detail::UsageError("--from and --to go together");
        write_csv_row(os, {"x", "y", "resistance"});
        write_csv_row(os, {std::to_string(*r_from), std::to_string(*r_to), format_number(effective_resistance(net, *r_from, *r_to))});
      } else {
        const auto R = all_pairs_resistance(net);
        write_csv_row(os, {"x", "y", "resistance"});
        for (std::size_t x = 0; x < net.size(); ++x)
          for (std::size_t y = x + 1; y < net.size(); ++y)
            write_csv_row(os, {std::to_string(net.id(x)), std::to_string(net.id(y)),
                               format_number(R(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)))});
      }
      out << os.str();
      return 0;
    }

    if (*sim) {
      const auto net = network_from_json(read_json_file(s_net));
      if (!s_traps.seed) throw detail::UsageError("--seed is required for simulate");
      const auto traps = detail::load_traps(net, s_traps);
      const Generator G(net, traps.nu);
      RngStream rng(*s_traps.seed, 1);
      const std::size_t start = s_start ? net.index_of(*s_start) : net.root();
      const auto path = simulate_path(G, start, s_horizon, rng);
      std::ostringstream os;
      write_csv_row(os, {"step", "vertex", "time", "holding"});
      double clock = 0.0;
      for (std::size_t k = 0; k < path.steps.size(); ++k) {
        write_csv_row(os, {std::to_string(k), std::to_string(net.id(path.steps[k].first)), format_number(clock), format_number(path.steps[k].second)});
        clock += path.steps[k].second;
      }
      detail::emit(out, s_out, os.str());
      return 0;
    }

    if (*age || *sub) {
      const bool aging = static_cast<bool>(*age);
      const auto net = network_from_json(read_json_file(a_net));
      const auto traps = detail::load_traps(net, a_traps);
      const auto sg = detail::parse_list(a_s), tg = detail::parse_list(a_t);
      const SpectralKernel K(Generator(net, traps.nu));
      const TimeScale ts = traps.scaled ? TimeScale::scaled(traps.scale) : TimeScale::raw();
      const auto surf = scaled_surface(K, net, net.root(), sg, tg, aging ? SurfaceMode::Aging : SurfaceMode::Subaging, ts);
      std::ostringstream os;
      write_csv_row(os, {"s", "t", "value"});
      for (const auto& p : surf.points) write_csv_row(os, {format_number(p.s), format_number(p.t), format_number(p.value)});
      detail::emit(out, a_out, os.str());
      return 0;
    }

    if (*trp) {
      const auto net = network_from_json(read_json_file(t_net));
      if (!t_traps.seed) throw detail::UsageError("--seed is required for traps");
      if (!t_traps.traps_path.empty()) throw detail::UsageError("traps samples a new environment; --traps is not accepted");
      const TrapLaw law{t_traps.alpha, 1.0};
      auto loaded = detail::load_traps(net, t_traps);
      if (!t_ensemble.empty()) {
        if (t_level < 0) throw detail::UsageError("--ensemble needs --level");
        loaded.scale = default_scale(parse_ensemble(t_ensemble), t_level, law);
      } else if (!loaded.scaled) {
        loaded.scale = make_scale(law, 1.0, 1.0);
      }
      const auto j = trap_to_json(net, loaded.nu, loaded.scale, law.alpha, *t_traps.seed, t_net);
      detail::emit(out, t_out, j.dump(2) + "\n");
      return 0;
    }

    if (*met) {
      const auto net = network_from_json(read_json_file(m_net));
      const auto S = resistance_space(net);
      const auto mu = measure_from_json(read_json_file(m_mu), S);
      const auto nu = measure_from_json(read_json_file(m_nu), S);
      std::ostringstream os;
      write_csv_row(os, {"metric", "value"});
      write_csv_row(os, {"prohorov", format_number(prohorov(mu, nu))});
      write_csv_row(os, {"vague", format_number(vague_distance(mu, nu))});
      write_csv_row(os, {"dis_measure", format_number(dis_measure_distance(mu, nu))});
      out << os.str();
      return 0;
    }

    if (*exp) {
      auto config = parse_config(read_json_file(e_config));
      if (!e_csv.empty()) config.csv_out = e_csv;
      if (!e_json.empty()) config.json_out = e_json;
      const auto table = run_experiment(config);
      if (config.csv_out.empty() && config.json_out.empty()) write_csv(out, table);
      for (const auto& n : table.notes) err << "note: " << n << "\n";
      return 0;
    }

    if (*val) {
      std::unique_ptr<ElectricalNetwork> extra;
      if (!v_net.empty()) extra = std::make_unique<ElectricalNetwork>(network_from_json(read_json_file(v_net)));
      const auto results = run_invariant_suite(v_seed, extra.get());
      bool ok = true;
      for (const auto& r : results) {
        out << (r.pass ? "PASS " : "FAIL ") << r.name << " (" << r.detail << ")\n";
        ok = ok && r.pass;
      }
      return ok ? 0 : 1;
    }
  } catch (const detail::UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return e.code() == Errc::InvalidConfig || e.code() == Errc::ParseError ? 2 : 1;
  }
  return 2;
}

}  // namespace trapnet
