#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "trapnet/dynamics.hpp"
#include "trapnet/ensembles.hpp"
#include "trapnet/error.hpp"
#include "trapnet/io.hpp"
#include "trapnet/measure_metrics.hpp"
#include "trapnet/metric_space.hpp"
#include "trapnet/network.hpp"
#include "trapnet/rng.hpp"
#include "trapnet/stats.hpp"
#include "trapnet/trap.hpp"

namespace trapnet {

enum class Coupling { Prm, Location, Independent };

inline Coupling parse_coupling(const std::string& s) {
  if (s == "prm") return Coupling::Prm;
  if (s == "location") return Coupling::Location;
  if (s == "independent") return Coupling::Independent;
  fail(Errc::InvalidConfig, "unknown coupling '" + s + "'");
}

inline const char* to_string(Coupling c) {
  switch (c) {
    case Coupling::Prm: return "prm";
    case Coupling::Location: return "location";
    case Coupling::Independent: return "independent";
  }
  return "unknown";
}

/// A test set A x (u, inf) for trap point processes. A is either the scaled
/// resistance ball {a_n^{-1} R(rho, x) < radius} or a coordinate rectangle.
struct BoxSpec {
  enum class Shape { Ball, Rect };
  Shape shape = Shape::Ball;
  double radius = 1.0;
  std::array<double, 2> x{0.0, 0.0};
  std::array<double, 2> y{0.0, 0.0};
  double u = 1.0;
};

/// Twenty balls: five radii times four trap levels.
inline std::vector<BoxSpec> default_boxes() {
  std::vector<BoxSpec> out;
  for (double r : {0.05, 0.1, 0.2, 0.4, 1.0})
    for (double u : {0.25, 0.5, 1.0, 2.0}) out.push_back({BoxSpec::Shape::Ball, r, {}, {}, u});
  return out;
}

struct EnsembleSpec {
  EnsembleKind kind = EnsembleKind::Sierpinski;
  std::vector<int> sizes{1};
  ConductanceLaw conductance{};
  double lambda = 0.0;
  double path_half_length = 0.0;  // scaled; 0 selects the exit-bound heuristic
  std::int64_t path_max_half = 256;
};

struct ExperimentConfig {
  std::string kind = "aging";  // aging | subaging | traps | metrics
  EnsembleSpec ensemble;
  double alpha = 0.5;
  std::vector<double> a_override;
  std::vector<double> b_override;
  std::vector<double> s_grid{1.0};
  std::vector<double> t_grid{2.0};
  std::size_t replicas = 1;
  std::uint64_t seed = 0;
  Coupling coupling = Coupling::Prm;
  double v_floor = 1e-8;
  std::size_t bootstrap = 1000;
  double confidence = 0.95;
  std::size_t workers = 0;  // 0 means one per hardware thread
  std::vector<BoxSpec> boxes = default_boxes();
  std::string csv_out;
  std::string json_out;

  TrapLaw law() const { return {alpha, 1.0}; }

  void validate() const {
    if (kind != "aging" && kind != "subaging" && kind != "traps" && kind != "metrics")
      fail(Errc::InvalidConfig, "experiment kind must be aging, subaging, traps or metrics");
    if (ensemble.sizes.empty()) fail(Errc::InvalidConfig, "n-sequence is empty");
    for (std::size_t i = 1; i < ensemble.sizes.size(); ++i)
      if (ensemble.sizes[i] <= ensemble.sizes[i - 1]) fail(Errc::InvalidConfig, "n-sequence must be strictly increasing");
    for (int n : ensemble.sizes)
      if (n < 0) fail(Errc::InvalidConfig, "sizes must be nonnegative");
    if (!(alpha > 0.0 && alpha < 1.0)) fail(Errc::InvalidConfig, "alpha must lie in (0,1)");
    if (replicas < 1) fail(Errc::InvalidConfig, "replicas must be at least 1");
    if (!a_override.empty() && a_override.size() != ensemble.sizes.size()) fail(Errc::InvalidConfig, "scale.a must match sizes");
    if (!b_override.empty() && b_override.size() != ensemble.sizes.size()) fail(Errc::InvalidConfig, "scale.b must match sizes");
    if (!(v_floor > 0.0)) fail(Errc::InvalidConfig, "v_floor must be positive");
    if (!(confidence > 0.0 && confidence < 1.0)) fail(Errc::InvalidConfig, "confidence must lie in (0,1)");
    if (bootstrap < 1) fail(Errc::InvalidConfig, "bootstrap must be at least 1");
    if (s_grid.empty() || t_grid.empty()) fail(Errc::InvalidConfig, "empty time grid");
    for (double s : s_grid)
      if (!(s >= 0.0) || !std::isfinite(s)) fail(Errc::InvalidConfig, "s grid must be nonnegative");
    for (double t : t_grid)
      if (!(t > 0.0) || !std::isfinite(t)) fail(Errc::InvalidConfig, "t grid must be positive");
    for (const auto& b : boxes)
      if (!(b.u > 0.0) || (b.shape == BoxSpec::Shape::Ball && !(b.radius > 0.0))) fail(Errc::InvalidConfig, "boxes need u > 0 and radius > 0");
    if (ensemble.path_max_half < 1) fail(Errc::InvalidConfig, "path_max_half must be positive");
  }
};

namespace detail {

template <class T>
T config_value(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(Errc::InvalidConfig, std::string(key) + ": " + e.what());
  }
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) fail(Errc::InvalidConfig, "config must be a JSON object");
  ExperimentConfig c;
  c.kind = detail::config_value<std::string>(j, "kind", c.kind);
  if (!j.contains("ensemble")) fail(Errc::InvalidConfig, "missing ensemble");
  const auto& e = j.at("ensemble");
  c.ensemble.kind = parse_ensemble(detail::config_value<std::string>(e, "kind", "sierpinski"));
  c.ensemble.sizes = detail::config_value<std::vector<int>>(e, "sizes", c.ensemble.sizes);
  if (e.contains("params")) {
    const auto& p = e.at("params");
    c.ensemble.conductance.c = detail::config_value<double>(p, "c", c.ensemble.conductance.c);
    c.ensemble.conductance.c_prime = detail::config_value<double>(p, "c_prime", c.ensemble.conductance.c_prime);
    c.ensemble.lambda = detail::config_value<double>(p, "lambda", c.ensemble.lambda);
    c.ensemble.path_half_length = detail::config_value<double>(p, "half_length", c.ensemble.path_half_length);
    c.ensemble.path_max_half = detail::config_value<std::int64_t>(p, "max_half", c.ensemble.path_max_half);
  }
  c.alpha = detail::config_value<double>(j, "alpha", c.alpha);
  if (j.contains("scale")) {
    c.a_override = detail::config_value<std::vector<double>>(j.at("scale"), "a", {});
    c.b_override = detail::config_value<std::vector<double>>(j.at("scale"), "b", {});
  }
  if (j.contains("grid")) {
    c.s_grid = detail::config_value<std::vector<double>>(j.at("grid"), "s", c.s_grid);
    c.t_grid = detail::config_value<std::vector<double>>(j.at("grid"), "t", c.t_grid);
  }
  const auto replicas = detail::config_value<long long>(j, "replicas", 1);
  if (replicas < 1) fail(Errc::InvalidConfig, "replicas must be at least 1");
  c.replicas = static_cast<std::size_t>(replicas);
  if (!j.contains("seed")) fail(Errc::InvalidConfig, "missing seed");
  c.seed = detail::config_value<std::uint64_t>(j, "seed", 0);
  c.coupling = parse_coupling(detail::config_value<std::string>(j, "coupling", "prm"));
  c.v_floor = detail::config_value<double>(j, "v_floor", c.v_floor);
  c.bootstrap = detail::config_value<std::size_t>(j, "bootstrap", c.bootstrap);
  c.confidence = detail::config_value<double>(j, "confidence", c.confidence);
  c.workers = detail::config_value<std::size_t>(j, "workers", c.workers);
  if (j.contains("boxes")) {
    c.boxes.clear();
    for (const auto& b : j.at("boxes")) {
      BoxSpec box;
      box.u = detail::config_value<double>(b, "u", 1.0);
      if (b.contains("radius")) {
        box.radius = b.at("radius").get<double>();
      } else {
        box.shape = BoxSpec::Shape::Rect;
        box.x = detail::config_value<std::array<double, 2>>(b, "x", {-1e300, 1e300});
        box.y = detail::config_value<std::array<double, 2>>(b, "y", {-1e300, 1e300});
      }
      c.boxes.push_back(box);
    }
  }
  if (j.contains("output")) {
    c.csv_out = detail::config_value<std::string>(j.at("output"), "csv", "");
    c.json_out = detail::config_value<std::string>(j.at("output"), "json", "");
  }
  c.validate();
  return c;
}

inline json config_to_json(const ExperimentConfig& c) {
  json boxes = json::array();
  for (const auto& b : c.boxes) {
    if (b.shape == BoxSpec::Shape::Ball)
      boxes.push_back({{"radius", b.radius}, {"u", b.u}});
    else
      boxes.push_back({{"x", b.x}, {"y", b.y}, {"u", b.u}});
  }
  json j{{"kind", c.kind},
         {"ensemble",
          {{"kind", to_string(c.ensemble.kind)},
           {"sizes", c.ensemble.sizes},
           {"params",
            {{"c", c.ensemble.conductance.c},
             {"c_prime", c.ensemble.conductance.c_prime},
             {"lambda", c.ensemble.lambda},
             {"half_length", c.ensemble.path_half_length},
             {"max_half", c.ensemble.path_max_half}}}}},
         {"alpha", c.alpha},
         {"grid", {{"s", c.s_grid}, {"t", c.t_grid}}},
         {"replicas", c.replicas},
         {"seed", c.seed},
         {"coupling", to_string(c.coupling)},
         {"v_floor", c.v_floor},
         {"bootstrap", c.bootstrap},
         {"confidence", c.confidence},
         {"boxes", boxes}};
  if (!c.a_override.empty() || !c.b_override.empty()) j["scale"] = {{"a", c.a_override}, {"b", c.b_override}};
  return j;
}

// ------------------------------------------------------------------ tables

struct ResultRow {
  int n = 0;
  long long replica = -1;  // -1 for aggregates; the box index in trap tables
  double s = 0.0;
  double t = 0.0;
  std::string statistic;
  double value = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct ResultTable {
  std::vector<ResultRow> rows;
  std::vector<std::string> notes;

  void add(int n, long long replica, double s, double t, std::string stat, double value) {
    rows.push_back({n, replica, s, t, std::move(stat), value, value, value});
  }
  void add(int n, long long replica, double s, double t, std::string stat, double value, double lo, double hi) {
    rows.push_back({n, replica, s, t, std::move(stat), value, std::min(lo, value), std::max(hi, value)});
  }

  std::vector<const ResultRow*> select(const std::string& stat) const {
    std::vector<const ResultRow*> out;
    for (const auto& r : rows)
      if (r.statistic == stat) out.push_back(&r);
    return out;
  }
};

inline void write_csv(std::ostream& os, const ResultTable& table) {
  write_csv_row(os, {"n", "replica", "s", "t", "statistic", "value", "ci_low", "ci_high"});
  for (const auto& r : table.rows)
    write_csv_row(os, {std::to_string(r.n), std::to_string(r.replica), format_number(r.s), format_number(r.t), r.statistic, format_number(r.value),
                       format_number(r.ci_low), format_number(r.ci_high)});
}

/// Value rounded to 15 significant digits, so that the shortest round-trip
/// form emitted by the JSON writer carries at most 15 digits.
inline double round15(double v) {
  if (!std::isfinite(v)) return v;
  return std::stod(format_number(v, 15));
}

inline json table_to_json(const ResultTable& table) {
  json rows = json::array();
  for (const auto& r : table.rows)
    rows.push_back({{"n", r.n},
                    {"replica", r.replica},
                    {"s", round15(r.s)},
                    {"t", round15(r.t)},
                    {"statistic", r.statistic},
                    {"value", round15(r.value)},
                    {"ci_low", round15(r.ci_low)},
                    {"ci_high", round15(r.ci_high)}});
  return {{"rows", rows}, {"notes", table.notes}};
}

inline void write_outputs(const ExperimentConfig& c, const ResultTable& table) {
  if (!c.csv_out.empty()) {
    std::ostringstream os;
    write_csv(os, table);
    write_text_file(c.csv_out, os.str());
  }
  if (!c.json_out.empty()) {
    json j = table_to_json(table);
    j["config"] = config_to_json(c);
    write_text_file(c.json_out, j.dump(2) + "\n");
  }
}

// ------------------------------------------------------------- scheduling

namespace detail {

/// Runs fn(0..count-1) on a worker pool; the first exception is rethrown.
template <class Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
  if (workers == 0) workers = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  workers = std::min(workers, count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  std::mutex error_mutex;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      while (!failed) {
        const std::size_t i = next++;
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          failed = true;
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

enum StreamTag : std::uint64_t { kGraphStream = 1, kTrapStream = 2, kPrmStream = 3, kFallbackStream = 4 };

inline constexpr std::uint64_t kBootstrapStream = 0xB007ULL << 32;
inline constexpr std::uint64_t kBoxStream = 0xB0C5ULL << 32;

}  // namespace detail

// -------------------------------------------------------------- instances

/// Median of the largest limiting-PRM atom over an interval of length w:
/// solves exp(-w v^{-alpha}) = 1/2.
inline double median_max_atom(double alpha, double w) { return std::pow(w / std::log(2.0), 1.0 / alpha); }

/// Scaled half-length L of the path window. With R(0, B^c) = L/2 and the
/// median trap mass near the origin, L is the smallest value for which the
/// exit-time bound over [0, T] drops below `target`. Returns cap when even
/// the cap does not certify; callers report the certified value separately.
inline double path_half_width(double alpha, double T, double target = 1e-3, double cap = 8.0) {
  auto bound = [&](double L) {
    double best = std::numeric_limits<double>::infinity();
    for (int k = 1; k < 400; ++k) {
      const double delta = 0.5 * L * k / 400.0;
      const double m = median_max_atom(alpha, 2.0 * delta);
      best = std::min(best, 8.0 * delta / L + 4.0 * T / (m * (0.5 * L - delta)));
    }
    return best;
  };
  if (bound(cap) > target) return cap;
  double lo = 0.0, hi = cap;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (bound(mid) <= target ? hi : lo) = mid;
  }
  return hi;
}

/// Smallest exit-time bound P_0(tau_B <= T) over delta for the realized path
/// network, with B the open resistance ball reaching the nearer endpoint.
inline double path_exit_certificate(const ElectricalNetwork& path, const std::vector<double>& nu, double T) {
  const std::size_t n = path.size();
  if (n < 3) return 1.0;
  ResistanceSolver solver(path);
  const std::size_t root = path.root();
  std::vector<double> r(n);
  for (std::size_t x = 0; x < n; ++x) r[x] = solver(root, x);
  const double reach = std::min(r.front(), r.back());
  std::vector<char> inA(n, 0), inB(n, 0);
  inA[root] = 1;
  for (std::size_t x = 0; x < n; ++x) inB[x] = r[x] >= reach;
  const double Rb = resistance_between_masks(path, inA, inB);
  std::vector<double> radii(r);
  std::sort(radii.begin(), radii.end());
  double best = 1.0;
  for (std::size_t k = 1; k < radii.size(); ++k) {
    const double delta = radii[k];
    if (!(delta < Rb)) break;
    double mass = 0.0;
    for (std::size_t x = 0; x < n; ++x)
      if (r[x] < delta) mass += nu[x];
    best = std::min(best, 4.0 * delta / Rb + 4.0 * T / (mass * (Rb - delta)));
  }
  return best;
}

/// One realized (network, trap, scale) at a level, with plane coordinates
/// when the ensemble has a common embedding.
struct Instance {
  int n = 0;
  std::shared_ptr<const ElectricalNetwork> network;
  std::vector<double> nu;
  Scale scale;
  std::vector<std::array<double, 2>> coords;
  std::vector<std::string> notes;

  bool embedded() const noexcept { return !coords.empty(); }
};

/// Builds instances for every level and replica of a config. Deterministic
/// networks are shared across replicas.
class InstanceFactory {
 public:
  explicit InstanceFactory(const ExperimentConfig& config) : c_(config) {
    c_.validate();
    if (c_.ensemble.kind == EnsembleKind::Sierpinski)
      for (int n : c_.ensemble.sizes) gaskets_.emplace(n, std::make_shared<SierpinskiGasket>(sierpinski(n)));
    if (c_.ensemble.kind == EnsembleKind::ConductancePath) {
      c_.ensemble.conductance.half_width();
      half_length_ = c_.ensemble.path_half_length > 0.0 ? c_.ensemble.path_half_length : path_half_width(c_.alpha, horizon());
    }
  }

  const ExperimentConfig& config() const noexcept { return c_; }
  double path_half_length() const noexcept { return half_length_; }

  /// Largest scaled time any two-point function looks at.
  double horizon() const {
    const double t = *std::max_element(c_.t_grid.begin(), c_.t_grid.end());
    const double s = *std::max_element(c_.s_grid.begin(), c_.s_grid.end());
    return std::max(s, t);
  }

  Scale scale_at(std::size_t level) const {
    const int n = c_.ensemble.sizes[level];
    auto [a, b] = default_scale_ab(c_.ensemble.kind, n);
    if (!c_.a_override.empty()) a = c_.a_override[level];
    if (!c_.b_override.empty()) b = c_.b_override[level];
    return make_scale(c_.law(), a, b);
  }

  Instance make(std::size_t level, std::size_t replica) const { return make_at(c_.ensemble.sizes[level], scale_at(level), replica); }

  Instance make_at(int n, const Scale& scale, std::size_t replica) const {
    const TrapLaw law = c_.law();
    const RngStream base(c_.seed, replica);
    Instance out;
    out.n = n;
    out.scale = scale;
    bool prm_done = false;
    switch (c_.ensemble.kind) {
      case EnsembleKind::Sierpinski: {
        auto it = gaskets_.find(n);
        std::shared_ptr<SierpinskiGasket> g = it != gaskets_.end() ? it->second : std::make_shared<SierpinskiGasket>(sierpinski(n));
        out.network = std::shared_ptr<const ElectricalNetwork>(g, &g->network);
        out.coords = g->coords;
        if (c_.coupling == Coupling::Prm) {
          auto prm_rng = base.substream(detail::kPrmStream);
          const auto prm = sample_gasket_prm(c_.alpha, c_.v_floor, prm_rng);
          out.nu = gasket_coupled_traps(*g, prm, law, base.substream(detail::kFallbackStream));
          prm_done = true;
        }
        break;
      }
      case EnsembleKind::ConductancePath: {
        const double h = std::ldexp(1.0, -n);
        auto N = static_cast<std::int64_t>(std::ceil(half_length_ / h));
        if (N > c_.ensemble.path_max_half) {
          out.notes.push_back("path window capped at " + std::to_string(c_.ensemble.path_max_half) + " vertices per side at n=" + std::to_string(n));
          N = c_.ensemble.path_max_half;
        }
        N = std::max<std::int64_t>(N, 1);
        auto net = std::make_shared<ElectricalNetwork>(conductance_path(N, c_.ensemble.conductance, base.substream(detail::kGraphStream)));
        for (std::size_t v = 0; v < net->size(); ++v) out.coords.push_back({static_cast<double>(net->id(v)) * h, 0.0});
        out.network = net;
        if (c_.coupling == Coupling::Prm) {
          auto prm_rng = base.substream(detail::kPrmStream);
          const auto prm = sample_line_prm(c_.alpha, c_.v_floor, half_length_, prm_rng);
          out.nu = line_coupled_traps(*net, n, prm, law, base.substream(detail::kFallbackStream));
          prm_done = true;
        }
        break;
      }
      case EnsembleKind::CayleyTree: {
        if (n < 1) fail(Errc::InvalidConfig, "tree size must be at least 1");
        auto rng = base.substream(detail::kGraphStream).substream(static_cast<std::uint64_t>(n));
        out.network = std::make_shared<ElectricalNetwork>(as_plane_tree(uniform_cayley_tree(n, rng)).network());
        break;
      }
      case EnsembleKind::ErCritical: {
        auto rng = base.substream(detail::kGraphStream).substream(static_cast<std::uint64_t>(n));
        out.network = std::make_shared<ElectricalNetwork>(er_largest_component(n, c_.ensemble.lambda, rng).network);
        break;
      }
    }
    if (!prm_done) {
      if (c_.coupling == Coupling::Prm) out.notes.push_back("no common embedding; prm coupling falls back to location coupling");
      auto trap_rng = base.substream(detail::kTrapStream);
      if (c_.coupling == Coupling::Independent) trap_rng = trap_rng.substream(static_cast<std::uint64_t>(n) + 1);
      out.nu = sample_trap(*out.network, law, trap_rng);
    }
    return out;
  }

 private:
  ExperimentConfig c_;
  std::map<int, std::shared_ptr<SierpinskiGasket>> gaskets_;
  double half_length_ = 0.0;
};

// ------------------------------------------------- aging and sub-aging runs

namespace detail {

inline void add_unique_notes(ResultTable& table, const std::vector<std::string>& notes) {
  for (const auto& n : notes)
    if (std::find(table.notes.begin(), table.notes.end(), n) == table.notes.end()) table.notes.push_back(n);
}

/// |mean| interval from an interval for the mean.
inline std::pair<double, double> abs_interval(std::pair<double, double> ci) {
  const double lo = ci.first, hi = ci.second;
  if (lo >= 0.0) return {lo, hi};
  if (hi <= 0.0) return {-hi, -lo};
  return {0.0, std::max(-lo, hi)};
}

struct TwoPointValues {
  bool ok = false;
  std::vector<double> phi;  // row-major over (s, t)
  std::vector<double> psi;
  double exit_bound = -1.0;
  std::vector<std::string> notes;
};

inline void summarize(ResultTable& table, const ExperimentConfig& c, const std::string& stat, const std::vector<std::vector<TwoPointValues>>& vals,
                      bool use_phi) {
  const std::size_t levels = c.ensemble.sizes.size();
  const std::size_t G = c.s_grid.size() * c.t_grid.size();
  for (std::size_t l = 0; l < levels; ++l) {
    const int n = c.ensemble.sizes[l];
    for (std::size_t g = 0; g < G; ++g) {
      const double s = c.s_grid[g / c.t_grid.size()], t = c.t_grid[g % c.t_grid.size()];
      std::vector<double> v;
      for (std::size_t r = 0; r < c.replicas; ++r)
        if (vals[l][r].ok) v.push_back((use_phi ? vals[l][r].phi : vals[l][r].psi)[g]);
      if (c.replicas >= 2 && !v.empty()) {
        const auto ci = bootstrap_mean_interval(v, RngStream(c.seed, kBootstrapStream + 2 * (l * G + g) + (use_phi ? 0 : 1)), c.bootstrap, c.confidence);
        table.add(n, -1, s, t, stat + "_mean", mean(v), ci.first, ci.second);
      }
      if (l == 0 || c.replicas < 2) continue;
      std::vector<double> cur, prev;
      for (std::size_t r = 0; r < c.replicas; ++r) {
        if (!vals[l][r].ok || !vals[l - 1][r].ok) continue;
        cur.push_back((use_phi ? vals[l][r].phi : vals[l][r].psi)[g]);
        prev.push_back((use_phi ? vals[l - 1][r].phi : vals[l - 1][r].psi)[g]);
      }
      if (cur.empty()) continue;
      const auto ci = bootstrap_mean_interval(cur, RngStream(c.seed, kBootstrapStream + (1ULL << 31) + 2 * (l * G + g) + (use_phi ? 0 : 1)),
                                              c.bootstrap, c.confidence, &prev);
      double d = 0.0;
      for (std::size_t k = 0; k < cur.size(); ++k) d += cur[k] - prev[k];
      d /= static_cast<double>(cur.size());
      const auto aci = abs_interval(ci);
      table.add(n, -1, s, t, stat + "_diff", std::abs(d), aci.first, aci.second);
    }
  }
}

/// Evaluates Phi~ and/or Psi~ for every level and replica.
inline std::vector<std::vector<TwoPointValues>> two_point_values(const InstanceFactory& factory, bool want_phi, bool want_psi) {
  const auto& c = factory.config();
  const std::size_t levels = c.ensemble.sizes.size();
  std::vector<std::vector<TwoPointValues>> vals(levels, std::vector<TwoPointValues>(c.replicas));
  parallel_for(levels * c.replicas, c.workers, [&](std::size_t job) {
    const std::size_t l = job / c.replicas, r = job % c.replicas;
    auto& out = vals[l][r];
    try {
      const Instance inst = factory.make(l, r);
      out.notes = inst.notes;
      const SpectralKernel K(Generator(*inst.network, inst.nu));
      const TimeScale ts = TimeScale::scaled(inst.scale);
      const std::size_t rho = inst.network->root();
      // At s = 0 the aging function reduces to P_t(rho, rho).
      for (double s : c.s_grid)
        for (double t : c.t_grid) {
          if (want_phi) out.phi.push_back(s > 0.0 ? aging_phi(K, rho, s, t, ts) : std::clamp(K.entry(rho, rho, ts.time_unit * t), 0.0, 1.0));
          if (want_psi) out.psi.push_back(subaging_psi(K, *inst.network, rho, s, t, ts));
        }
      if (c.ensemble.kind == EnsembleKind::ConductancePath)
        out.exit_bound = path_exit_certificate(*inst.network, inst.nu, ts.time_unit * factory.horizon() * 2.0);
      out.ok = true;
    } catch (const Error& e) {
      out = TwoPointValues{};
      out.notes.push_back(std::string("replica ") + std::to_string(r) + " at n=" + std::to_string(c.ensemble.sizes[l]) + " failed: " +
                          to_string(e.code()) + ": " + e.what());
    }
  });
  return vals;
}

/// Rows for one statistic from precomputed values; per-replica rows, then aggregates.
inline ResultTable two_point_table(const ExperimentConfig& c, const std::vector<std::vector<TwoPointValues>>& vals, bool use_phi) {
  ResultTable table;
  const std::string stat = use_phi ? "phi" : "psi";
  const std::size_t levels = c.ensemble.sizes.size();
  for (std::size_t l = 0; l < levels; ++l) {
    const int n = c.ensemble.sizes[l];
    std::size_t failures = 0;
    for (std::size_t r = 0; r < c.replicas; ++r) {
      const auto& v = vals[l][r];
      add_unique_notes(table, v.notes);
      if (!v.ok) {
        ++failures;
        continue;
      }
      std::size_t g = 0;
      for (double s : c.s_grid)
        for (double t : c.t_grid) {
          table.add(n, static_cast<long long>(r), s, t, stat, (use_phi ? v.phi : v.psi)[g]);
          ++g;
        }
      if (v.exit_bound >= 0.0) table.add(n, static_cast<long long>(r), 0.0, 0.0, "path_exit_bound", v.exit_bound);
    }
    if (failures) table.add(n, -1, 0.0, 0.0, "failures", static_cast<double>(failures));
  }
  summarize(table, c, stat, vals, use_phi);
  return table;
}

}  // namespace detail

/// Annealed Phi~ table: per-replica values, means with bootstrap intervals,
/// and successive differences of means (paired bootstrap).
inline ResultTable run_aging_experiment(const ExperimentConfig& config) {
  const InstanceFactory factory(config);
  auto table = detail::two_point_table(factory.config(), detail::two_point_values(factory, true, false), true);
  write_outputs(config, table);
  return table;
}

inline ResultTable run_subaging_experiment(const ExperimentConfig& config) {
  const InstanceFactory factory(config);
  auto table = detail::two_point_table(factory.config(), detail::two_point_values(factory, false, true), false);
  write_outputs(config, table);
  return table;
}

/// Both tables from one pass over the instances.
inline std::pair<ResultTable, ResultTable> run_two_point_experiments(const ExperimentConfig& config) {
  const InstanceFactory factory(config);
  const auto vals = detail::two_point_values(factory, true, true);
  return {detail::two_point_table(factory.config(), vals, true), detail::two_point_table(factory.config(), vals, false)};
}

struct Stabilization {
  std::vector<double> differences;
  bool monotone = false;
  double final_difference = 0.0;
};

/// Successive differences of the `<stat>_mean` rows at (s, t), in level order.
inline Stabilization stabilization(const ResultTable& table, const std::string& stat, double s, double t) {
  Stabilization out;
  std::vector<std::pair<int, double>> means;
  for (const auto* r : table.select(stat + "_mean"))
    if (r->s == s && r->t == t) means.emplace_back(r->n, r->value);
  std::sort(means.begin(), means.end());
  for (std::size_t k = 1; k < means.size(); ++k) out.differences.push_back(std::abs(means[k].second - means[k - 1].second));
  out.monotone = !out.differences.empty();
  for (std::size_t k = 1; k < out.differences.size(); ++k) out.monotone = out.monotone && out.differences[k] < out.differences[k - 1];
  out.final_difference = out.differences.empty() ? 0.0 : out.differences.back();
  return out;
}

// ------------------------------------------------------ trap convergence

namespace detail {

inline std::vector<std::size_t> box_members(const Instance& inst, const Eigen::VectorXd& root_resistance, const BoxSpec& box) {
  std::vector<std::size_t> out;
  for (std::size_t x = 0; x < inst.network->size(); ++x) {
    if (box.shape == BoxSpec::Shape::Ball) {
      if (root_resistance(static_cast<Eigen::Index>(x)) / inst.scale.a < box.radius) out.push_back(x);
    } else {
      if (!inst.embedded()) fail(Errc::NoCommonEmbedding, "rectangle boxes need coordinates");
      const auto& p = inst.coords[x];
      if (p[0] >= box.x[0] && p[0] < box.x[1] && p[1] >= box.y[0] && p[1] < box.y[1]) out.push_back(x);
    }
  }
  return out;
}

inline double binomial_pvalue(std::size_t hits, std::size_t trials, double q, double& stat) {
  stat = 0.0;
  if (!(q > 0.0 && q < 1.0)) return 1.0;
  stat = pearson_statistic({static_cast<double>(hits), static_cast<double>(trials - hits)}, {q, 1.0 - q});
  return chi_square_sf(stat, 1.0);
}

}  // namespace detail

/// Void probabilities and mean atom counts of pi_n over the boxes, against
/// the exact finite-n law and against a PRM sampled with base b_n^{-1} mu^_n.
/// Every box uses its own replicas, so the per-box Pearson statistics are
/// independent and their sum is reported with a pooled p-value.
inline ResultTable run_trap_convergence(const ExperimentConfig& config) {
  const InstanceFactory factory(config);
  const auto& c = factory.config();
  const TrapLaw law = c.law();
  ResultTable table;
  for (std::size_t l = 0; l < c.ensemble.sizes.size(); ++l) {
    const Instance inst = factory.make(l, 0);
    detail::add_unique_notes(table, inst.notes);
    const int n = inst.n;
    const auto& net = *inst.network;
    const ResistanceSolver solver(net);
    Eigen::VectorXd rr(static_cast<Eigen::Index>(net.size()));
    for (std::size_t x = 0; x < net.size(); ++x) rr(static_cast<Eigen::Index>(x)) = solver(net.root(), x);
    double min_u = std::numeric_limits<double>::infinity();
    for (const auto& b : c.boxes) min_u = std::min(min_u, b.u);
    const double prm_floor = std::min(c.v_floor, 0.5 * min_u);

    struct BoxResult {
      std::size_t members = 0;
      std::size_t voids = 0, prm_voids = 0;
      double count_sum = 0.0, count_sq = 0.0;
    };
    std::vector<BoxResult> res(c.boxes.size());
    std::vector<std::vector<std::size_t>> members(c.boxes.size());
    for (std::size_t b = 0; b < c.boxes.size(); ++b) members[b] = detail::box_members(inst, rr, c.boxes[b]);

    detail::parallel_for(c.boxes.size(), c.workers, [&](std::size_t b) {
      const auto& box = c.boxes[b];
      const auto& A = members[b];
      const double cu = inst.scale.c * box.u;
      const RngStream box_rng(c.seed, detail::kBoxStream + l * 4096 + b);
      DiscreteMeasure base;
      for (auto x : A) base.add(x, 1.0 / inst.scale.b);
      auto& out = res[b];
      out.members = A.size();
      for (std::size_t k = 0; k < c.replicas; ++k) {
        const RngStream rep = box_rng.substream(2 * k);
        std::size_t over = 0;
        for (auto x : A) {
          auto sub = rep.substream(static_cast<std::uint64_t>(net.id(x)));
          over += pareto_sample(law, sub) > cu;
        }
        out.voids += over == 0;
        out.count_sum += static_cast<double>(over);
        out.count_sq += static_cast<double>(over) * static_cast<double>(over);
        auto prm_rng = box_rng.substream(2 * k + 1);
        const auto pi = truncated_prm(base, c.alpha, prm_floor, prm_rng);
        bool prm_void = true;
        for (const auto& a : pi.atoms()) prm_void = prm_void && !(a.weight > box.u);
        out.prm_voids += prm_void;
      }
    });

    double stat_sum = 0.0, prm_stat_sum = 0.0;
    int dof = 0, prm_dof = 0;
    const double R = static_cast<double>(c.replicas);
    for (std::size_t b = 0; b < c.boxes.size(); ++b) {
      const auto& box = c.boxes[b];
      const auto& o = res[b];
      const double s = box.shape == BoxSpec::Shape::Ball ? box.radius : 0.0;
      const long long idx = static_cast<long long>(b);
      const double tail = pareto_tail(law, inst.scale.c * box.u);
      const double m = static_cast<double>(o.members);
      const double q = std::pow(1.0 - tail, m);
      const double mu_A = m / inst.scale.b;
      const double q_prm = std::exp(-mu_A * std::pow(box.u, -c.alpha));
      const auto ci = wilson_interval(o.voids, c.replicas, 0.99);
      const auto ci_prm = wilson_interval(o.prm_voids, c.replicas, 0.99);
      double st = 0.0, st_prm = 0.0;
      const double p = detail::binomial_pvalue(o.voids, c.replicas, q, st);
      const double p_prm = detail::binomial_pvalue(o.prm_voids, c.replicas, q_prm, st_prm);
      if (q > 0.0 && q < 1.0) stat_sum += st, ++dof;
      if (q_prm > 0.0 && q_prm < 1.0) prm_stat_sum += st_prm, ++prm_dof;
      table.add(n, idx, s, box.u, "box_mass", mu_A);
      table.add(n, idx, s, box.u, "void_empirical", static_cast<double>(o.voids) / R, ci.first, ci.second);
      table.add(n, idx, s, box.u, "void_exact", q);
      table.add(n, idx, s, box.u, "void_pvalue", p);
      table.add(n, idx, s, box.u, "prm_void_empirical", static_cast<double>(o.prm_voids) / R, ci_prm.first, ci_prm.second);
      table.add(n, idx, s, box.u, "prm_void_exact", q_prm);
      table.add(n, idx, s, box.u, "prm_void_pvalue", p_prm);
      const double cm = o.count_sum / R;
      const double var = R > 1 ? std::max(0.0, (o.count_sq - R * cm * cm) / (R - 1.0)) : 0.0;
      const double half = normal_critical(0.99) * std::sqrt(var / R);
      table.add(n, idx, s, box.u, "count_mean", cm, cm - half, cm + half);
      table.add(n, idx, s, box.u, "count_exact", m * tail);
      table.add(n, idx, s, box.u, "tail_identity_residual", scaled_tail(law, inst.scale.b, box.u) - power_tail(c.alpha, box.u));
    }
    table.add(n, -1, 0.0, 0.0, "void_pvalue_pooled", dof ? chi_square_sf(stat_sum, dof) : 1.0);
    table.add(n, -1, 0.0, 0.0, "prm_void_pvalue_pooled", prm_dof ? chi_square_sf(prm_stat_sum, prm_dof) : 1.0);
  }
  write_outputs(config, table);
  return table;
}

// ------------------------------------------------------ metric convergence

struct LevelDistances {
  double dis_measure = 0.0;
  double local_hausdorff = 0.0;
};

/// d_Mdis(c_n^{-1} nu_n, c_m^{-1} nu_m) and the local Hausdorff distance of
/// the vertex sets, both inside the union of the two coordinate sets.
inline LevelDistances level_distances(const Instance& a, const Instance& b) {
  if (!a.embedded() || !b.embedded()) fail(Errc::NoCommonEmbedding, "ensemble has no common embedding");
  std::map<std::array<double, 2>, std::size_t> index;
  std::vector<std::array<double, 2>> pts;
  auto intern = [&](const std::array<double, 2>& p) {
    auto [it, fresh] = index.emplace(p, pts.size());
    if (fresh) pts.push_back(p);
    return it->second;
  };
  const std::array<double, 2> origin{0.0, 0.0};
  intern(origin);
  std::vector<std::size_t> ia, ib;
  for (const auto& p : a.coords) ia.push_back(intern(p));
  for (const auto& p : b.coords) ib.push_back(intern(p));
  std::vector<PointId> ids(pts.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<PointId>(i);
  const auto S = plane_space(pts, ids, 0);
  DiscreteMeasure ma(S), mb(S);
  for (std::size_t x = 0; x < ia.size(); ++x) ma.add(ia[x], a.nu[x] / a.scale.c);
  for (std::size_t x = 0; x < ib.size(); ++x) mb.add(ib[x], b.nu[x] / b.scale.c);
  return {dis_measure_distance(ma, mb), local_hausdorff(*S, ia, ib)};
}

/// Distances between consecutive levels per replica, and their means.
inline ResultTable run_metric_convergence(const ExperimentConfig& config) {
  const InstanceFactory factory(config);
  const auto& c = factory.config();
  ResultTable table;
  if (c.ensemble.kind == EnsembleKind::CayleyTree || c.ensemble.kind == EnsembleKind::ErCritical) {
    table.notes.push_back(std::string(to_string(Errc::NoCommonEmbedding)) + ": " + to_string(c.ensemble.kind) +
                          " has no coordinates; metric convergence skipped");
    write_outputs(config, table);
    return table;
  }
  const std::size_t pairs = c.ensemble.sizes.size() - 1;
  std::vector<std::vector<LevelDistances>> vals(pairs, std::vector<LevelDistances>(c.replicas));
  std::vector<std::vector<std::string>> notes(pairs * c.replicas);
  detail::parallel_for(pairs * c.replicas, c.workers, [&](std::size_t job) {
    const std::size_t l = job / c.replicas, r = job % c.replicas;
    const Instance a = factory.make(l, r), b = factory.make(l + 1, r);
    notes[job] = a.notes;
    notes[job].insert(notes[job].end(), b.notes.begin(), b.notes.end());
    vals[l][r] = level_distances(a, b);
  });
  for (const auto& n : notes) detail::add_unique_notes(table, n);
  for (std::size_t l = 0; l < pairs; ++l) {
    const int n = c.ensemble.sizes[l + 1];
    const double prev = c.ensemble.sizes[l];
    std::vector<double> dm, lh;
    for (std::size_t r = 0; r < c.replicas; ++r) {
      table.add(n, static_cast<long long>(r), prev, 0.0, "dis_measure", vals[l][r].dis_measure);
      table.add(n, static_cast<long long>(r), prev, 0.0, "local_hausdorff", vals[l][r].local_hausdorff);
      dm.push_back(vals[l][r].dis_measure);
      lh.push_back(vals[l][r].local_hausdorff);
    }
    if (c.replicas >= 2) {
      const auto ci = bootstrap_mean_interval(dm, RngStream(c.seed, detail::kBootstrapStream + 7 * l), c.bootstrap, c.confidence);
      table.add(n, -1, prev, 0.0, "dis_measure_mean", mean(dm), ci.first, ci.second);
      const auto ci2 = bootstrap_mean_interval(lh, RngStream(c.seed, detail::kBootstrapStream + 7 * l + 1), c.bootstrap, c.confidence);
      table.add(n, -1, prev, 0.0, "local_hausdorff_mean", mean(lh), ci2.first, ci2.second);
    }
  }
  write_outputs(config, table);
  return table;
}

inline ResultTable run_experiment(const ExperimentConfig& config) {
  if (config.kind == "aging") return run_aging_experiment(config);
  if (config.kind == "subaging") return run_subaging_experiment(config);
  if (config.kind == "traps") return run_trap_convergence(config);
  if (config.kind == "metrics") return run_metric_convergence(config);
  fail(Errc::InvalidConfig, "unknown experiment kind '" + config.kind + "'");
}

}  // namespace trapnet
