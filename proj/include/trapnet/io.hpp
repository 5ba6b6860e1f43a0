#pragma once

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "trapnet/ensembles.hpp"
#include "trapnet/error.hpp"
#include "trapnet/measure.hpp"
#include "trapnet/network.hpp"
#include "trapnet/trap.hpp"

namespace trapnet {

using json = nlohmann::json;

/// Decimal with the given number of significant digits; "inf"/"-inf"/"nan" otherwise.
inline std::string format_number(double v, int digits = 15) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

/// RFC 4180 field quoting.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline void write_csv_row(std::ostream& os, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) os << ',';
    os << csv_field(fields[i]);
  }
  os << "\r\n";
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::ParseError, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(Errc::ParseError, path + ": " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::ParseError, "cannot write " + path);
  out << text;
}

// ---------------------------------------------------------------- networks

inline json network_to_json(const ElectricalNetwork& net) {
  json j;
  j["vertices"] = net.ids();
  json edges = json::array();
  for (const auto& e : net.weighted_edges()) edges.push_back({e.u, e.v, e.weight});
  j["edges"] = edges;
  j["root"] = net.root_id();
  return j;
}

inline ElectricalNetwork network_from_json(const json& j) {
  try {
    auto vertices = j.at("vertices").get<std::vector<VertexId>>();
    std::vector<WeightedEdge> edges;
    for (const auto& e : j.at("edges")) {
      if (!e.is_array() || e.size() != 3) fail(Errc::ParseError, "edge entries must be [u, v, weight]");
      edges.push_back({e[0].get<VertexId>(), e[1].get<VertexId>(), e[2].get<double>()});
    }
    return ElectricalNetwork(std::move(vertices), edges, j.at("root").get<VertexId>());
  } catch (const json::exception& e) {
    fail(Errc::ParseError, std::string("network JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------- measures

/// Array of {point, weight}; points are carrier ids.
inline json measure_to_json(const DiscreteMeasure& m) {
  json out = json::array();
  for (const auto& [x, w] : m.atoms()) out.push_back({{"point", m.carrier() ? m.carrier()->id(x) : static_cast<PointId>(x)}, {"weight", w}});
  return out;
}

inline DiscreteMeasure measure_from_json(const json& j, SpacePtr carrier) {
  DiscreteMeasure m(carrier);
  try {
    for (const auto& a : j) {
      const auto id = a.at("point").get<PointId>();
      m.add(carrier ? carrier->index_of(id) : static_cast<std::size_t>(id), a.at("weight").get<double>());
    }
  } catch (const json::exception& e) {
    fail(Errc::ParseError, std::string("measure JSON: ") + e.what());
  }
  return m;
}

/// Array of {point, weight} or {point, mark, weight}; multiplicities are repeated entries.
inline json point_measure_to_json(const PointMeasure& pi) {
  json out = json::array();
  for (const auto& a : pi.atoms()) {
    json e{{"point", pi.carrier() ? pi.carrier()->id(a.point) : static_cast<PointId>(a.point)}, {"weight", a.weight}};
    if (pi.marked()) e["mark"] = a.mark;
    for (std::size_t k = 0; k < a.multiplicity; ++k) out.push_back(e);
  }
  return out;
}

inline PointMeasure point_measure_from_json(const json& j, SpacePtr carrier) {
  bool marked = false;
  for (const auto& a : j) marked = marked || a.contains("mark");
  PointMeasure pi(carrier, marked);
  try {
    for (const auto& a : j) {
      const auto id = a.at("point").get<PointId>();
      const std::size_t x = carrier ? carrier->index_of(id) : static_cast<std::size_t>(id);
      pi.add_marked(x, a.value("mark", 0.0), a.at("weight").get<double>());
    }
  } catch (const json::exception& e) {
    fail(Errc::ParseError, std::string("point measure JSON: ") + e.what());
  }
  return pi;
}

// ---------------------------------------------------------- trap environments

struct TrapFile {
  std::string network_ref;
  json network;
  std::vector<VertexId> vertices;
  std::vector<double> weights;
  Scale scale;
  double alpha = 0.5;
  std::uint64_t seed = 0;
};

/// Weights are written in shortest round-trip form (at most 17 significant digits).
inline json trap_to_json(const ElectricalNetwork& net, const std::vector<double>& nu, const Scale& scale, double alpha, std::uint64_t seed,
                         const std::string& network_ref = "") {
  json j;
  if (!network_ref.empty()) j["network_ref"] = network_ref;
  j["network"] = network_to_json(net);
  json w = json::array();
  for (std::size_t i = 0; i < nu.size(); ++i) w.push_back({{"vertex", net.id(i)}, {"weight", nu[i]}});
  j["weights"] = w;
  j["scale"] = {{"a", scale.a}, {"b", scale.b}, {"c", scale.c}};
  j["alpha"] = alpha;
  j["seed"] = seed;
  return j;
}

inline TrapFile trap_from_json(const json& j) {
  TrapFile t;
  try {
    t.network_ref = j.value("network_ref", std::string());
    if (j.contains("network")) t.network = j.at("network");
    for (const auto& w : j.at("weights")) {
      t.vertices.push_back(w.at("vertex").get<VertexId>());
      t.weights.push_back(w.at("weight").get<double>());
    }
    const auto& s = j.at("scale");
    t.scale = {s.at("a").get<double>(), s.at("b").get<double>(), s.at("c").get<double>()};
    t.alpha = j.value("alpha", 0.5);
    t.seed = j.value("seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    fail(Errc::ParseError, std::string("trap JSON: ") + e.what());
  }
  return t;
}

/// Weights reordered to the network's vertex order.
inline std::vector<double> trap_weights_for(const ElectricalNetwork& net, const TrapFile& t) {
  std::vector<double> nu(net.size(), 0.0);
  std::vector<char> seen(net.size(), 0);
  for (std::size_t k = 0; k < t.vertices.size(); ++k) {
    const auto i = net.index_of(t.vertices[k]);
    nu[i] = t.weights[k];
    seen[i] = 1;
  }
  for (char s : seen)
    if (!s) fail(Errc::SupportMismatch, "trap file misses a vertex");
  return nu;
}

// ------------------------------------------------------- trees and pointsets

inline json tree_to_json(const PlaneTree& t) { return {{"parent", t.parent}, {"labels", t.label}}; }

inline PlaneTree tree_from_json(const json& j) {
  try {
    const auto parent = j.at("parent").get<std::vector<int>>();
    auto labels = j.contains("labels") ? j.at("labels").get<std::vector<int>>() : std::vector<int>();
    if (labels.empty())
      for (std::size_t i = 0; i < parent.size(); ++i) labels.push_back(static_cast<int>(i) + 1);
    if (labels.size() != parent.size() || parent.empty() || parent[0] != -1) fail(Errc::ParseError, "tree JSON needs parent[0] = -1");
    std::vector<std::vector<int>> kids(parent.size());
    for (std::size_t i = 1; i < parent.size(); ++i) {
      if (parent[i] < 0 || static_cast<std::size_t>(parent[i]) >= i) fail(Errc::ParseError, "parent array must be in depth-first order");
      kids[static_cast<std::size_t>(parent[i])].push_back(static_cast<int>(i));
    }
    auto t = plane_tree_from_children(kids, 0, labels);
    if (t.parent != parent) fail(Errc::ParseError, "parent array is not a depth-first order");
    return t;
  } catch (const json::exception& e) {
    fail(Errc::ParseError, std::string("tree JSON: ") + e.what());
  }
}

inline json pointset_to_json(const std::vector<std::array<double, 2>>& pts) {
  json out = json::array();
  for (const auto& p : pts) out.push_back({p[0], p[1]});
  return out;
}

}  // namespace trapnet
