#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "conred/chart.hpp"
#include "conred/cotangent.hpp"
#include "conred/expr.hpp"
#include "conred/geometry.hpp"
#include "conred/presymplectic.hpp"
#include "conred/reduction.hpp"
#include "conred/report.hpp"
#include "conred/symplectic.hpp"

// Scene files: a JSON document carrying a chart plus optional connection,
// two-form, and pipeline blocks.  Gamma entries are keyed "k,j,i" (1-based,
// storage order of the geometry module, absent entries zero); omega entries
// are keyed "i,j" with i < j.

namespace conred {

struct SceneError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Tolerances {
  double residual = 1e-8;
  double rank = 1e-8;
};

struct SceneFile {
  Chart chart;
  std::optional<ConnectionCoeffs> connection;
  std::optional<TwoFormField> two_form;

  struct CotangentBlock {
    int n = 0;
    ConnectionCoeffs base_connection;
  };
  std::optional<CotangentBlock> cotangent;

  struct ReductionBlock {
    int n = 0;
    int h = 0;
    std::vector<double> xi;
  };
  std::optional<ReductionBlock> reduction;

  struct PresymplecticBlock {
    int p = 0;
    std::optional<ConnectionCoeffs> reference;  // the torsionless K; flat when absent
  };
  std::optional<PresymplecticBlock> presymplectic;

  std::uint64_t seed = kDefaultSeed;
  Tolerances tolerances;

  static SceneFile from_json(const nlohmann::json& doc);
  static SceneFile load(const std::string& path);
  nlohmann::ordered_json to_json() const;
  void save(const std::string& path) const;
};

namespace detail {

inline std::vector<int> parse_index_key(const std::string& key, int arity, int dim) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos <= key.size()) {
    const std::size_t comma = key.find(',', pos);
    const std::string part = key.substr(pos, comma == std::string::npos ? comma : comma - pos);
    int v = 0;
    auto res = std::from_chars(part.data(), part.data() + part.size(), v);
    if (res.ec != std::errc() || res.ptr != part.data() + part.size())
      throw SceneError("bad index key '" + key + "'");
    if (v < 1 || v > dim)
      throw SceneError("index key '" + key + "' out of bounds for dimension " +
                       std::to_string(dim));
    out.push_back(v - 1);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (static_cast<int>(out.size()) != arity)
    throw SceneError("index key '" + key + "' must have " + std::to_string(arity) + " components");
  return out;
}

inline ScalarExpr parse_scene_expr(const std::string& src, const Chart& chart,
                                   const std::string& where) {
  ScalarExpr e;
  try {
    e = parse_expression(src);
  } catch (const ParseError& err) {
    throw SceneError(where + ": " + err.what());
  }
  const std::set<std::string> allowed(chart.coords().begin(), chart.coords().end());
  if (!e.uses_only(allowed))
    throw SceneError(where + ": expression '" + src + "' references an undeclared coordinate");
  return e;
}

inline ConnectionCoeffs connection_from_json(const nlohmann::json& node, const Chart& chart,
                                             const std::string& where) {
  ConnectionCoeffs conn = ConnectionCoeffs::zero(chart);
  if (!node.contains("gamma")) return conn;
  if (!node.at("gamma").is_object()) throw SceneError(where + ": 'gamma' must be an object");
  for (const auto& [key, value] : node.at("gamma").items()) {
    const auto idx = parse_index_key(key, 3, chart.dim());
    conn.set_gamma(idx[0], idx[1], idx[2],
                   parse_scene_expr(value.get<std::string>(), chart, where + ".gamma[" + key + "]"));
  }
  return conn;
}

inline nlohmann::ordered_json connection_to_json(const ConnectionCoeffs& conn) {
  nlohmann::ordered_json gamma = nlohmann::ordered_json::object();
  const int d = conn.dim();
  for (int k = 0; k < d; ++k)
    for (int j = 0; j < d; ++j)
      for (int i = 0; i < d; ++i) {
        const ScalarExpr e = conn.gamma(k, j, i).simplified();
        if (e.is_zero_literal()) continue;
        const std::string key = std::to_string(k + 1) + "," + std::to_string(j + 1) + "," +
                                std::to_string(i + 1);
        gamma[key] = e.str();
      }
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  out["gamma"] = std::move(gamma);
  return out;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6e", v);
  return buf;
}

inline std::string format_point(const Point& p) {
  std::string out = "(";
  char buf[40];
  for (std::size_t i = 0; i < p.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.6g", p[i]);
    if (i) out += ", ";
    out += buf;
  }
  return out + ")";
}

}  // namespace detail

inline SceneFile SceneFile::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw SceneError("scene document must be a JSON object");
  if (!doc.contains("chart")) throw SceneError("scene is missing the 'chart' block");

  SceneFile scene;
  try {
    const auto& chart_node = doc.at("chart");
    std::vector<std::string> coords = chart_node.at("coords").get<std::vector<std::string>>();
    std::vector<std::array<double, 2>> domain;
    if (chart_node.contains("domain")) {
      for (const auto& iv : chart_node.at("domain"))
        domain.push_back({iv.at(0).get<double>(), iv.at(1).get<double>()});
    } else {
      domain.assign(coords.size(), {-2.0, 2.0});
    }
    scene.chart = Chart(std::move(coords), std::move(domain));
  } catch (const nlohmann::json::exception& e) {
    throw SceneError(std::string("malformed chart block: ") + e.what());
  } catch (const ChartError& e) {
    throw SceneError(std::string("invalid chart: ") + e.what());
  }

  if (doc.contains("seed")) scene.seed = doc.at("seed").get<std::uint64_t>();
  if (doc.contains("tolerances")) {
    const auto& t = doc.at("tolerances");
    if (t.contains("residual")) scene.tolerances.residual = t.at("residual").get<double>();
    if (t.contains("rank")) scene.tolerances.rank = t.at("rank").get<double>();
  }

  if (doc.contains("connection"))
    scene.connection = detail::connection_from_json(doc.at("connection"), scene.chart, "connection");

  if (doc.contains("two_form")) {
    const auto& node = doc.at("two_form");
    TwoFormField form(scene.chart);
    if (node.contains("omega")) {
      for (const auto& [key, value] : node.at("omega").items()) {
        const auto idx = detail::parse_index_key(key, 2, scene.chart.dim());
        if (idx[0] >= idx[1])
          throw SceneError("two_form key '" + key + "' must have i < j");
        form.set_entry(idx[0], idx[1],
                       detail::parse_scene_expr(value.get<std::string>(), scene.chart,
                                                "two_form.omega[" + key + "]"));
      }
    }
    const std::string kind = node.value("kind", std::string("symplectic"));
    const auto pts = scene.chart.sample_points(scene.seed);
    if (kind == "symplectic") {
      form.declared_kind = FormKind::Symplectic;
      if (scene.chart.dim() % 2 != 0)
        throw SceneError("symplectic form on an odd-dimensional chart");
      if (closedness_residual(form, pts) > 1e-10)
        throw SceneError("two_form flagged symplectic is not closed");
      if (!is_symplectic(form, pts))
        throw SceneError("two_form flagged symplectic is degenerate at a sample point");
      form.declared_rank = scene.chart.dim();
    } else if (kind == "presymplectic") {
      form.declared_kind = FormKind::Presymplectic;
      if (!node.contains("rank"))
        throw SceneError("presymplectic two_form requires the 'rank' key");
      form.declared_rank = node.at("rank").get<int>();
      if (form.declared_rank < 2 || form.declared_rank % 2 != 0 ||
          form.declared_rank > scene.chart.dim())
        throw SceneError("presymplectic rank must be a positive even number within the dimension");
      if (closedness_residual(form, pts) > 1e-10)
        throw SceneError("two_form flagged presymplectic is not closed");
      if (!has_constant_rank(form, form.declared_rank, pts))
        throw SceneError("two_form does not have the declared constant rank " +
                         std::to_string(form.declared_rank));
    } else {
      throw SceneError("unknown two_form kind '" + kind + "'");
    }
    scene.two_form = std::move(form);
  }

  if (doc.contains("cotangent")) {
    const auto& node = doc.at("cotangent");
    CotangentBlock block;
    block.n = node.at("n").get<int>();
    CotangentChart cc;
    try {
      cc = CotangentChart::from_total(scene.chart, block.n);
    } catch (const CotangentError& e) {
      throw SceneError(std::string("cotangent block: ") + e.what());
    }
    block.base_connection = node.contains("base_connection")
                                ? detail::connection_from_json(node.at("base_connection"), cc.base,
                                                               "cotangent.base_connection")
                                : ConnectionCoeffs::zero(cc.base);
    scene.cotangent = std::move(block);
  }

  if (doc.contains("reduction")) {
    const auto& node = doc.at("reduction");
    ReductionBlock block;
    block.n = node.at("n").get<int>();
    block.h = node.at("h").get<int>();
    block.xi = node.at("xi").get<std::vector<double>>();
    if (block.h < 1 || block.h > block.n)
      throw SceneError("reduction block requires 1 <= h <= n");
    if (static_cast<int>(block.xi.size()) != block.h + 1)
      throw SceneError("reduction xi must have h+1 components");
    try {
      (void)CotangentChart::from_total(scene.chart, block.n);
    } catch (const CotangentError& e) {
      throw SceneError(std::string("reduction block: ") + e.what());
    }
    scene.reduction = std::move(block);
  }

  if (doc.contains("presymplectic")) {
    const auto& node = doc.at("presymplectic");
    PresymplecticBlock block;
    block.p = node.at("p").get<int>();
    if (block.p < 0) throw SceneError("presymplectic p must be nonnegative");
    if (node.contains("K"))
      block.reference = detail::connection_from_json(node.at("K"), scene.chart, "presymplectic.K");
    if (!scene.two_form || scene.two_form->declared_kind != FormKind::Presymplectic)
      throw SceneError("presymplectic block requires a two_form of kind 'presymplectic'");
    if (scene.two_form->declared_rank + block.p != scene.chart.dim())
      throw SceneError("presymplectic block: rank + p must equal the chart dimension");
    scene.presymplectic = std::move(block);
  }

  return scene;
}

inline SceneFile SceneFile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SceneError("cannot open scene file '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw SceneError("scene '" + path + "' is not valid JSON: " + e.what());
  }
  return from_json(doc);
}

inline nlohmann::ordered_json SceneFile::to_json() const {
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  {
    nlohmann::ordered_json chart_node = nlohmann::ordered_json::object();
    chart_node["coords"] = chart.coords();
    nlohmann::ordered_json domain = nlohmann::ordered_json::array();
    for (const auto& iv : chart.domain()) domain.push_back({iv[0], iv[1]});
    chart_node["domain"] = std::move(domain);
    doc["chart"] = std::move(chart_node);
  }
  if (connection) doc["connection"] = detail::connection_to_json(*connection);
  if (two_form) {
    nlohmann::ordered_json node = nlohmann::ordered_json::object();
    nlohmann::ordered_json omega = nlohmann::ordered_json::object();
    const int d = two_form->dim();
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j) {
        const ScalarExpr e = two_form->entry(i, j).simplified();
        if (e.is_zero_literal()) continue;
        omega[std::to_string(i + 1) + "," + std::to_string(j + 1)] = e.str();
      }
    node["omega"] = std::move(omega);
    node["kind"] =
        two_form->declared_kind == FormKind::Presymplectic ? "presymplectic" : "symplectic";
    if (two_form->declared_kind == FormKind::Presymplectic) node["rank"] = two_form->declared_rank;
    doc["two_form"] = std::move(node);
  }
  if (cotangent) {
    nlohmann::ordered_json node = nlohmann::ordered_json::object();
    node["n"] = cotangent->n;
    node["base_connection"] = detail::connection_to_json(cotangent->base_connection);
    doc["cotangent"] = std::move(node);
  }
  if (reduction) {
    nlohmann::ordered_json node = nlohmann::ordered_json::object();
    node["n"] = reduction->n;
    node["h"] = reduction->h;
    node["xi"] = reduction->xi;
    doc["reduction"] = std::move(node);
  }
  if (presymplectic) {
    nlohmann::ordered_json node = nlohmann::ordered_json::object();
    node["p"] = presymplectic->p;
    if (presymplectic->reference) node["K"] = detail::connection_to_json(*presymplectic->reference);
    doc["presymplectic"] = std::move(node);
  }
  doc["seed"] = seed;
  {
    nlohmann::ordered_json t = nlohmann::ordered_json::object();
    t["residual"] = tolerances.residual;
    t["rank"] = tolerances.rank;
    doc["tolerances"] = std::move(t);
  }
  return doc;
}

inline void SceneFile::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw SceneError("cannot write scene file '" + path + "'");
  out << to_json().dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Report rendering
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json report_to_json(const CheckReport& report) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  nlohmann::ordered_json checks = nlohmann::ordered_json::array();
  for (const auto& item : report.items) {
    nlohmann::ordered_json node = nlohmann::ordered_json::object();
    node["name"] = item.name;
    node["pass"] = item.pass;
    node["max_residual"] = item.max_residual;
    node["tolerance"] = item.tolerance;
    node["witness"] = item.witness;
    if (!item.detail.empty()) node["detail"] = item.detail;
    checks.push_back(std::move(node));
  }
  doc["checks"] = std::move(checks);
  doc["overall"] = report.overall_pass() ? "pass" : "fail";
  return doc;
}

inline void print_text_report(const CheckReport& report, std::ostream& out) {
  for (const auto& item : report.items) {
    out << (item.pass ? "[PASS] " : "[FAIL] ") << item.name << ": max residual "
        << detail::format_double(item.max_residual) << " (tol "
        << detail::format_double(item.tolerance) << ")";
    if (!item.witness.empty()) out << " at " << detail::format_point(item.witness);
    out << "\n";
    if (!item.pass && !item.detail.empty()) out << "       " << item.detail << "\n";
  }
  out << (report.overall_pass() ? "overall: pass" : "overall: FAIL") << "\n";
}

}  // namespace conred
