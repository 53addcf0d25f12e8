// Acceptance suite: one criterion per numbered block, each printed as a
// single PASS/FAIL line with its runtime.  Exits nonzero when any criterion
// fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "conred/cli.hpp"
#include "conred/cotangent.hpp"
#include "conred/presymplectic.hpp"
#include "conred/reduction.hpp"
#include "conred/scene.hpp"

using namespace conred;

namespace {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void expect(bool cond, const std::string& what) {
  if (!cond) throw Failure(what);
}

ScalarExpr ex(const std::string& s) { return parse_expression(s); }

double urand(std::mt19937_64& gen, double lo, double hi) { return uniform_in(gen, lo, hi); }

ScalarExpr random_quadratic(std::mt19937_64& gen, const Chart& chart, double lo, double hi) {
  const int d = chart.dim();
  ScalarExpr acc = ScalarExpr::constant(urand(gen, lo, hi));
  for (int i = 0; i < d; ++i) {
    acc = acc + ScalarExpr::constant(urand(gen, lo, hi)) * chart.var(i);
    for (int j = i; j < d; ++j)
      acc = acc + ScalarExpr::constant(urand(gen, lo, hi)) * chart.var(i) * chart.var(j);
  }
  return acc.simplified();
}

ConnectionCoeffs random_symmetric_connection(std::mt19937_64& gen, const Chart& chart, double lo,
                                             double hi) {
  const int d = chart.dim();
  ConnectionCoeffs conn = ConnectionCoeffs::zero(chart);
  for (int k = 0; k < d; ++k)
    for (int j = 0; j < d; ++j)
      for (int i = j; i < d; ++i) {
        ScalarExpr e = random_quadratic(gen, chart, lo, hi);
        conn.set_gamma(k, j, i, e);
        conn.set_gamma(k, i, j, e);
      }
  return conn;
}

double kernel_torsion_residual(const ConnectionCoeffs& conn, const TwoFormField& omega,
                               const std::vector<Point>& pts) {
  const auto torsion = torsion_tensor(conn);
  const int d = conn.dim();
  double worst = 0.0;
  for (const auto& p : pts) {
    const EvalEnv env = conn.chart().env(p);
    const Matrix w = omega.evaluate(p);
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j)
        for (int wc = 0; wc < d; ++wc) {
          double sum = 0.0;
          for (int l = 0; l < d; ++l) sum += torsion.at(l, i, j).evaluate(env) * w(l, wc);
          worst = std::max(worst, std::abs(sum));
        }
  }
  return worst;
}

// ---------------------------------------------------------------------------

// Criterion 1: the worked reduction example, driven through the CLI.
void criterion_worked_example() {
  const std::string scene_path = std::string(CONRED_SCENE_DIR) + "/reduce_flat_n3_h2.json";
  const std::string out_path = "/tmp/conred_acceptance_quotient.json";

  std::ostringstream out, err;
  const int code =
      run_cli({"reduce", scene_path, "--format", "json", "-o", out_path}, out, err);
  expect(code == 0, "reduce exited with code " + std::to_string(code) + ": " + err.str());

  // (a) moment map symbolically equal to the family formula
  ScalingTranslationScene st(3, 2, {0.0, 1.0, 1.0});
  const CotangentChart cc = scene_chart(st);
  const auto moment = scene_moment_map(st, cc);
  expect(moment[0].simplified().same_structure((ex("x1*y_1") + ex("x2*y_2")).simplified()),
         "moment J_0 != x1 y_1 + x2 y_2");
  expect(moment[1].simplified().same_structure(ex("y_1")), "moment J_1 != y_1");
  expect(moment[2].simplified().same_structure(ex("y_2")), "moment J_2 != y_2");
  const auto doc = nlohmann::json::parse(out.str());
  expect(doc.at("moment_map")[0] == "x1*y_1+x2*y_2", "CLI moment map string mismatch");

  // (b) level set constraints exactly {y_1 = 1, y_2 = 1, x1 + x2 = 0}
  const auto level = scene_level_set(st, cc, st.xi);
  expect(level.dim() == 3, "level set dimension != 3");
  Matrix expected = Matrix::Zero(3, 6);
  expected(0, 3) = 1.0;
  expected(1, 4) = 1.0;
  expected(2, 0) = 1.0;
  expected(2, 1) = 1.0;
  expect((level.constraints() - expected).norm() == 0.0, "constraint matrix not exact");
  expect(level.values()(0) == 1.0 && level.values()(1) == 1.0 && level.values()(2) == 0.0,
         "constraint values not exact");

  // (c) quotient R^2 with the canonical reduced form
  SceneFile quotient = SceneFile::load(out_path);
  expect(quotient.chart.coords() == std::vector<std::string>{"x3", "y_3"},
         "quotient coordinates are not (x3, y_3)");
  expect(quotient.two_form && quotient.two_form->entry(0, 1).is_one_literal(),
         "reduced form is not dx3 ^ dy_3");

  // (d) reduced Christoffels identically zero
  expect(quotient.connection.has_value(), "quotient scene lacks a connection");
  double worst = 0.0;
  for (const auto& p : quotient.chart.sample_points()) {
    const auto g = quotient.connection->evaluate(p);
    for (const auto& v : g.flat()) worst = std::max(worst, std::abs(v));
  }
  expect(worst <= 1e-12, "reduced Christoffels exceed 1e-12");
  std::remove(out_path.c_str());
}

// Criterion 2: flat bases lift to the exactly flat connection, n <= 4.
void criterion_flat_lift() {
  for (int n = 1; n <= 4; ++n) {
    std::vector<std::string> coords;
    for (int i = 0; i < n; ++i) coords.push_back("x" + std::to_string(i + 1));
    const CotangentChart cc = CotangentChart::over(Chart::box(coords, -1.0, 1.0));
    const ConnectionCoeffs lifted = lift_connection(ConnectionCoeffs::zero(cc.base), cc);
    expect(lifted.structurally_zero(), "lift of the flat base is not literally zero (n=" +
                                           std::to_string(n) + ")");
    const double res = max_residual(nabla_omega(lifted, canonical_symplectic_form(cc)), cc.total,
                                    cc.total.sample_points());
    expect(res == 0.0, "flat lift has nonzero nabla omega residual");
  }
}

// Criterion 3: ten random symmetric bases on R^2; the lift is compatible and
// the corrected connection is compatible and torsionless.
void criterion_lift_suite() {
  std::mt19937_64 gen(0xACC3);
  const Chart base = Chart::box({"x1", "x2"}, -1.0, 1.0);
  const CotangentChart cc = CotangentChart::over(base);
  const TwoFormField omega = canonical_symplectic_form(cc);
  const auto pts = cc.total.sample_points();
  for (int trial = 0; trial < 10; ++trial) {
    const ConnectionCoeffs conn = random_symmetric_connection(gen, base, -1.0, 1.0);
    const ConnectionCoeffs lifted = lift_connection(conn, cc);
    const double lift_res = max_residual(nabla_omega(lifted, omega), cc.total, pts);
    expect(lift_res <= 1e-8,
           "trial " + std::to_string(trial) + ": lift residual " + std::to_string(lift_res));

    const auto corrected = symplectize(symmetric_part(lifted), omega);
    const double torsion_res = max_residual(torsion_tensor(corrected.connection), cc.total, pts);
    const double compat_res = max_residual(nabla_omega(corrected.connection, omega), cc.total, pts);
    expect(torsion_res <= 1e-8, "trial " + std::to_string(trial) + ": torsion residual");
    expect(compat_res <= 1e-8, "trial " + std::to_string(trial) + ": compatibility residual");
  }
}

// Criterion 4: transport-based covariant derivative oracle.
void criterion_transport_oracle() {
  const Chart line = Chart::box({"x1"}, -0.5, 1.5);
  ConnectionCoeffs decay = ConnectionCoeffs::zero(line);
  decay.set_gamma(0, 0, 0, ex("1"));
  PathSpec unit_path(line, {ScalarExpr::variable("t")}, 0.0, 1.0);
  const auto v = parallel_transport(decay, unit_path, {1.0}, 1000);
  expect(std::abs(v[0] - std::exp(-1.0)) <= 1e-8, "closed-form transport misses exp(-1)");

  std::mt19937_64 gen(0xACC4);
  const Chart chart = Chart::box({"x1", "x2"}, -1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto conn = random_symmetric_connection(gen, chart, -0.5, 0.5);
    VectorFieldExpr y(chart, {random_quadratic(gen, chart, -1.0, 1.0),
                              random_quadratic(gen, chart, -1.0, 1.0)});
    const double px = urand(gen, -0.3, 0.3), py = urand(gen, -0.3, 0.3);
    const double dx = urand(gen, -0.5, 0.5), dy = urand(gen, -0.5, 0.5);
    PathSpec path(chart,
                  {ScalarExpr::constant(px) + ScalarExpr::constant(dx) * ScalarExpr::variable("t"),
                   ScalarExpr::constant(py) + ScalarExpr::constant(dy) * ScalarExpr::variable("t")},
                  0.0, 0.5);
    const auto sym =
        covariant_derivative_vector(conn, VectorFieldExpr::constant(chart, {dx, dy}), y)
            .evaluate(path.point_at(0.0));
    const auto fd = covariant_derivative_via_transport(conn, y, path, 1e-4, 1000);
    double scale = 1.0;
    for (double s : sym) scale = std::max(scale, 1.0 + std::abs(s));
    for (int i = 0; i < 2; ++i)
      expect(std::abs(sym[i] - fd[i]) <= 1e-4 * scale,
             "trial " + std::to_string(trial) + ": oracle disagreement " +
                 std::to_string(std::abs(sym[i] - fd[i])));
  }
}

// Criterion 5: self-parallelism discrimination.
void criterion_self_parallel() {
  ScalingTranslationScene st(3, 2, {0.0, 1.0, 1.0});
  const CotangentChart cc = scene_chart(st);
  const auto level = scene_level_set(st, cc, st.xi);
  const ConnectionCoeffs flat = ConnectionCoeffs::zero(cc.total);

  auto static_check = self_parallel_check(flat, level);
  expect(static_check.pass && static_check.max_residual <= 1e-9, "flat scene static check");
  PathSpec path = path_in_subspace(level, 7);
  std::mt19937_64 gen(8);
  Vector v0 = Vector::Zero(6);
  for (const auto& b : level.tangent_basis()) v0 += urand(gen, -1.0, 1.0) * b;
  auto dynamic_check = transport_tangency_check(
      flat, level, path, std::vector<double>(v0.data(), v0.data() + 6), 1000);
  expect(dynamic_check.pass && dynamic_check.max_residual <= 1e-6, "flat scene dynamic check");

  const Chart r3 = Chart::box({"x1", "x2", "x3"}, -1.0, 1.0);
  ConnectionCoeffs planted = ConnectionCoeffs::zero(r3);
  planted.set_gamma(2, 0, 0, ex("1"));
  Matrix nrm = Matrix::Zero(1, 3);
  nrm(0, 2) = 1.0;
  AffineSubspace plane(r3, nrm, Vector::Zero(1));

  auto bad_static = self_parallel_check(planted, plane);
  expect(!bad_static.pass, "planted connection passed the static check");
  expect(!bad_static.witness.empty(), "planted static failure lacks a witness");
  PathSpec bad_path(r3, {ScalarExpr::variable("t"), ex("0"), ex("0")}, 0.0, 0.9);
  auto bad_dynamic = transport_tangency_check(planted, plane, bad_path, {1.0, 0.0, 0.0}, 1000);
  expect(!bad_dynamic.pass, "planted connection passed the dynamic check");
  expect(!bad_dynamic.witness.empty(), "planted dynamic failure lacks a witness");
}

// Criterion 6 and 7 share the ten presymplectic scenes.
std::vector<PresymplecticBuild> g_builds;
std::vector<PresymplecticStructure> g_scenes;

void criterion_presymplectic_suite() {
  g_builds.clear();
  g_scenes.clear();
  std::mt19937_64 gen(0xACC6);
  const Chart chart = Chart::box({"u1", "u2", "z1"}, -1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    ScalarExpr f = ScalarExpr::constant(urand(gen, 1.0, 1.2));
    for (const auto& mono : {ex("u1"), ex("u2"), ex("u1^2"), ex("u1*u2"), ex("u2^2")})
      f = f + ScalarExpr::constant(urand(gen, -0.08, 0.08)) * mono;
    TwoFormField w(chart);
    w.set_entry(0, 1, f.simplified());
    w.declared_kind = FormKind::Presymplectic;
    w.declared_rank = 2;
    PresymplecticStructure ps(chart, w, 1, 1);
    const SplittingS split = ps.splitting();
    const auto pts = chart.sample_points();

    // the conformal factor stays inside [0.5, 2]
    for (const auto& p : pts) {
      const double val = f.evaluate(chart.env(p));
      expect(val >= 0.5 && val <= 2.0, "conformal factor left [0.5, 2]");
    }

    auto build = build_presymplectic_connection(ps, split, flat_reference(ps));
    expect(max_residual(nabla_omega(build.connection, ps.omega()), chart, pts) <= 1e-8,
           "trial " + std::to_string(trial) + ": nabla omega");
    expect(kernel_torsion_residual(build.connection, ps.omega(), pts) <= 1e-8,
           "trial " + std::to_string(trial) + ": kernel-valued torsion");

    // the 1/6-stage identity
    for (const auto& p : pts) {
      const EvalEnv env = chart.env(p);
      const Matrix w2 = ps.omega().evaluate(p);
      for (int i : split.transverse)
        for (int j : split.transverse)
          for (int l : split.transverse) {
            double sum = 0.0;
            for (int k = 0; k < 3; ++k)
              sum += build.skew.at(k, j, i).evaluate(env) * w2(k, l) +
                     w2(j, k) * build.skew.at(k, l, i).evaluate(env);
            expect(std::abs(sum) <= 1e-9, "trial " + std::to_string(trial) + ": skew identity");
          }
    }
    // the cyclic compatibility identity
    const auto nd = nabla_omega(build.d_connection, ps.omega());
    for (const auto& p : pts) {
      const EvalEnv env = chart.env(p);
      const double cyc = nd.at(0, 1, 2).evaluate(env) + nd.at(1, 2, 0).evaluate(env) +
                         nd.at(2, 0, 1).evaluate(env);
      expect(std::abs(cyc) <= 1e-9, "trial " + std::to_string(trial) + ": cyclic identity");
    }

    expect(projectability_check(build.connection, ps).overall_pass(),
           "trial " + std::to_string(trial) + ": projectability");
    auto red = reduce_presymplectic(build.connection, ps);
    for (const auto& item : red.checks.items)
      expect(item.pass, "trial " + std::to_string(trial) + ": " + item.name);

    g_scenes.push_back(std::move(ps));
    g_builds.push_back(std::move(build));
  }
}

void criterion_curvature_condition() {
  expect(g_builds.size() == 10, "criterion 6 must run before criterion 7");
  for (std::size_t i = 0; i < g_builds.size(); ++i) {
    auto item = curvature_condition_check(g_builds[i].connection, g_scenes[i]);
    expect(item.pass, "curvature condition failed on build " + std::to_string(i));
  }
  // planted: nabla_{d/du1} d/dz1 = z1 d/du1
  const auto& ps = g_scenes.front();
  ConnectionCoeffs planted = ConnectionCoeffs::zero(ps.chart());
  planted.set_gamma(0, 2, 0, ex("z1"));
  auto item = curvature_condition_check(planted, ps);
  expect(!item.pass, "planted connection passed the curvature condition");
  expect(!item.witness.empty(), "planted curvature failure lacks a witness");
}

// Criterion 8: transports agree across the chart change (u, v) = (x1, x2 + x1^2).
void criterion_coordinate_covariance() {
  const Chart old_chart = Chart::box({"x1", "x2"}, -2.0, 2.0);
  const Chart new_chart(std::vector<std::string>{"u", "v"}, {{-2.0, 2.0}, {-6.0, 6.0}});
  const ConnectionCoeffs flat = ConnectionCoeffs::zero(old_chart);
  const auto moved =
      change_coordinates(flat, new_chart, {ex("x1"), ex("x2 + x1^2")}, {ex("u"), ex("v - u^2")});

  std::mt19937_64 gen(0xACC8);
  for (int trial = 0; trial < 5; ++trial) {
    const double ax = urand(gen, -0.5, 0.5), ay = urand(gen, -0.5, 0.5);
    const double bx = urand(gen, -1.0, 1.0), by = urand(gen, -1.0, 1.0);
    PathSpec old_path(
        old_chart,
        {ScalarExpr::constant(ax) + ScalarExpr::constant(bx) * ScalarExpr::variable("t"),
         ScalarExpr::constant(ay) + ScalarExpr::constant(by) * ScalarExpr::variable("t")},
        0.0, 1.0);
    PathSpec new_path(new_chart,
                      {old_path.components[0],
                       (old_path.components[1] + ScalarExpr::pow(old_path.components[0], 2))
                           .simplified()},
                      0.0, 1.0);
    const std::vector<double> v0{urand(gen, -1.0, 1.0), urand(gen, -1.0, 1.0)};
    auto jac = [](const Point& x) {
      Matrix j(2, 2);
      j << 1.0, 0.0, 2.0 * x[0], 1.0;
      return j;
    };
    const Vector w0 = jac(old_path.point_at(0.0)) * Vector::Map(v0.data(), 2);
    const auto w1 = parallel_transport(moved, new_path, {w0(0), w0(1)}, 1000);
    const Vector expected = jac(old_path.point_at(1.0)) * Vector::Map(v0.data(), 2);
    expect(std::abs(w1[0] - expected(0)) <= 1e-6 && std::abs(w1[1] - expected(1)) <= 1e-6,
           "trial " + std::to_string(trial) + ": transports disagree");
  }
}

// Criterion 9: the lifted family generators are Hamiltonian for their moment
// components.
void criterion_hamiltonian_identity() {
  for (int n = 1; n <= 4; ++n)
    for (int h = 1; h <= n; ++h) {
      ScalingTranslationScene st(n, h, std::vector<double>(h + 1, 1.0));
      const CotangentChart cc = scene_chart(st);
      const auto action = lift_action(scene_generators(st, cc.base), cc);
      const double res = hamiltonian_residual(action, cc, cc.total.sample_points());
      expect(res <= 1e-9, "n=" + std::to_string(n) + " h=" + std::to_string(h) + ": residual " +
                              std::to_string(res));
    }
}

struct Criterion {
  int id;
  std::string label;
  double budget_seconds;
  std::function<void()> body;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "worked example n=3 h=2 xi=(0,1,1) via cmd_reduce", 5.0, criterion_worked_example},
      {2, "flat cotangent lifts are exactly flat (n <= 4)", 5.0, criterion_flat_lift},
      {3, "lift compatibility suite (10 random bases)", 60.0, criterion_lift_suite},
      {4, "transport oracle (20 triples + closed form)", 30.0, criterion_transport_oracle},
      {5, "self-parallel discrimination", 10.0, criterion_self_parallel},
      {6, "presymplectic suite (10 conformal scenes)", 60.0, criterion_presymplectic_suite},
      {7, "curvature-condition discrimination", 10.0, criterion_curvature_condition},
      {8, "coordinate covariance of transport", 10.0, criterion_coordinate_covariance},
      {9, "Hamiltonian generator identity (n <= 4)", 10.0, criterion_hamiltonian_identity},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    std::string verdict = "PASS";
    std::string detail;
    try {
      c.body();
    } catch (const std::exception& e) {
      verdict = "FAIL";
      detail = e.what();
      ++failures;
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (verdict == "PASS" && elapsed > c.budget_seconds) {
      verdict = "FAIL";
      detail = "runtime " + std::to_string(elapsed) + "s exceeds budget";
      ++failures;
    }
    std::printf("[%d/9] %s  %s (%.2fs)\n", c.id, verdict.c_str(), c.label.c_str(), elapsed);
    if (!detail.empty()) std::printf("      %s\n", detail.c_str());
  }
  if (failures) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
