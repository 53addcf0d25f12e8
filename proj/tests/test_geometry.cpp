#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "conred/geometry.hpp"
#include "testutil.hpp"

using namespace conred;
using testutil::max_abs;

namespace {

Chart r2() { return Chart::box({"x1", "x2"}, -1.0, 1.0); }

ScalarExpr ex(const std::string& s) { return parse_expression(s); }

/// Finite-difference curvature oracle: evaluates
///   (R(d_i,d_j) d_k)^l = D_i[(nabla_j d_k)^l] - D_j[(nabla_i d_k)^l]
///                        + G^l_{mi} G^m_{kj} - G^l_{mj} G^m_{ki}
/// using only numeric evaluation of the Christoffels (central differences
/// for the derivative terms), independent of the symbolic route.
double fd_curvature(const ConnectionCoeffs& conn, const Point& p, int l, int k, int i, int j,
                    double h = 1e-5) {
  const int d = conn.dim();
  auto gamma_at = [&](Point q, int kk, int jj, int ii) {
    return conn.gamma(kk, jj, ii).evaluate(conn.chart().env(q));
  };
  auto d_dir = [&](int dir, int kk, int jj, int ii) {
    Point up = p, down = p;
    up[dir] += h;
    down[dir] -= h;
    return (gamma_at(up, kk, jj, ii) - gamma_at(down, kk, jj, ii)) / (2.0 * h);
  };
  double r = d_dir(i, l, k, j) - d_dir(j, l, k, i);
  for (int m = 0; m < d; ++m)
    r += gamma_at(p, l, m, i) * gamma_at(p, m, k, j) - gamma_at(p, l, m, j) * gamma_at(p, m, k, i);
  return r;
}

}  // namespace

TEST_CASE("covariant derivative in coordinates") {
  const Chart chart = r2();
  const ConnectionCoeffs flat = ConnectionCoeffs::zero(chart);

  SECTION("flat connection reduces to the directional derivative") {
    VectorFieldExpr y(chart, {ex("x1"), ex("0")});
    auto res = covariant_derivative_vector(flat, VectorFieldExpr::basis(chart, 0), y);
    REQUIRE(res.components[0].str() == "1");
    REQUIRE(res.components[1].str() == "0");
  }
  SECTION("zero field maps to zero") {
    ConnectionCoeffs conn = ConnectionCoeffs::zero(chart);
    conn.set_gamma(0, 1, 1, ex("x1"));
    auto res = covariant_derivative_vector(conn, VectorFieldExpr::basis(chart, 1),
                                           VectorFieldExpr::zero(chart));
    for (const auto& c : res.components) REQUIRE(c.is_zero_literal());
  }
  SECTION("Gamma^1_22 = x1 against the transport oracle") {
    ConnectionCoeffs conn = ConnectionCoeffs::zero(chart);
    conn.set_gamma(0, 1, 1, ex("x1"));
    auto res = covariant_derivative_vector(conn, VectorFieldExpr::basis(chart, 1),
                                           VectorFieldExpr::basis(chart, 1));
    REQUIRE(res.components[0].str() == "x1");
    REQUIRE(res.components[1].str() == "0");

    // oracle: finite-difference of parallel transport along x(t) = (0.4, t)
    PathSpec path(chart, {ex("0.4"), ScalarExpr::variable("t")}, 0.0, 0.5);
    auto fd = covariant_derivative_via_transport(conn, VectorFieldExpr::basis(chart, 1), path,
                                                 1e-4, 200);
    REQUIRE(std::abs(fd[0] - 0.4) < 1e-4);
    REQUIRE(std::abs(fd[1]) < 1e-6);
  }
  SECTION("chart mismatch is rejected") {
    const Chart other = Chart::box({"u", "v"}, -1.0, 1.0);
    REQUIRE_THROWS_AS(covariant_derivative_vector(flat, VectorFieldExpr::basis(other, 0),
                                                  VectorFieldExpr::basis(other, 0)),
                      GeometryError);
  }
}

TEST_CASE("torsion tensor") {
  const Chart chart = r2();
  SECTION("symmetric connections are torsionless") {
    std::mt19937_64 gen(5);
    auto conn = testutil::random_symmetric_connection(gen, chart, -1.0, 1.0);
    auto t = torsion_tensor(conn);
    for (const auto& pt : chart.sample_points()) {
      const EvalEnv env = chart.env(pt);
      for (const auto& e : t.flat()) REQUIRE(std::abs(e.evaluate(env)) == 0.0);
    }
  }
  SECTION("Gamma^1_21 = 1 gives T^1_12 = 1") {
    ConnectionCoeffs conn = ConnectionCoeffs::zero(chart);
    conn.set_gamma(0, 1, 0, ex("1"));  // nabla_{d1} d2 = d1
    auto t = torsion_tensor(conn);
    REQUIRE(t.at(0, 0, 1).str() == "1");
    REQUIRE(t.at(0, 1, 0).str() == "-1");
  }
  SECTION("antisymmetry holds identically") {
    std::mt19937_64 gen(6);
    ConnectionCoeffs conn = ConnectionCoeffs::zero(chart);
    for (int k = 0; k < 2; ++k)
      for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 2; ++i)
          conn.set_gamma(k, j, i, testutil::random_quadratic(gen, chart, -1.0, 1.0));
    auto t = torsion_tensor(conn);
    for (const auto& pt : chart.sample_points()) {
      const EvalEnv env = chart.env(pt);
      for (int k = 0; k < 2; ++k)
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j)
            REQUIRE(std::abs(t.at(k, i, j).evaluate(env) + t.at(k, j, i).evaluate(env)) == 0.0);
    }
  }
}

TEST_CASE("curvature tensor") {
  const Chart chart = r2();
  SECTION("flat is flat") {
    auto r = curvature_tensor(ConnectionCoeffs::zero(chart));
    for (const auto& e : r.flat()) REQUIRE(e.is_zero_literal());
  }
  SECTION("repeated direction slots vanish") {
    std::mt19937_64 gen(7);
    auto conn = testutil::random_symmetric_connection(gen, chart, -1.0, 1.0);
    auto r = curvature_tensor(conn);
    for (int l = 0; l < 2; ++l)
      for (int k = 0; k < 2; ++k)
        for (int i = 0; i < 2; ++i) REQUIRE(r.at(l, k, i, i).is_zero_literal());
  }
  SECTION("Gamma^1_11 = x2: R^1_112 = -1 at every sample point") {
    ConnectionCoeffs conn = ConnectionCoeffs::zero(chart);
    conn.set_gamma(0, 0, 0, ex("x2"));
    auto r = curvature_tensor(conn);
    for (const auto& pt : chart.sample_points()) {
      const EvalEnv env = chart.env(pt);
      const double val = r.at(0, 0, 0, 1).evaluate(env);
      REQUIRE(val == -1.0);
      // oracle: second-order finite differences of the defining commutator
      REQUIRE(std::abs(fd_curvature(conn, pt, 0, 0, 0, 1) - val) < 1e-8);
    }
  }
  SECTION("symbolic curvature matches the finite-difference commutator") {
    std::mt19937_64 gen(8);
    auto conn = testutil::random_symmetric_connection(gen, chart, -0.5, 0.5);
    auto r = curvature_tensor(conn);
    auto pts = chart.sample_points(kDefaultSeed, 5);
    for (const auto& pt : pts) {
      const EvalEnv env = chart.env(pt);
      for (int l = 0; l < 2; ++l)
        for (int k = 0; k < 2; ++k)
          REQUIRE(std::abs(r.at(l, k, 0, 1).evaluate(env) - fd_curvature(conn, pt, l, k, 0, 1)) <
                  1e-6);
    }
  }
  SECTION("first Bianchi identity for symmetric connections") {
    std::mt19937_64 gen(9);
    for (int trial = 0; trial < 5; ++trial) {
      auto conn = testutil::random_symmetric_connection(gen, chart, -1.0, 1.0);
      auto r = curvature_tensor(conn);
      for (const auto& pt : chart.sample_points(kDefaultSeed, 10)) {
        const EvalEnv env = chart.env(pt);
        for (int l = 0; l < 2; ++l)
          for (int k = 0; k < 2; ++k)
            for (int i = 0; i < 2; ++i)
              for (int j = 0; j < 2; ++j) {
                const double cyc = r.at(l, k, i, j).evaluate(env) +
                                   r.at(l, i, j, k).evaluate(env) +
                                   r.at(l, j, k, i).evaluate(env);
                REQUIRE(std::abs(cyc) <= 1e-8);
              }
      }
    }
  }
}

TEST_CASE("transpose and symmetric part") {
  const Chart chart = r2();
  ConnectionCoeffs conn = ConnectionCoeffs::zero(chart);
  conn.set_gamma(0, 1, 0, ex("1"));

  auto t = transpose_connection(conn);
  REQUIRE(t.gamma(0, 0, 1).str() == "1");
  REQUIRE(t.gamma(0, 1, 0).str() == "0");

  SECTION("involution") {
    std::mt19937_64 gen(10);
    ConnectionCoeffs c = ConnectionCoeffs::zero(chart);
    for (int k = 0; k < 2; ++k)
      for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 2; ++i)
          c.set_gamma(k, j, i, testutil::random_quadratic(gen, chart, -1.0, 1.0));
    auto back = transpose_connection(transpose_connection(c));
    for (int k = 0; k < 2; ++k)
      for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 2; ++i) REQUIRE(back.gamma(k, j, i).same_structure(c.gamma(k, j, i)));
  }
  SECTION("symmetric connection is fixed by transpose and symmetric part") {
    std::mt19937_64 gen(11);
    auto c = testutil::random_symmetric_connection(gen, chart, -1.0, 1.0);
    auto tc = transpose_connection(c);
    auto sp = symmetric_part(c);
    for (const auto& pt : chart.sample_points(kDefaultSeed, 5)) {
      const EvalEnv env = chart.env(pt);
      for (int k = 0; k < 2; ++k)
        for (int j = 0; j < 2; ++j)
          for (int i = 0; i < 2; ++i) {
            REQUIRE(tc.gamma(k, j, i).evaluate(env) ==
                    Catch::Approx(c.gamma(k, j, i).evaluate(env)));
            REQUIRE(sp.gamma(k, j, i).evaluate(env) ==
                    Catch::Approx(c.gamma(k, j, i).evaluate(env)));
          }
    }
  }
  SECTION("symmetric part averages and kills torsion") {
    auto sp = symmetric_part(conn);
    REQUIRE(sp.gamma(0, 1, 0).evaluate({{"x1", 0.0}, {"x2", 0.0}}) == 0.5);
    REQUIRE(sp.gamma(0, 0, 1).evaluate({{"x1", 0.0}, {"x2", 0.0}}) == 0.5);
    auto t2 = torsion_tensor(sp);
    for (const auto& pt : chart.sample_points()) {
      const EvalEnv env = chart.env(pt);
      for (const auto& e : t2.flat()) REQUIRE(std::abs(e.evaluate(env)) == 0.0);
    }
  }
}

TEST_CASE("parallel transport") {
  SECTION("flat connection leaves the vector unchanged") {
    const Chart chart = r2();
    PathSpec path(chart, {ex("t - t^2"), ScalarExpr::variable("t")}, 0.0, 0.9);
    auto v = parallel_transport(ConnectionCoeffs::zero(chart), path, {0.3, -0.7}, 100);
    REQUIRE(v[0] == 0.3);
    REQUIRE(v[1] == -0.7);
  }
  SECTION("zero-length path is the identity") {
    const Chart chart = r2();
    PathSpec path(chart, {ScalarExpr::variable("t"), ex("0")}, 0.5, 0.5);
    ConnectionCoeffs conn = ConnectionCoeffs::zero(chart);
    conn.set_gamma(0, 0, 0, ex("1"));
    auto v = parallel_transport(conn, path, {2.0, 3.0}, 10);
    REQUIRE(v[0] == 2.0);
    REQUIRE(v[1] == 3.0);
  }
  SECTION("closed form: Gamma = 1 on the line transports 1 to exp(-1)") {
    const Chart line = Chart::box({"x1"}, -0.5, 1.5);
    ConnectionCoeffs conn = ConnectionCoeffs::zero(line);
    conn.set_gamma(0, 0, 0, ex("1"));
    PathSpec path(line, {ScalarExpr::variable("t")}, 0.0, 1.0);
    auto v = parallel_transport(conn, path, {1.0}, 1000);
    REQUIRE(std::abs(v[0] - std::exp(-1.0)) < 1e-8);
  }
}

TEST_CASE("transport-based covariant derivative oracle") {
  const Chart chart = r2();
  SECTION("flat + constant field gives zero") {
    PathSpec path(chart, {ScalarExpr::variable("t"), ex("0")}, 0.0, 0.5);
    auto fd = covariant_derivative_via_transport(ConnectionCoeffs::zero(chart),
                                                 VectorFieldExpr::constant(chart, {1.0, 2.0}),
                                                 path, 1e-4, 100);
    REQUIRE(max_abs(fd) < 1e-10);
  }
  SECTION("flat + Y=(x1,0) along x1 gives (1,0)") {
    PathSpec path(chart, {ScalarExpr::variable("t"), ex("0")}, 0.0, 0.5);
    VectorFieldExpr y(chart, {ex("x1"), ex("0")});
    auto fd = covariant_derivative_via_transport(ConnectionCoeffs::zero(chart), y, path, 1e-4, 100);
    REQUIRE(std::abs(fd[0] - 1.0) < 1e-5);
    REQUIRE(std::abs(fd[1]) < 1e-5);
  }
  SECTION("agreement on random polynomial triples") {
    std::mt19937_64 gen(12);
    for (int trial = 0; trial < 5; ++trial) {
      auto conn = testutil::random_symmetric_connection(gen, chart, -0.5, 0.5);
      VectorFieldExpr y(chart, {testutil::random_quadratic(gen, chart, -1.0, 1.0),
                                testutil::random_quadratic(gen, chart, -1.0, 1.0)});
      const double px = testutil::urand(gen, -0.3, 0.3);
      const double py = testutil::urand(gen, -0.3, 0.3);
      const double dx = testutil::urand(gen, -0.5, 0.5);
      const double dy = testutil::urand(gen, -0.5, 0.5);
      PathSpec path(chart,
                    {ScalarExpr::constant(px) + ScalarExpr::constant(dx) * ScalarExpr::variable("t"),
                     ScalarExpr::constant(py) + ScalarExpr::constant(dy) * ScalarExpr::variable("t")},
                    0.0, 0.5);
      auto sym_field =
          covariant_derivative_vector(conn, VectorFieldExpr::constant(chart, {dx, dy}), y);
      auto sym = sym_field.evaluate(path.point_at(0.0));
      auto fd = covariant_derivative_via_transport(conn, y, path, 1e-4, 200);
      const double scale = 1.0 + max_abs(sym);
      for (int i = 0; i < 2; ++i) REQUIRE(std::abs(sym[i] - fd[i]) <= 1e-4 * scale);
    }
  }
}

TEST_CASE("coordinate changes") {
  const Chart old_chart = Chart::box({"x1", "x2"}, -2.0, 2.0);

  SECTION("identity map leaves the connection unchanged") {
    std::mt19937_64 gen(13);
    auto conn = testutil::random_symmetric_connection(gen, old_chart, -1.0, 1.0);
    const Chart uchart = Chart::box({"u1", "u2"}, -2.0, 2.0);
    auto moved = change_coordinates(
        conn, uchart, {ScalarExpr::variable("x1"), ScalarExpr::variable("x2")},
        {ScalarExpr::variable("u1"), ScalarExpr::variable("u2")});
    for (const auto& pt : uchart.sample_points(kDefaultSeed, 10)) {
      const EvalEnv env_new = uchart.env(pt);
      const EvalEnv env_old = old_chart.env(pt);
      for (int k = 0; k < 2; ++k)
        for (int j = 0; j < 2; ++j)
          for (int i = 0; i < 2; ++i)
            REQUIRE(moved.gamma(k, j, i).evaluate(env_new) ==
                    Catch::Approx(conn.gamma(k, j, i).evaluate(env_old)).margin(1e-12));
    }
  }
  SECTION("flat stays flat under a linear map") {
    const Chart uchart = Chart::box({"u1", "u2"}, -4.0, 4.0);
    auto moved = change_coordinates(ConnectionCoeffs::zero(old_chart), uchart,
                                    {ex("x1 + x2"), ex("x1 - x2")},
                                    {ex("(u1 + u2) / 2"), ex("(u1 - u2) / 2")});
    REQUIRE(moved.structurally_zero());
  }
  SECTION("flat through (u = x1, v = x2 + x1^2): transport commutes") {
    const Chart vchart =
        Chart(std::vector<std::string>{"u", "v"}, {{-2.0, 2.0}, {-6.0, 6.0}});
    const ConnectionCoeffs flat = ConnectionCoeffs::zero(old_chart);
    auto moved = change_coordinates(flat, vchart, {ex("x1"), ex("x2 + x1^2")},
                                    {ex("u"), ex("v - u^2")});
    REQUIRE_FALSE(moved.structurally_zero());

    std::mt19937_64 gen(14);
    for (int trial = 0; trial < 3; ++trial) {
      const double ax = testutil::urand(gen, -0.5, 0.5);
      const double ay = testutil::urand(gen, -0.5, 0.5);
      const double bx = testutil::urand(gen, -1.0, 1.0);
      const double by = testutil::urand(gen, -1.0, 1.0);
      PathSpec old_path(
          old_chart,
          {ScalarExpr::constant(ax) + ScalarExpr::constant(bx) * ScalarExpr::variable("t"),
           ScalarExpr::constant(ay) + ScalarExpr::constant(by) * ScalarExpr::variable("t")},
          0.0, 1.0);
      // image path under the forward map
      std::vector<ScalarExpr> mapped = {
          old_path.components[0],
          (old_path.components[1] + ScalarExpr::pow(old_path.components[0], 2)).simplified()};
      PathSpec new_path(vchart, mapped, 0.0, 1.0);

      const std::vector<double> v0{0.8, -0.4};
      const Point x_start = old_path.point_at(0.0);
      const Point x_end = old_path.point_at(1.0);
      auto jac = [](const Point& x) {
        Matrix j(2, 2);
        j << 1.0, 0.0, 2.0 * x[0], 1.0;
        return j;
      };
      Vector w0 = jac(x_start) * Vector::Map(v0.data(), 2);
      auto w1 = parallel_transport(moved, new_path, {w0(0), w0(1)}, 1000);
      auto v1 = parallel_transport(flat, old_path, v0, 1000);  // = v0
      Vector expected = jac(x_end) * Vector::Map(v1.data(), 2);
      REQUIRE(std::abs(w1[0] - expected(0)) < 1e-6);
      REQUIRE(std::abs(w1[1] - expected(1)) < 1e-6);
    }
  }
  SECTION("non-invertible Jacobian is rejected") {
    const Chart uchart = Chart::box({"u1", "u2"}, -1.0, 1.0);
    REQUIRE_THROWS_AS(change_coordinates(ConnectionCoeffs::zero(old_chart), uchart,
                                         {ex("x1"), ex("x1")}, {ex("u1"), ex("u1")}),
                      GeometryError);
  }
}

TEST_CASE("frame to coordinate connection") {
  const Chart chart = r2();
  SECTION("coordinate frame passes coefficients through") {
    FrameField frame(chart, {VectorFieldExpr::basis(chart, 0), VectorFieldExpr::basis(chart, 1)});
    std::mt19937_64 gen(15);
    Tensor3<ScalarExpr> coeffs(2, ScalarExpr::constant(0.0));
    for (int c = 0; c < 2; ++c)
      for (int b = 0; b < 2; ++b)
        for (int a = 0; a < 2; ++a)
          coeffs.at(c, b, a) = testutil::random_quadratic(gen, chart, -1.0, 1.0);
    auto conn = frame_to_coordinate_connection(frame, coeffs);
    for (const auto& pt : chart.sample_points(kDefaultSeed, 10)) {
      const EvalEnv env = chart.env(pt);
      for (int k = 0; k < 2; ++k)
        for (int j = 0; j < 2; ++j)
          for (int i = 0; i < 2; ++i)
            REQUIRE(conn.gamma(k, j, i).evaluate(env) ==
                    Catch::Approx(coeffs.at(k, j, i).evaluate(env)).margin(1e-12));
    }
  }
  SECTION("shear frame: covariant derivatives reproduce the frame relations") {
    // E_1 = d1, E_2 = x1 d1 + d2
    FrameField frame(chart, {VectorFieldExpr::basis(chart, 0),
                             VectorFieldExpr(chart, {ex("x1"), ex("1")})});
    std::mt19937_64 gen(16);
    Tensor3<ScalarExpr> coeffs(2, ScalarExpr::constant(0.0));
    for (int c = 0; c < 2; ++c)
      for (int b = 0; b < 2; ++b)
        for (int a = 0; a < 2; ++a)
          coeffs.at(c, b, a) = ScalarExpr::constant(testutil::urand(gen, -1.0, 1.0));
    auto conn = frame_to_coordinate_connection(frame, coeffs);

    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        auto lhs = covariant_derivative_vector(conn, frame.vectors[a], frame.vectors[b]);
        for (const auto& pt : chart.sample_points(kDefaultSeed, 10)) {
          const EvalEnv env = chart.env(pt);
          for (int k = 0; k < 2; ++k) {
            double rhs = 0.0;
            for (int c = 0; c < 2; ++c)
              rhs +=
                  coeffs.at(c, b, a).evaluate(env) * frame.vectors[c].components[k].evaluate(env);
            REQUIRE(std::abs(lhs.components[k].evaluate(env) - rhs) <= 1e-9);
          }
        }
      }
  }
  SECTION("singular frame matrix is rejected") {
    FrameField frame(chart, {VectorFieldExpr::basis(chart, 0), VectorFieldExpr::basis(chart, 0)});
    Tensor3<ScalarExpr> coeffs(2, ScalarExpr::constant(0.0));
    REQUIRE_THROWS_AS(frame_to_coordinate_connection(frame, coeffs), GeometryError);
  }
}

TEST_CASE("paths validate their domain and parameter") {
  const Chart chart = r2();
  REQUIRE_THROWS_AS(PathSpec(chart, {ex("3*t"), ex("0")}, 0.0, 1.0), GeometryError);
  REQUIRE_THROWS_AS(PathSpec(chart, {ex("x1"), ex("0")}, 0.0, 1.0), GeometryError);
}
