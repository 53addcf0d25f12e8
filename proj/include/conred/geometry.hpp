#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "conred/chart.hpp"
#include "conred/expr.hpp"
#include "conred/numeric.hpp"
#include "conred/tensor.hpp"

// Connections in coordinate form.
//
// Index convention, used everywhere in this library and in the scene file
// format:   gamma.at(k, j, i)  is the d/dx^k component of  nabla_{d/dx^i} d/dx^j,
// i.e. the last index is the differentiation direction.

namespace conred {

struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using ExprMatrix = std::vector<std::vector<ScalarExpr>>;

inline void require_same_coords(const Chart& a, const Chart& b, const char* what) {
  if (!a.same_coords(b)) throw GeometryError(std::string("chart mismatch in ") + what);
}

/// Sum of terms; each term is simplified and literal zeros are dropped so
/// sparse tensors stay sparse.
inline ScalarExpr sum_simplified(const std::vector<ScalarExpr>& terms) {
  ScalarExpr acc;
  bool have = false;
  for (const auto& t : terms) {
    ScalarExpr s = t.simplified();
    if (s.is_zero_literal()) continue;
    acc = have ? (acc + s).simplified() : s;
    have = true;
  }
  return have ? acc : ScalarExpr::constant(0.0);
}

// ---------------------------------------------------------------------------
// Fields
// ---------------------------------------------------------------------------

struct VectorFieldExpr {
  Chart chart;
  std::vector<ScalarExpr> components;

  VectorFieldExpr() = default;
  VectorFieldExpr(Chart c, std::vector<ScalarExpr> comps)
      : chart(std::move(c)), components(std::move(comps)) {
    if (static_cast<int>(components.size()) != chart.dim())
      throw GeometryError("vector field component count != chart dimension");
  }

  static VectorFieldExpr zero(const Chart& c) {
    return VectorFieldExpr(c, std::vector<ScalarExpr>(c.dim(), ScalarExpr::constant(0.0)));
  }

  /// The coordinate basis field d/dx^i.
  static VectorFieldExpr basis(const Chart& c, int i) {
    auto f = zero(c);
    f.components.at(i) = ScalarExpr::constant(1.0);
    return f;
  }

  /// A constant field with the given components.
  static VectorFieldExpr constant(const Chart& c, const std::vector<double>& v) {
    if (static_cast<int>(v.size()) != c.dim()) throw GeometryError("constant field dimension mismatch");
    std::vector<ScalarExpr> comps;
    comps.reserve(v.size());
    for (double x : v) comps.push_back(ScalarExpr::constant(x));
    return VectorFieldExpr(c, std::move(comps));
  }

  std::vector<double> evaluate(const Point& p) const {
    const EvalEnv env = chart.env(p);
    std::vector<double> out(components.size());
    for (std::size_t i = 0; i < components.size(); ++i) out[i] = components[i].evaluate(env);
    return out;
  }
};

struct FrameField {
  Chart chart;
  std::vector<VectorFieldExpr> vectors;

  FrameField() = default;
  FrameField(Chart c, std::vector<VectorFieldExpr> vs) : chart(std::move(c)), vectors(std::move(vs)) {
    if (static_cast<int>(vectors.size()) != chart.dim())
      throw GeometryError("frame needs exactly dim vector fields");
    for (const auto& v : vectors) require_same_coords(chart, v.chart, "FrameField");
  }

  /// Column a holds frame vector a.
  ExprMatrix matrix() const {
    const int d = chart.dim();
    ExprMatrix m(d, std::vector<ScalarExpr>(d));
    for (int a = 0; a < d; ++a)
      for (int i = 0; i < d; ++i) m[i][a] = vectors[a].components[i];
    return m;
  }

  Matrix evaluate(const Point& p) const {
    const int d = chart.dim();
    Matrix m(d, d);
    const EvalEnv env = chart.env(p);
    for (int a = 0; a < d; ++a)
      for (int i = 0; i < d; ++i) m(i, a) = vectors[a].components[i].evaluate(env);
    return m;
  }

  double min_abs_det(const std::vector<Point>& pts) const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : pts) best = std::min(best, std::abs(evaluate(p).determinant()));
    return best;
  }
};

// ---------------------------------------------------------------------------
// Connections
// ---------------------------------------------------------------------------

class ConnectionCoeffs {
 public:
  ConnectionCoeffs() = default;

  ConnectionCoeffs(Chart chart, Tensor3<ScalarExpr> gamma)
      : chart_(std::move(chart)), gamma_(std::move(gamma)) {
    if (gamma_.dim() != chart_.dim()) throw GeometryError("gamma shape != chart dimension cubed");
  }

  static ConnectionCoeffs zero(const Chart& c) {
    return ConnectionCoeffs(c, Tensor3<ScalarExpr>(c.dim(), ScalarExpr::constant(0.0)));
  }

  const Chart& chart() const { return chart_; }
  int dim() const { return chart_.dim(); }

  const ScalarExpr& gamma(int k, int j, int i) const { return gamma_.at(k, j, i); }
  void set_gamma(int k, int j, int i, ScalarExpr e) { gamma_.at(k, j, i) = std::move(e); }
  const Tensor3<ScalarExpr>& tensor() const { return gamma_; }

  Tensor3<double> evaluate(const Point& p) const {
    const int d = dim();
    Tensor3<double> out(d, 0.0);
    const EvalEnv env = chart_.env(p);
    for (int k = 0; k < d; ++k)
      for (int j = 0; j < d; ++j)
        for (int i = 0; i < d; ++i) out.at(k, j, i) = gamma_.at(k, j, i).evaluate(env);
    return out;
  }

  bool structurally_zero() const {
    for (const auto& e : gamma_.flat())
      if (!e.simplified().is_zero_literal()) return false;
    return true;
  }

  /// Max |gamma[k][j][i] - gamma[k][i][j]| over the given points.
  double symmetry_residual(const std::vector<Point>& pts) const {
    const int d = dim();
    double worst = 0.0;
    for (const auto& p : pts) {
      const auto g = evaluate(p);
      for (int k = 0; k < d; ++k)
        for (int j = 0; j < d; ++j)
          for (int i = 0; i < j; ++i)
            worst = std::max(worst, std::abs(g.at(k, j, i) - g.at(k, i, j)));
    }
    return worst;
  }

  /// Nonzero entries only, for fast repeated evaluation along paths.
  struct SparseEntry {
    int k, j, i;
    ScalarExpr expr;
  };
  std::vector<SparseEntry> sparse_entries() const {
    std::vector<SparseEntry> out;
    const int d = dim();
    for (int k = 0; k < d; ++k)
      for (int j = 0; j < d; ++j)
        for (int i = 0; i < d; ++i) {
          ScalarExpr e = gamma_.at(k, j, i).simplified();
          if (!e.is_zero_literal()) out.push_back({k, j, i, std::move(e)});
        }
    return out;
  }

 private:
  Chart chart_;
  Tensor3<ScalarExpr> gamma_;
};

/// (nabla_X Y)^k = X^i d_i Y^k + Gamma^k_{ji} Y^j X^i.
inline VectorFieldExpr covariant_derivative_vector(const ConnectionCoeffs& conn,
                                                   const VectorFieldExpr& x,
                                                   const VectorFieldExpr& y) {
  require_same_coords(conn.chart(), x.chart, "covariant_derivative_vector");
  require_same_coords(conn.chart(), y.chart, "covariant_derivative_vector");
  const int d = conn.dim();
  std::vector<ScalarExpr> comps(d);
  for (int k = 0; k < d; ++k) {
    std::vector<ScalarExpr> terms;
    for (int i = 0; i < d; ++i) {
      terms.push_back(x.components[i] * y.components[k].differentiate(conn.chart().coord(i)));
      for (int j = 0; j < d; ++j)
        terms.push_back(conn.gamma(k, j, i) * y.components[j] * x.components[i]);
    }
    comps[k] = sum_simplified(terms);
  }
  return VectorFieldExpr(conn.chart(), std::move(comps));
}

/// T[k][i][j] = (T(d_i, d_j))^k = Gamma^k_{ji} - Gamma^k_{ij}; antisymmetric
/// in (i, j) by construction.
inline Tensor3<ScalarExpr> torsion_tensor(const ConnectionCoeffs& conn) {
  const int d = conn.dim();
  Tensor3<ScalarExpr> t(d, ScalarExpr::constant(0.0));
  for (int k = 0; k < d; ++k)
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j) {
        ScalarExpr e = (conn.gamma(k, j, i) - conn.gamma(k, i, j)).simplified();
        t.at(k, i, j) = e;
        t.at(k, j, i) = (-e).simplified();
      }
  return t;
}

/// R[l][k][i][j] = (R(d_i, d_j) d_k)^l
///              = d_i Gamma^l_{kj} - d_j Gamma^l_{ki}
///                + Gamma^l_{mi} Gamma^m_{kj} - Gamma^l_{mj} Gamma^m_{ki};
/// antisymmetric in (i, j) by construction.
inline Tensor4<ScalarExpr> curvature_tensor(const ConnectionCoeffs& conn) {
  const int d = conn.dim();
  Tensor4<ScalarExpr> r(d);
  for (int l = 0; l < d; ++l)
    for (int k = 0; k < d; ++k)
      for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) {
          if (i == j) {
            r.at(l, k, i, j) = ScalarExpr::constant(0.0);
            continue;
          }
          std::vector<ScalarExpr> terms;
          terms.push_back(conn.gamma(l, k, j).differentiate(conn.chart().coord(i)));
          terms.push_back(-(conn.gamma(l, k, i).differentiate(conn.chart().coord(j))));
          for (int m = 0; m < d; ++m) {
            terms.push_back(conn.gamma(l, m, i) * conn.gamma(m, k, j));
            terms.push_back(-(conn.gamma(l, m, j) * conn.gamma(m, k, i)));
          }
          ScalarExpr e = sum_simplified(terms);
          r.at(l, k, i, j) = e;
          r.at(l, k, j, i) = (-e).simplified();
        }
  return r;
}

/// Swap of the lower indices; involutive.
inline ConnectionCoeffs transpose_connection(const ConnectionCoeffs& conn) {
  const int d = conn.dim();
  ConnectionCoeffs out = ConnectionCoeffs::zero(conn.chart());
  for (int k = 0; k < d; ++k)
    for (int j = 0; j < d; ++j)
      for (int i = 0; i < d; ++i) out.set_gamma(k, j, i, conn.gamma(k, i, j));
  return out;
}

/// (gamma + transpose(gamma)) / 2; the result has vanishing torsion.
inline ConnectionCoeffs symmetric_part(const ConnectionCoeffs& conn) {
  const int d = conn.dim();
  ConnectionCoeffs out = ConnectionCoeffs::zero(conn.chart());
  const ScalarExpr half = ScalarExpr::constant(0.5);
  for (int k = 0; k < d; ++k)
    for (int j = 0; j < d; ++j)
      for (int i = 0; i < d; ++i)
        out.set_gamma(k, j, i, (half * (conn.gamma(k, j, i) + conn.gamma(k, i, j))).simplified());
  return out;
}

// ---------------------------------------------------------------------------
// Symbolic matrix inversion (Gauss-Jordan with constant-pivot preference)
// ---------------------------------------------------------------------------

inline ExprMatrix identity_expr_matrix(int n) {
  ExprMatrix m(n, std::vector<ScalarExpr>(n, ScalarExpr::constant(0.0)));
  for (int i = 0; i < n; ++i) m[i][i] = ScalarExpr::constant(1.0);
  return m;
}

/// Inverts a matrix of expressions.  Pivots prefer entries that are literal
/// constants, so unit-triangular frames invert without introducing any
/// division nodes.  Entries that are structurally nonzero are assumed
/// nonzero on the chart domain (frames are validated separately).
inline ExprMatrix invert_expr_matrix(ExprMatrix m) {
  const int n = static_cast<int>(m.size());
  for (auto& row : m) {
    if (static_cast<int>(row.size()) != n) throw GeometryError("invert_expr_matrix: not square");
    for (auto& e : row) e = e.simplified();
  }
  ExprMatrix inv = identity_expr_matrix(n);

  for (int col = 0; col < n; ++col) {
    int pivot = -1;
    double best = 0.0;
    for (int r = col; r < n; ++r) {
      if (auto v = m[r][col].literal()) {
        if (std::abs(*v) > best) {
          best = std::abs(*v);
          pivot = r;
        }
      }
    }
    if (pivot < 0) {
      for (int r = col; r < n; ++r)
        if (!m[r][col].is_zero_literal()) {
          pivot = r;
          break;
        }
    }
    if (pivot < 0) throw GeometryError("invert_expr_matrix: structurally singular matrix");
    std::swap(m[pivot], m[col]);
    std::swap(inv[pivot], inv[col]);

    const ScalarExpr p = m[col][col];
    if (!p.is_one_literal()) {
      for (int c = 0; c < n; ++c) {
        m[col][c] = (m[col][c] / p).simplified();
        inv[col][c] = (inv[col][c] / p).simplified();
      }
    }
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const ScalarExpr f = m[r][col];
      if (f.is_zero_literal()) continue;
      for (int c = 0; c < n; ++c) {
        m[r][c] = (m[r][c] - f * m[col][c]).simplified();
        inv[r][c] = (inv[r][c] - f * inv[col][c]).simplified();
      }
    }
  }
  return inv;
}

// ---------------------------------------------------------------------------
// Coordinate changes
// ---------------------------------------------------------------------------

/// Transports a connection through the coordinate change
///   forward : new coords as expressions in the old chart's coordinates,
///   inverse : old coords as expressions in the new chart's coordinates.
/// forward o inverse must be the identity to 1e-10 on new-chart samples.
inline ConnectionCoeffs change_coordinates(const ConnectionCoeffs& conn, const Chart& new_chart,
                                           const std::vector<ScalarExpr>& forward,
                                           const std::vector<ScalarExpr>& inverse,
                                           std::uint64_t seed = kDefaultSeed) {
  const int d = conn.dim();
  if (new_chart.dim() != d || static_cast<int>(forward.size()) != d ||
      static_cast<int>(inverse.size()) != d)
    throw GeometryError("change_coordinates: dimension mismatch");

  const Chart& old_chart = conn.chart();

  // Validate forward o inverse = id and Jacobian invertibility on samples.
  for (const auto& p : new_chart.sample_points(seed)) {
    const EvalEnv env_new = new_chart.env(p);
    Point x(d);
    for (int i = 0; i < d; ++i) x[i] = inverse[i].evaluate(env_new);
    const EvalEnv env_old = old_chart.env(x);
    for (int a = 0; a < d; ++a) {
      if (std::abs(forward[a].evaluate(env_old) - p[a]) > 1e-10)
        throw GeometryError("change_coordinates: forward o inverse is not the identity");
    }
    Matrix jac(d, d);
    for (int i = 0; i < d; ++i)
      for (int a = 0; a < d; ++a)
        jac(i, a) = inverse[i].differentiate(new_chart.coord(a)).evaluate(env_new);
    if (std::abs(jac.determinant()) < 1e-10)
      throw GeometryError("change_coordinates: non-invertible Jacobian at a sample point");
  }

  // Substitution x -> inverse(u) pulls old-chart expressions to the new chart.
  std::unordered_map<std::string, ScalarExpr> to_new;
  for (int i = 0; i < d; ++i) to_new.emplace(old_chart.coord(i), inverse[i]);
  auto pulled = [&](const ScalarExpr& e) { return e.substitute(to_new).simplified(); };

  // d(new^g)/d(old^k), expressed on the new chart.
  ExprMatrix fwd_jac(d, std::vector<ScalarExpr>(d));
  for (int g = 0; g < d; ++g)
    for (int k = 0; k < d; ++k) fwd_jac[g][k] = pulled(forward[g].differentiate(old_chart.coord(k)));

  // d(old^i)/d(new^a) and second derivatives, already on the new chart.
  ExprMatrix inv_jac(d, std::vector<ScalarExpr>(d));
  for (int i = 0; i < d; ++i)
    for (int a = 0; a < d; ++a) inv_jac[i][a] = inverse[i].differentiate(new_chart.coord(a)).simplified();

  ConnectionCoeffs out = ConnectionCoeffs::zero(new_chart);
  for (int g = 0; g < d; ++g)
    for (int b = 0; b < d; ++b)
      for (int a = 0; a < d; ++a) {
        std::vector<ScalarExpr> terms;
        for (int k = 0; k < d; ++k) {
          ScalarExpr hess = inv_jac[k][a].differentiate(new_chart.coord(b)).simplified();
          std::vector<ScalarExpr> inner;
          inner.push_back(hess);
          for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
              inner.push_back(inv_jac[i][a] * inv_jac[j][b] * pulled(conn.gamma(k, j, i)));
          terms.push_back(fwd_jac[g][k] * sum_simplified(inner));
        }
        out.set_gamma(g, b, a, sum_simplified(terms));
      }
  return out;
}

// ---------------------------------------------------------------------------
// Anholonomic frames
// ---------------------------------------------------------------------------

/// Converts connection coefficients given against a frame {E_a}
/// (frame_coeffs.at(c, b, a) = E_c component of nabla_{E_a} E_b) into
/// coordinate Christoffel symbols.
inline ConnectionCoeffs frame_to_coordinate_connection(const FrameField& frame,
                                                       const Tensor3<ScalarExpr>& frame_coeffs,
                                                       std::uint64_t seed = kDefaultSeed) {
  const Chart& chart = frame.chart;
  const int d = chart.dim();
  if (frame_coeffs.dim() != d) throw GeometryError("frame coefficients shape mismatch");
  if (frame.min_abs_det(chart.sample_points(seed)) <= 1e-10)
    throw GeometryError("frame_to_coordinate_connection: singular frame matrix on domain");

  const ExprMatrix f = frame.matrix();
  const ExprMatrix g = invert_expr_matrix(f);  // g[a][i]: frame index a, coordinate index i

  // nabla_{E_a} E_b = sum_c C^c_{ba} E_c  =>
  // Gamma^k_{ji} = g^a_i g^b_j ( C^c_{ba} F^k_c - F^m_a d_m F^k_b ).
  ConnectionCoeffs out = ConnectionCoeffs::zero(chart);
  Tensor3<ScalarExpr> rhs(d, ScalarExpr::constant(0.0));  // rhs.at(k, b, a)
  for (int k = 0; k < d; ++k)
    for (int b = 0; b < d; ++b)
      for (int a = 0; a < d; ++a) {
        std::vector<ScalarExpr> terms;
        for (int c = 0; c < d; ++c) terms.push_back(frame_coeffs.at(c, b, a) * f[k][c]);
        for (int m = 0; m < d; ++m)
          terms.push_back(-(f[m][a] * f[k][b].differentiate(chart.coord(m))));
        rhs.at(k, b, a) = sum_simplified(terms);
      }
  for (int k = 0; k < d; ++k)
    for (int j = 0; j < d; ++j)
      for (int i = 0; i < d; ++i) {
        std::vector<ScalarExpr> terms;
        for (int a = 0; a < d; ++a)
          for (int b = 0; b < d; ++b) terms.push_back(g[a][i] * g[b][j] * rhs.at(k, b, a));
        out.set_gamma(k, j, i, sum_simplified(terms));
      }
  return out;
}

// ---------------------------------------------------------------------------
// Paths and parallel transport
// ---------------------------------------------------------------------------

/// A parametrised path in a chart; components are expressions in the
/// distinguished parameter "t".
struct PathSpec {
  static constexpr const char* kParam = "t";

  Chart chart;
  std::vector<ScalarExpr> components;
  double t0 = 0.0;
  double t1 = 1.0;

  PathSpec() = default;
  PathSpec(Chart c, std::vector<ScalarExpr> comps, double a, double b)
      : chart(std::move(c)), components(std::move(comps)), t0(a), t1(b) {
    if (static_cast<int>(components.size()) != chart.dim())
      throw GeometryError("path component count != chart dimension");
    for (const auto& e : components)
      if (!e.uses_only({kParam}))
        throw GeometryError("path components may only reference the parameter 't'");
    for (int s = 0; s <= 100; ++s) {
      const double t = t0 + (t1 - t0) * (s / 100.0);
      if (!chart.contains(point_at(t), 1e-9))
        throw GeometryError("path leaves the chart domain at t=" + std::to_string(t));
    }
  }

  Point point_at(double t) const {
    EvalEnv env{{kParam, t}};
    Point p(components.size());
    for (std::size_t i = 0; i < components.size(); ++i) p[i] = components[i].evaluate(env);
    return p;
  }

  std::vector<double> velocity_at(double t) const {
    EvalEnv env{{kParam, t}};
    std::vector<double> v(components.size());
    for (std::size_t i = 0; i < components.size(); ++i)
      v[i] = components[i].differentiate(kParam).evaluate(env);
    return v;
  }
};

namespace detail {

/// RK4 for the transport equation dv^k/dt = -Gamma^k_{ji}(x(t)) v^j xdot^i,
/// from ta to tb in `steps` fixed steps.  `observe` (if set) sees the state
/// after every step.
inline std::vector<double> integrate_transport(
    const ConnectionCoeffs& conn, const PathSpec& path, std::vector<double> v, double ta, double tb,
    int steps, const std::function<void(double, const std::vector<double>&)>& observe = {}) {
  const int d = conn.dim();
  if (static_cast<int>(v.size()) != d) throw GeometryError("transport: vector dimension mismatch");
  if (steps < 1) throw GeometryError("transport: steps must be >= 1");

  const auto entries = conn.sparse_entries();
  auto rate = [&](double t, const std::vector<double>& state) {
    const Point x = path.point_at(t);
    const EvalEnv env = conn.chart().env(x);
    const std::vector<double> xdot = path.velocity_at(t);
    std::vector<double> dv(d, 0.0);
    for (const auto& e : entries) dv[e.k] -= e.expr.evaluate(env) * state[e.j] * xdot[e.i];
    return dv;
  };

  const double h = (tb - ta) / steps;
  double t = ta;
  for (int s = 0; s < steps; ++s) {
    const auto k1 = rate(t, v);
    std::vector<double> tmp(d);
    for (int i = 0; i < d; ++i) tmp[i] = v[i] + 0.5 * h * k1[i];
    const auto k2 = rate(t + 0.5 * h, tmp);
    for (int i = 0; i < d; ++i) tmp[i] = v[i] + 0.5 * h * k2[i];
    const auto k3 = rate(t + 0.5 * h, tmp);
    for (int i = 0; i < d; ++i) tmp[i] = v[i] + h * k3[i];
    const auto k4 = rate(t + h, tmp);
    for (int i = 0; i < d; ++i) v[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    t = ta + (s + 1) * h;
    if (observe) observe(t, v);
  }
  return v;
}

}  // namespace detail

/// Transports v0 from path.t0 to path.t1.
inline std::vector<double> parallel_transport(const ConnectionCoeffs& conn, const PathSpec& path,
                                              const std::vector<double>& v0, int steps = 1000) {
  require_same_coords(conn.chart(), path.chart, "parallel_transport");
  if (path.t0 == path.t1) return v0;
  return detail::integrate_transport(conn, path, v0, path.t0, path.t1, steps);
}

/// Finite-difference covariant derivative: transports Y(x(t0+tstep)) back to
/// the path start and divides the increment by tstep.  Independent of the
/// symbolic covariant derivative; used as its oracle.
inline std::vector<double> covariant_derivative_via_transport(const ConnectionCoeffs& conn,
                                                              const VectorFieldExpr& y,
                                                              const PathSpec& path, double tstep,
                                                              int steps = 1000) {
  require_same_coords(conn.chart(), path.chart, "covariant_derivative_via_transport");
  require_same_coords(conn.chart(), y.chart, "covariant_derivative_via_transport");
  if (tstep <= 0.0) throw GeometryError("covariant_derivative_via_transport: tstep must be > 0");

  const double t0 = path.t0;
  const std::vector<double> y_here = y.evaluate(path.point_at(t0));
  const std::vector<double> y_ahead = y.evaluate(path.point_at(t0 + tstep));
  const std::vector<double> back =
      detail::integrate_transport(conn, path, y_ahead, t0 + tstep, t0, steps);

  std::vector<double> out(back.size());
  for (std::size_t i = 0; i < back.size(); ++i) out[i] = (back[i] - y_here[i]) / tstep;
  return out;
}

}  // namespace conred
