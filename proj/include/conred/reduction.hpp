#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "conred/chart.hpp"
#include "conred/cotangent.hpp"
#include "conred/expr.hpp"
#include "conred/geometry.hpp"
#include "conred/numeric.hpp"
#include "conred/report.hpp"
#include "conred/symplectic.hpp"

// Marsden-Weinstein reduction for the scaling+translation family on T*R^n:
// level sets of the lifted moment map, noncriticality and self-parallelism
// checks, orbit quotients, and the reduced connection with its
// well-definedness probes.

namespace conred {

struct ReductionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Affine subspace {p : N p = c} of a chart; N has full row rank.
class AffineSubspace {
 public:
  AffineSubspace(Chart ambient, Matrix constraints, Vector values)
      : ambient_(std::move(ambient)), n_(std::move(constraints)), c_(std::move(values)) {
    if (n_.cols() != ambient_.dim()) throw ReductionError("constraint matrix width != chart dimension");
    if (n_.rows() != c_.size()) throw ReductionError("constraint value count mismatch");
    if (n_.rows() > 0 && smallest_singular_value(n_) <= 1e-10)
      throw ReductionError("constraint matrix is rank-deficient");
  }

  static AffineSubspace whole_space(const Chart& ambient) {
    return AffineSubspace(ambient, Matrix::Zero(0, ambient.dim()), Vector::Zero(0));
  }

  const Chart& ambient() const { return ambient_; }
  const Matrix& constraints() const { return n_; }
  const Vector& values() const { return c_; }
  int codim() const { return static_cast<int>(n_.rows()); }
  int dim() const { return ambient_.dim() - codim(); }

  double constraint_residual(const Point& p) const {
    if (codim() == 0) return 0.0;
    const Vector v = n_ * Vector::Map(p.data(), p.size()) - c_;
    return v.cwiseAbs().maxCoeff();
  }

  bool direction_is_tangent(const Vector& v, double tol = 1e-9) const {
    if (codim() == 0) return true;
    return (n_ * v).cwiseAbs().maxCoeff() <= tol;
  }

  /// Deterministic orthonormal tangent basis (constraint null space).
  std::vector<Vector> tangent_basis() const { return null_space_basis(n_); }

  /// Least-norm point on the subspace.
  Point particular_point() const {
    if (codim() == 0) return ambient_.center();
    const Vector p = least_norm_solution(n_, c_);
    return Point(p.data(), p.data() + p.size());
  }

  /// Deterministic samples on the subspace, inside the chart domain.
  std::vector<Point> sample_points_on(std::uint64_t seed = kDefaultSeed, int count = 20,
                                      double spread = 1.0) const {
    const Point p0 = particular_point();
    if (!ambient_.contains(p0, 1e-9))
      throw ReductionError("subspace base point falls outside the chart domain");
    const auto basis = tangent_basis();
    std::vector<Point> out;
    out.push_back(p0);
    std::mt19937_64 gen(seed);
    int guard = 0;
    while (static_cast<int>(out.size()) < count + 1 && guard < 100 * count) {
      ++guard;
      Point p = p0;
      for (const auto& b : basis) {
        const double th = uniform_in(gen, -spread, spread);
        for (int i = 0; i < ambient_.dim(); ++i) p[i] += th * b(i);
      }
      if (ambient_.contains(p)) out.push_back(std::move(p));
    }
    if (static_cast<int>(out.size()) < count + 1)
      throw ReductionError("could not sample enough subspace points inside the domain");
    return out;
  }

 private:
  Chart ambient_;
  Matrix n_;
  Vector c_;
};

/// The action x~^a = s x^a + t^a (a <= h), identity on the remaining axes,
/// together with the moment-map target value xi.
struct ScalingTranslationScene {
  int n = 0;
  int h = 0;
  std::vector<double> xi;  // (h+1) values: scaling charge first

  ScalingTranslationScene(int n_, int h_, std::vector<double> xi_)
      : n(n_), h(h_), xi(std::move(xi_)) {
    if (h < 1 || h > n) throw ReductionError("scene requires 1 <= h <= n");
    if (static_cast<int>(xi.size()) != h + 1)
      throw ReductionError("scene xi must have h+1 components");
  }
};

struct QuotientChart {
  Chart chart;
  std::vector<int> ambient_indices;  // ambient coordinate kept per quotient axis
  Matrix projection;                 // dim(quotient) x dim(ambient) selector
};

/// Default cotangent chart for a scene: base coordinates x1..xn.
inline CotangentChart scene_chart(const ScalingTranslationScene& scene, double lo = -2.0,
                                  double hi = 2.0) {
  std::vector<std::string> coords;
  for (int i = 0; i < scene.n; ++i) coords.push_back("x" + std::to_string(i + 1));
  return CotangentChart::over(Chart::box(std::move(coords), lo, hi), lo, hi);
}

/// Infinitesimal generators on the base: the scaling over the first h axes,
/// then the h translations.
inline std::vector<VectorFieldExpr> scene_generators(const ScalingTranslationScene& scene,
                                                     const Chart& base) {
  if (base.dim() != scene.n) throw ReductionError("scene_generators: base dimension != n");
  std::vector<VectorFieldExpr> gens;
  VectorFieldExpr scaling = VectorFieldExpr::zero(base);
  for (int a = 0; a < scene.h; ++a) scaling.components[a] = base.var(a);
  gens.push_back(std::move(scaling));
  for (int a = 0; a < scene.h; ++a) gens.push_back(VectorFieldExpr::basis(base, a));
  return gens;
}

/// J = (sum_{a<=h} x^a y_a, y_1, ..., y_h) on the total chart.
inline std::vector<ScalarExpr> scene_moment_map(const ScalingTranslationScene& scene,
                                                const CotangentChart& cc) {
  if (cc.n != scene.n) throw ReductionError("scene_moment_map: chart does not match the scene");
  std::vector<ScalarExpr> out;
  std::vector<ScalarExpr> terms;
  for (int a = 0; a < scene.h; ++a) terms.push_back(cc.total.var(a) * cc.total.var(scene.n + a));
  out.push_back(sum_simplified(terms));
  for (int a = 0; a < scene.h; ++a) out.push_back(cc.total.var(scene.n + a));
  return out;
}

/// Level set J = xi as an affine subspace: y_a = xi_a for a = 1..h, plus
/// sum_a xi_a x^a = xi_0 whenever some xi_a is nonzero.  Degenerate level
/// sets (dimension 0 or empty) are rejected.
inline AffineSubspace scene_level_set(const ScalingTranslationScene& scene,
                                      const CotangentChart& cc,
                                      const std::vector<double>& xi) {
  if (static_cast<int>(xi.size()) != scene.h + 1)
    throw ReductionError("scene_level_set: xi must have h+1 components");
  const int n = scene.n, h = scene.h;
  const int d = 2 * n;
  bool have_x_row = false;
  for (int a = 0; a < h; ++a)
    if (xi[1 + a] != 0.0) have_x_row = true;
  if (!have_x_row && xi[0] != 0.0)
    throw ReductionError("scene_level_set: level set is empty (0 = xi_0 with xi_0 != 0)");

  const int rows = h + (have_x_row ? 1 : 0);
  Matrix constraints = Matrix::Zero(rows, d);
  Vector values = Vector::Zero(rows);
  for (int a = 0; a < h; ++a) {
    constraints(a, n + a) = 1.0;
    values(a) = xi[1 + a];
  }
  if (have_x_row) {
    for (int a = 0; a < h; ++a) constraints(h, a) = xi[1 + a];
    values(h) = xi[0];
  }
  AffineSubspace level(cc.total, std::move(constraints), std::move(values));
  if (level.dim() <= 0)
    throw ReductionError("scene_level_set: degenerate level set of dimension " +
                         std::to_string(level.dim()));
  return level;
}

inline AffineSubspace scene_level_set(const ScalingTranslationScene& scene,
                                      const CotangentChart& cc) {
  return scene_level_set(scene, cc, scene.xi);
}

/// Orthonormal basis of the orbit directions of the isotropy group on the
/// level set: translations sum_a c_a d/dx^a with sum_a c_a xi_a = 0.
inline std::vector<Vector> orbit_directions(const ScalingTranslationScene& scene,
                                            const std::vector<double>& xi, int total_dim) {
  Matrix row = Matrix::Zero(1, scene.h);
  for (int a = 0; a < scene.h; ++a) row(0, a) = xi[1 + a];
  const auto small = null_space_basis(row);
  std::vector<Vector> out;
  for (const auto& v : small) {
    Vector big = Vector::Zero(total_dim);
    for (int a = 0; a < scene.h; ++a) big(a) = v(a);
    out.push_back(std::move(big));
  }
  return out;
}

/// Full-rank test for the moment-map Jacobian on the level set.
inline CheckItem noncritical_check(const std::vector<ScalarExpr>& moment,
                                   const std::vector<double>& xi, const AffineSubspace& subspace,
                                   std::uint64_t seed = kDefaultSeed, double rank_tol = 1e-8) {
  CheckItem item;
  item.name = "noncritical_value";
  item.tolerance = rank_tol;
  item.pass = true;
  if (moment.empty()) {
    item.detail = "no moment map components; vacuously noncritical";
    item.max_residual = 0.0;
    return item;
  }
  if (moment.size() != xi.size()) throw ReductionError("noncritical_check: xi size mismatch");
  const Chart& chart = subspace.ambient();
  const int d = chart.dim();
  const int r = static_cast<int>(moment.size());

  double worst_sv = std::numeric_limits<double>::infinity();
  for (const auto& p : subspace.sample_points_on(seed)) {
    const EvalEnv env = chart.env(p);
    for (int a = 0; a < r; ++a) {
      if (std::abs(moment[a].evaluate(env) - xi[a]) > 1e-10)
        throw ReductionError("noncritical_check: subspace is not inside the level set");
    }
    Matrix jac(r, d);
    for (int a = 0; a < r; ++a)
      for (int i = 0; i < d; ++i) jac(a, i) = moment[a].differentiate(chart.coord(i)).evaluate(env);
    const double sv = smallest_singular_value(jac);
    if (sv < worst_sv) {
      worst_sv = sv;
      item.witness = p;
    }
  }
  item.max_residual = worst_sv;  // smallest singular value seen
  item.pass = worst_sv > rank_tol;
  item.detail = "smallest moment-map Jacobian singular value over the level set";
  if (!item.pass) item.detail += "; rank-deficient point recorded as witness";
  return item;
}

/// Tensorial self-parallelism: for constant tangent fields T_a, T_b of C,
/// the constraint-normal part of nabla_{T_a} T_b must vanish on C.
inline CheckItem self_parallel_check(const ConnectionCoeffs& conn, const AffineSubspace& c,
                                     std::uint64_t seed = kDefaultSeed, double tol = 1e-9) {
  require_same_coords(conn.chart(), c.ambient(), "self_parallel_check");
  const auto basis = c.tangent_basis();
  const int d = conn.dim();
  const auto points = c.codim() == 0 ? c.ambient().sample_points(seed) : c.sample_points_on(seed);

  return residual_check("self_parallel", tol, points, [&](const Point& p) {
    const Tensor3<double> g = conn.evaluate(p);
    double worst = 0.0;
    for (const auto& ta : basis)
      for (const auto& tb : basis) {
        Vector w = Vector::Zero(d);
        for (int k = 0; k < d; ++k)
          for (int j = 0; j < d; ++j)
            for (int i = 0; i < d; ++i) w(k) += g.at(k, j, i) * tb(j) * ta(i);
        if (c.codim() > 0) {
          const Vector normal_part = c.constraints() * w;
          worst = std::max(worst, normal_part.size() ? normal_part.cwiseAbs().maxCoeff() : 0.0);
        }
      }
    return worst;
  });
}

/// Dynamic self-parallelism: transports a tangent vector along a path inside
/// C and reports the worst constraint-normal component along the way.
inline CheckItem transport_tangency_check(const ConnectionCoeffs& conn, const AffineSubspace& c,
                                          const PathSpec& path, const std::vector<double>& v0,
                                          int steps = 1000, double tol = 1e-6) {
  require_same_coords(conn.chart(), c.ambient(), "transport_tangency_check");
  for (int s = 0; s <= 100; ++s) {
    const double t = path.t0 + (path.t1 - path.t0) * (s / 100.0);
    if (c.constraint_residual(path.point_at(t)) > 1e-9)
      throw ReductionError("transport_tangency_check: path exits the subspace");
  }
  if (!c.direction_is_tangent(Vector::Map(v0.data(), v0.size())))
    throw ReductionError("transport_tangency_check: initial vector is not tangent");

  CheckItem item;
  item.name = "transport_tangency";
  item.tolerance = tol;
  double worst = 0.0;
  double worst_t = path.t0;
  detail::integrate_transport(conn, path, v0, path.t0, path.t1, steps,
                              [&](double t, const std::vector<double>& v) {
                                if (c.codim() == 0) return;
                                const Vector res =
                                    c.constraints() * Vector::Map(v.data(), v.size());
                                const double r = res.cwiseAbs().maxCoeff();
                                if (r >= worst) {
                                  worst = r;
                                  worst_t = t;
                                }
                              });
  item.max_residual = worst;
  item.pass = worst <= tol;
  item.witness = path.point_at(worst_t);
  item.detail = "max |N v(t)| along the transported path";
  return item;
}

/// Deterministic path inside the subspace: p(t) = p0 + t * sum_b c_b T_b
/// with seeded coefficients, kept inside the chart domain.
inline PathSpec path_in_subspace(const AffineSubspace& c, std::uint64_t seed = kDefaultSeed,
                                 double spread = 0.5) {
  const Point p0 = c.particular_point();
  const auto basis = c.tangent_basis();
  std::mt19937_64 gen(seed);
  const int d = c.ambient().dim();
  for (int attempt = 0; attempt < 50; ++attempt) {
    Vector dir = Vector::Zero(d);
    for (const auto& b : basis) dir += uniform_in(gen, -spread, spread) * b;
    std::vector<ScalarExpr> comps(d);
    Point end = p0;
    for (int i = 0; i < d; ++i) end[i] += dir(i);
    if (!c.ambient().contains(end)) continue;
    for (int i = 0; i < d; ++i)
      comps[i] = (ScalarExpr::constant(p0[i]) +
                  ScalarExpr::constant(dir(i)) * ScalarExpr::variable(PathSpec::kParam))
                     .simplified();
    return PathSpec(c.ambient(), std::move(comps), 0.0, 1.0);
  }
  throw ReductionError("path_in_subspace: could not fit a path inside the domain");
}

/// Quotient chart (x^u, y_u), u = h+1..n, with the reduced canonical form.
struct SceneQuotient {
  QuotientChart quotient;
  TwoFormField reduced_form;
};

inline SceneQuotient scene_quotient(const ScalingTranslationScene& scene, const CotangentChart& cc,
                                    const std::vector<double>& xi) {
  if (scene.n == scene.h)
    throw ReductionError("scene_quotient: n = h leaves a zero-dimensional quotient");
  (void)scene_level_set(scene, cc, xi);  // validates dimensions
  const int n = scene.n, h = scene.h;
  const int m = n - h;

  QuotientChart qc;
  std::vector<std::string> coords;
  std::vector<std::array<double, 2>> domain;
  for (int u = h; u < n; ++u) {
    qc.ambient_indices.push_back(u);
    coords.push_back(cc.total.coord(u));
    domain.push_back(cc.total.domain()[u]);
  }
  for (int u = h; u < n; ++u) {
    qc.ambient_indices.push_back(n + u);
    coords.push_back(cc.total.coord(n + u));
    domain.push_back(cc.total.domain()[n + u]);
  }
  qc.chart = Chart(std::move(coords), std::move(domain));
  qc.projection = Matrix::Zero(2 * m, 2 * n);
  for (int i = 0; i < 2 * m; ++i) qc.projection(i, qc.ambient_indices[i]) = 1.0;

  TwoFormField reduced(qc.chart);
  for (int u = 0; u < m; ++u) reduced.set_entry(u, m + u, ScalarExpr::constant(1.0));
  reduced.declared_kind = FormKind::Symplectic;
  return SceneQuotient{std::move(qc), std::move(reduced)};
}

// ---------------------------------------------------------------------------
// The reduced connection
// ---------------------------------------------------------------------------

struct SceneReductionResult {
  std::vector<ScalarExpr> moment_map;
  AffineSubspace level_set;
  QuotientChart quotient;
  TwoFormField reduced_form;
  std::optional<ConnectionCoeffs> reduced;  // present when the preconditions pass
  CheckReport checks;
};

/// Runs the full reduction of a scene: noncriticality, self-parallelism,
/// action invariance, the well-definedness probes, then the reduced
/// connection with its compatibility checks.
///
/// `ambient_form` is the symplectic form the connection is compatible with;
/// by default the canonical one.  The reduced form is its restriction to the
/// quotient coordinates along the canonical section of the orbit space.
inline SceneReductionResult reduce_scene(const ConnectionCoeffs& conn,
                                         const ScalingTranslationScene& scene,
                                         const CotangentChart& cc,
                                         const std::vector<double>& xi,
                                         std::uint64_t seed = kDefaultSeed,
                                         const std::optional<TwoFormField>& ambient_form = {}) {
  require_same_coords(conn.chart(), cc.total, "reduce_scene");
  const int n = scene.n, h = scene.h;
  const int d = 2 * n;

  const TwoFormField omega = ambient_form ? *ambient_form : canonical_symplectic_form(cc);
  auto quotient = scene_quotient(scene, cc, xi);

  SceneReductionResult result{scene_moment_map(scene, cc),
                              scene_level_set(scene, cc, xi),
                              std::move(quotient.quotient),
                              std::move(quotient.reduced_form),
                              std::nullopt,
                              {}};
  const AffineSubspace& level = result.level_set;

  result.checks.add(noncritical_check(result.moment_map, xi, level, seed));
  result.checks.add(self_parallel_check(conn, level, seed));

  // Dynamic tangency probe along a seeded path in the level set.
  {
    PathSpec path = path_in_subspace(level, seed + 1);
    const auto basis = level.tangent_basis();
    std::mt19937_64 gen(seed + 2);
    Vector v0 = Vector::Zero(d);
    for (const auto& b : basis) v0 += uniform_in(gen, -1.0, 1.0) * b;
    std::vector<double> v0v(v0.data(), v0.data() + d);
    result.checks.add(transport_tangency_check(conn, level, path, v0v));
  }

  // Affine invariance (finite elements s = 2, 1/2 with seeded translations).
  {
    std::mt19937_64 gen(seed + 3);
    double worst = 0.0;
    const auto pts = cc.total.sample_points(seed, 20);
    for (double s : {2.0, 0.5}) {
      Matrix lin = Matrix::Identity(d, d);
      Vector offset = Vector::Zero(d);
      for (int a = 0; a < h; ++a) {
        lin(a, a) = s;
        lin(n + a, n + a) = 1.0 / s;
        offset(a) = uniform_in(gen, -0.3, 0.3);
      }
      worst = std::max(worst, affine_invariance_residual(conn, lin, offset, pts));
    }
    CheckItem item;
    item.name = "action_invariance";
    item.tolerance = 1e-8;
    item.max_residual = worst;
    item.pass = worst <= item.tolerance;
    item.detail = "pushforward condition for finite group elements (s = 2, 1/2)";
    result.checks.add(item);
  }

  const auto orbit_basis = orbit_directions(scene, xi, d);
  const auto level_points = level.sample_points_on(seed, 10);

  // Orbit-direction parallelism: nabla_X Z stays in the orbit directions.
  {
    Matrix orbit_span = Matrix::Zero(static_cast<int>(orbit_basis.size()), d);
    for (std::size_t r = 0; r < orbit_basis.size(); ++r) orbit_span.row(r) = orbit_basis[r].transpose();
    auto off_orbit = [&](const Vector& w) {
      Vector rem = w;
      for (std::size_t r = 0; r < orbit_basis.size(); ++r)
        rem -= orbit_basis[r].dot(w) * orbit_basis[r];
      return rem.size() ? rem.cwiseAbs().maxCoeff() : 0.0;
    };

    CheckItem item = residual_check("orbit_direction_parallel", 1e-9, level_points, [&](const Point& p) {
      const Tensor3<double> g = conn.evaluate(p);
      double worst = 0.0;
      for (const auto& z : orbit_basis)
        for (int i = 0; i < d; ++i) {  // X ranges over all coordinate fields
          Vector w = Vector::Zero(d);
          for (int k = 0; k < d; ++k)
            for (int j = 0; j < d; ++j) w(k) += g.at(k, j, i) * z(j);
          worst = std::max(worst, off_orbit(w));
        }
      return worst;
    });
    item.detail = "nabla_X Z components transverse to the orbit directions";
    result.checks.add(item);

    // Probe of the torsion identity route: nabla_Z Y for invariant lifts Y
    // also stays in the orbit directions.
    CheckItem probe = residual_check("orbit_derivative_probe", 1e-9, level_points, [&](const Point& p) {
      const Tensor3<double> g = conn.evaluate(p);
      double worst = 0.0;
      for (const auto& z : orbit_basis)
        for (int qi : result.quotient.ambient_indices) {
          Vector w = Vector::Zero(d);
          for (int k = 0; k < d; ++k)
            for (int i = 0; i < d; ++i) w(k) += g.at(k, qi, i) * z(i);
          worst = std::max(worst, off_orbit(w));
        }
      return worst;
    });
    probe.detail = "nabla_Z Y for invariant lifts Y and orbit fields Z";
    result.checks.add(probe);
  }

  // Well-definedness: quotient components of nabla_X Y must not vary along
  // an orbit (5 translated copies per sampled point).
  {
    const int m = 2 * (n - h);
    std::mt19937_64 gen(seed + 4);
    CheckItem item;
    item.name = "orbit_well_defined";
    item.tolerance = 1e-8;
    for (const auto& p : level_points) {
      const Tensor3<double> base_g = conn.evaluate(p);
      for (int rep = 0; rep < 5; ++rep) {
        Point q = p;
        for (const auto& z : orbit_basis) {
          const double c = uniform_in(gen, -0.5, 0.5);
          for (int i = 0; i < d; ++i) q[i] += c * z(i);
        }
        if (!cc.total.contains(q)) continue;
        const Tensor3<double> g = conn.evaluate(q);
        for (int kq = 0; kq < m; ++kq)
          for (int jq = 0; jq < m; ++jq)
            for (int iq = 0; iq < m; ++iq) {
              const double delta = std::abs(
                  g.at(result.quotient.ambient_indices[kq], result.quotient.ambient_indices[jq],
                       result.quotient.ambient_indices[iq]) -
                  base_g.at(result.quotient.ambient_indices[kq],
                            result.quotient.ambient_indices[jq],
                            result.quotient.ambient_indices[iq]));
              if (delta >= item.max_residual) {
                item.max_residual = delta;
                item.witness = q;
              }
            }
      }
    }
    item.pass = item.max_residual <= item.tolerance;
    item.detail = "variation of projected nabla components along orbits";
    result.checks.add(item);
  }

  // Independence of the invariant lift: replacing a lift Y by Y + Z with an
  // orbit-direction field Z must not change the projected components.
  {
    CheckItem item;
    item.name = "lift_choice_independent";
    item.tolerance = 1e-9;
    const int m = 2 * (n - h);
    for (const auto& p : level_points) {
      const Tensor3<double> g = conn.evaluate(p);
      for (const auto& z : orbit_basis)
        for (int kq = 0; kq < m; ++kq)
          for (int jq = 0; jq < m; ++jq)
            for (int iq = 0; iq < m; ++iq) {
              // quotient components of nabla_{X+Z}(Y+Z) minus nabla_X Y
              double delta = 0.0;
              const int k = result.quotient.ambient_indices[kq];
              const int j = result.quotient.ambient_indices[jq];
              const int i = result.quotient.ambient_indices[iq];
              for (int a = 0; a < d; ++a) {
                delta += g.at(k, j, a) * z(a);        // nabla_Z Y
                delta += g.at(k, a, i) * z(a);        // nabla_X Z
                for (int b = 0; b < d; ++b) delta += g.at(k, a, b) * z(a) * z(b);  // nabla_Z Z
              }
              if (std::abs(delta) >= item.max_residual) {
                item.max_residual = std::abs(delta);
                item.witness = p;
              }
            }
    }
    item.pass = item.max_residual <= item.tolerance;
    item.detail = "projected change when lifts gain orbit-direction terms";
    result.checks.add(item);
  }

  if (!result.checks.overall_pass()) return result;

  // Reduced Christoffels: substitute the canonical orbit-space section
  // y_a -> xi_a, x^a -> lambda xi_a into the ambient entries.
  double xi_norm2 = 0.0;
  for (int a = 0; a < h; ++a) xi_norm2 += xi[1 + a] * xi[1 + a];
  const double lambda = xi[0] / xi_norm2;
  std::unordered_map<std::string, ScalarExpr> section;
  for (int a = 0; a < h; ++a) {
    section.emplace(cc.total.coord(a), ScalarExpr::constant(lambda * xi[1 + a]));
    section.emplace(cc.total.coord(n + a), ScalarExpr::constant(xi[1 + a]));
  }

  const int m = 2 * (n - h);
  const std::set<std::string> quotient_names(result.quotient.chart.coords().begin(),
                                             result.quotient.chart.coords().end());
  ConnectionCoeffs reduced = ConnectionCoeffs::zero(result.quotient.chart);
  for (int kq = 0; kq < m; ++kq)
    for (int jq = 0; jq < m; ++jq)
      for (int iq = 0; iq < m; ++iq) {
        ScalarExpr e = conn.gamma(result.quotient.ambient_indices[kq],
                                  result.quotient.ambient_indices[jq],
                                  result.quotient.ambient_indices[iq])
                           .substitute(section)
                           .simplified();
        if (!e.uses_only(quotient_names))
          throw ReductionError("reduce_scene: projected entry depends on eliminated coordinates");
        reduced.set_gamma(kq, jq, iq, std::move(e));
      }

  // Restriction of the ambient form to the quotient block along the section.
  TwoFormField reduced_form(result.quotient.chart);
  for (int iq = 0; iq < m; ++iq)
    for (int jq = iq + 1; jq < m; ++jq)
      reduced_form.set_entry(iq, jq,
                             omega.entry(result.quotient.ambient_indices[iq],
                                         result.quotient.ambient_indices[jq])
                                 .substitute(section)
                                 .simplified());
  reduced_form.declared_kind = FormKind::Symplectic;
  result.reduced_form = reduced_form;

  const auto qpts = result.quotient.chart.sample_points(seed);
  {
    CheckItem item;
    item.name = "reduced_torsion_free";
    item.tolerance = 1e-9;
    item.max_residual = max_residual(torsion_tensor(reduced), result.quotient.chart, qpts);
    item.pass = item.max_residual <= item.tolerance;
    result.checks.add(item);
  }
  {
    CheckItem item;
    item.name = "reduced_compatible";
    item.tolerance = 1e-9;
    item.max_residual =
        max_residual(nabla_omega(reduced, reduced_form), result.quotient.chart, qpts);
    item.pass = item.max_residual <= item.tolerance;
    result.checks.add(item);
  }

  result.reduced = std::move(reduced);
  return result;
}

/// The reduced connection alone; throws when a precondition check fails.
inline ConnectionCoeffs reduce_connection(const ConnectionCoeffs& conn,
                                          const ScalingTranslationScene& scene,
                                          const CotangentChart& cc,
                                          const std::vector<double>& xi,
                                          std::uint64_t seed = kDefaultSeed) {
  auto result = reduce_scene(conn, scene, cc, xi, seed);
  if (!result.reduced) {
    std::string failed;
    for (const auto& item : result.checks.items)
      if (!item.pass) failed += (failed.empty() ? "" : ", ") + item.name;
    throw ReductionError("reduce_connection: precondition checks failed: " + failed);
  }
  return *std::move(result.reduced);
}

}  // namespace conred
