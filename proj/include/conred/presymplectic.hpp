#pragma once

#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "conred/chart.hpp"
#include "conred/expr.hpp"
#include "conred/geometry.hpp"
#include "conred/numeric.hpp"
#include "conred/report.hpp"
#include "conred/symplectic.hpp"

// Presymplectic structures in adapted charts (transverse coordinates first,
// leafwise coordinates last), the Bott-type connection assembled from a
// torsionless reference connection, the two-stage correction that makes it
// compatible with kernel-valued torsion, and reduction to the local leaf
// space.

namespace conred {

struct PresymplecticError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Index split TM = S + I: transverse indices span S, leaf indices the
/// characteristic directions.
struct SplittingS {
  std::vector<int> transverse;
  std::vector<int> leaf;
};

/// A closed 2-form of constant rank 2n on a (2n+p)-chart, adapted: the last
/// p coordinates are leafwise, the form depends only on the transverse
/// coordinates and annihilates the leaf directions.
class PresymplecticStructure {
 public:
  PresymplecticStructure(Chart chart, TwoFormField omega, int n, int p,
                         std::uint64_t seed = kDefaultSeed)
      : chart_(std::move(chart)), omega_(std::move(omega)), n_(n), p_(p) {
    if (n_ < 1 || p_ < 0) throw PresymplecticError("presymplectic structure needs n >= 1, p >= 0");
    if (chart_.dim() != 2 * n_ + p_)
      throw PresymplecticError("chart dimension must equal 2n + p");
    require_same_coords(chart_, omega_.chart(), "PresymplecticStructure");

    const int d = chart_.dim();
    std::set<std::string> transverse_names;
    for (int i = 0; i < 2 * n_; ++i) transverse_names.insert(chart_.coord(i));

    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j) {
        const ScalarExpr e = omega_.entry(i, j).simplified();
        if (j >= 2 * n_ && !e.is_zero_literal())
          throw PresymplecticError("form does not annihilate the leaf direction '" +
                                   chart_.coord(j) + "' (entry " + std::to_string(i + 1) + "," +
                                   std::to_string(j + 1) + " = " + e.str() + ")");
        if (!e.uses_only(transverse_names))
          throw PresymplecticError("form coefficient " + std::to_string(i + 1) + "," +
                                   std::to_string(j + 1) +
                                   " depends on a leaf coordinate: " + e.str());
      }

    const auto pts = chart_.sample_points(seed);
    if (closedness_residual(omega_, pts) > 1e-10)
      throw PresymplecticError("form is not closed");
    if (!has_constant_rank(omega_, 2 * n_, pts))
      throw PresymplecticError("form does not have constant rank " + std::to_string(2 * n_));

    // The kernel must line up with the trailing coordinate block.
    for (const auto& p : pts) {
      const auto kernel = kernel_at(p);
      double worst = 0.0;
      for (const auto& v : kernel)
        for (int i = 0; i < 2 * n_; ++i) worst = std::max(worst, std::abs(v(i)));
      if (worst > 1e-9) {
        std::ostringstream msg;
        msg << "chart is not adapted: kernel strays off the leaf block (residual " << worst
            << "); kernel basis found:";
        for (const auto& v : kernel) {
          msg << " [";
          for (int i = 0; i < v.size(); ++i) msg << (i ? "," : "") << v(i);
          msg << "]";
        }
        throw PresymplecticError(msg.str());
      }
    }
  }

  const Chart& chart() const { return chart_; }
  const TwoFormField& omega() const { return omega_; }
  int n() const { return n_; }
  int p() const { return p_; }

  SplittingS splitting() const {
    SplittingS s;
    for (int i = 0; i < 2 * n_; ++i) s.transverse.push_back(i);
    for (int i = 2 * n_; i < chart_.dim(); ++i) s.leaf.push_back(i);
    return s;
  }

  /// Orthonormal kernel basis of [omega_ij(point)]; throws when the rank
  /// deviates from 2n there.
  std::vector<Vector> kernel_at(const Point& point) const {
    const Matrix m = omega_.evaluate(point);
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    std::vector<Vector> kernel;
    for (int i = 0; i < sv.size(); ++i)
      if (sv(i) < 1e-8) kernel.push_back(svd.matrixV().col(i));
    if (static_cast<int>(kernel.size()) != p_)
      throw PresymplecticError("rank deviates from 2n at the given point");
    return kernel;
  }

 private:
  Chart chart_;
  TwoFormField omega_;
  int n_;
  int p_;
};

inline std::vector<Vector> characteristic_kernel(const PresymplecticStructure& ps,
                                                 const Point& point) {
  return ps.kernel_at(point);
}

/// Bott-type partial connection on S built from a torsionless reference
/// connection K: transverse directions differentiate through pr_S K, leaf
/// directions through the projected bracket (zero on coordinate fields).
/// Only entries with transverse result and field indices are populated.
inline Tensor3<ScalarExpr> bott_connection_S(const PresymplecticStructure& ps, const SplittingS& s,
                                             const ConnectionCoeffs& k) {
  require_same_coords(ps.chart(), k.chart(), "bott_connection_S");
  const int d = ps.chart().dim();
  Tensor3<ScalarExpr> out(d, ScalarExpr::constant(0.0));
  for (int c : s.transverse)
    for (int b : s.transverse)
      for (int a : s.transverse) out.at(c, b, a) = k.gamma(c, b, a);
  return out;
}

/// D = D^S + D^I with D^S the Bott connection of pr_S K and D^I = pr_I K.
/// Preserves both subbundles; its torsion is leaf-valued when K is
/// torsionless.
inline ConnectionCoeffs assemble_D(const PresymplecticStructure& ps, const SplittingS& s,
                                   const ConnectionCoeffs& k,
                                   std::uint64_t seed = kDefaultSeed) {
  require_same_coords(ps.chart(), k.chart(), "assemble_D");
  if (k.symmetry_residual(ps.chart().sample_points(seed)) > 1e-10)
    throw PresymplecticError("assemble_D: reference connection must be torsionless");
  const int d = ps.chart().dim();
  ConnectionCoeffs out = ConnectionCoeffs::zero(ps.chart());
  const Tensor3<ScalarExpr> bott = bott_connection_S(ps, s, k);
  for (int c : s.transverse)
    for (int b : s.transverse)
      for (int a : s.transverse) out.set_gamma(c, b, a, bott.at(c, b, a));
  for (int c : s.leaf)
    for (int b : s.leaf)
      for (int a = 0; a < d; ++a) out.set_gamma(c, b, a, k.gamma(c, b, a));
  return out;
}

namespace detail {

/// Solves sum_s T^s omega_{s c} = rhs_c over the transverse block, returning
/// the tensor entries for one (direction, field) pair.
inline std::vector<ScalarExpr> solve_against_omega(const ExprMatrix& omega_inv_s,
                                                   const std::vector<ScalarExpr>& rhs) {
  const int m = static_cast<int>(rhs.size());
  std::vector<ScalarExpr> out(m);
  for (int si = 0; si < m; ++si) {
    std::vector<ScalarExpr> terms;
    for (int c = 0; c < m; ++c) terms.push_back(omega_inv_s[c][si] * rhs[c]);
    out[si] = sum_simplified(terms);
  }
  return out;
}

}  // namespace detail

/// Theta of the compatibility stage: S-valued on S-pairs, zero on any leaf
/// argument, solving  omega(Theta(X',Y'),Z') = 1/2 (D_{X'} omega)(Y',Z').
inline Tensor3<ScalarExpr> theta_tensor(const PresymplecticStructure& ps, const SplittingS& s,
                                        const ConnectionCoeffs& d_conn) {
  const int d = ps.chart().dim();
  const int m = static_cast<int>(s.transverse.size());
  const auto nd = nabla_omega(d_conn, ps.omega());

  ExprMatrix omega_s(m, std::vector<ScalarExpr>(m));
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c) omega_s[r][c] = ps.omega().entry(s.transverse[r], s.transverse[c]);
  const ExprMatrix omega_inv_s = invert_expr_matrix(omega_s);

  Tensor3<ScalarExpr> out(d, ScalarExpr::constant(0.0));
  const ScalarExpr half = ScalarExpr::constant(0.5);
  for (int ai = 0; ai < m; ++ai)
    for (int bi = 0; bi < m; ++bi) {
      std::vector<ScalarExpr> rhs(m);
      for (int ci = 0; ci < m; ++ci)
        rhs[ci] = (half * nd.at(s.transverse[bi], s.transverse[ci], s.transverse[ai])).simplified();
      const auto column = detail::solve_against_omega(omega_inv_s, rhs);
      for (int si = 0; si < m; ++si)
        out.at(s.transverse[si], s.transverse[bi], s.transverse[ai]) = column[si];
    }
  return out;
}

/// The skew stage of the correction, S-valued on S-pairs:
///   omega(A(X',Y'),Z') = 1/6 { (D_{Y'} omega)(X',Z') + (D_{Z'} omega)(X',Y') }.
/// Satisfies omega(A(X,Y),Z) + omega(Y,A(X,Z)) = 0, so it preserves
/// compatibility while removing the transverse part of the torsion.
inline Tensor3<ScalarExpr> skew_correction_tensor(const PresymplecticStructure& ps,
                                                  const SplittingS& s,
                                                  const ConnectionCoeffs& d_conn) {
  const int d = ps.chart().dim();
  const int m = static_cast<int>(s.transverse.size());
  const auto nd = nabla_omega(d_conn, ps.omega());

  ExprMatrix omega_s(m, std::vector<ScalarExpr>(m));
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c) omega_s[r][c] = ps.omega().entry(s.transverse[r], s.transverse[c]);
  const ExprMatrix omega_inv_s = invert_expr_matrix(omega_s);

  Tensor3<ScalarExpr> out(d, ScalarExpr::constant(0.0));
  const ScalarExpr sixth = ScalarExpr::constant(1.0) / ScalarExpr::constant(6.0);
  for (int ai = 0; ai < m; ++ai)
    for (int bi = 0; bi < m; ++bi) {
      std::vector<ScalarExpr> rhs(m);
      for (int ci = 0; ci < m; ++ci)
        rhs[ci] = (sixth * (nd.at(s.transverse[ai], s.transverse[ci], s.transverse[bi]) +
                            nd.at(s.transverse[ai], s.transverse[bi], s.transverse[ci])))
                      .simplified();
      const auto column = detail::solve_against_omega(omega_inv_s, rhs);
      for (int si = 0; si < m; ++si)
        out.at(s.transverse[si], s.transverse[bi], s.transverse[ai]) = column[si];
    }
  return out;
}

struct PresymplecticBuild {
  ConnectionCoeffs connection;   // D + Theta + A
  ConnectionCoeffs d_connection; // the assembled D
  Tensor3<ScalarExpr> theta;
  Tensor3<ScalarExpr> skew;
};

/// Full pipeline: nabla = D + Theta + A.  The output satisfies
/// nabla omega = 0 with torsion valued in the kernel directions.
inline PresymplecticBuild build_presymplectic_connection(const PresymplecticStructure& ps,
                                                         const SplittingS& s,
                                                         const ConnectionCoeffs& k,
                                                         std::uint64_t seed = kDefaultSeed) {
  PresymplecticBuild out{ConnectionCoeffs::zero(ps.chart()), assemble_D(ps, s, k, seed),
                         Tensor3<ScalarExpr>(ps.chart().dim(), ScalarExpr::constant(0.0)),
                         Tensor3<ScalarExpr>(ps.chart().dim(), ScalarExpr::constant(0.0))};
  out.theta = theta_tensor(ps, s, out.d_connection);
  out.skew = skew_correction_tensor(ps, s, out.d_connection);
  const int d = ps.chart().dim();
  for (int c = 0; c < d; ++c)
    for (int b = 0; b < d; ++b)
      for (int a = 0; a < d; ++a)
        out.connection.set_gamma(
            c, b, a,
            sum_simplified({out.d_connection.gamma(c, b, a), out.theta.at(c, b, a),
                            out.skew.at(c, b, a)}));
  return out;
}

/// Flat reference connection on the adapted chart (the default K).
inline ConnectionCoeffs flat_reference(const PresymplecticStructure& ps) {
  return ConnectionCoeffs::zero(ps.chart());
}

/// Curvature condition for projectability of the normal part:
/// omega(R(Z,X)Y, W) = 0 for all leaf directions Z.
inline CheckItem curvature_condition_check(const ConnectionCoeffs& conn,
                                           const PresymplecticStructure& ps,
                                           std::uint64_t seed = kDefaultSeed, double tol = 1e-8) {
  require_same_coords(conn.chart(), ps.chart(), "curvature_condition_check");
  const int d = conn.dim();
  const auto s = ps.splitting();
  const auto r = curvature_tensor(conn);
  const auto pts = ps.chart().sample_points(seed);

  CheckItem item = residual_check("curvature_condition", tol, pts, [&](const Point& p) {
    const EvalEnv env = ps.chart().env(p);
    const Matrix w = ps.omega().evaluate(p);
    double worst = 0.0;
    for (int z : s.leaf)
      for (int x = 0; x < d; ++x)
        for (int y = 0; y < d; ++y)
          for (int wcol = 0; wcol < d; ++wcol) {
            double sum = 0.0;
            for (int l = 0; l < d; ++l) sum += r.at(l, y, z, x).evaluate(env) * w(l, wcol);
            worst = std::max(worst, std::abs(sum));
          }
    return worst;
  });
  item.detail = "omega(R(Z,X)Y, W) over leaf directions Z";
  return item;
}

/// Both projectability sub-checks: adaptedness (leafwise derivatives of any
/// field stay leafwise) and leaf-coordinate independence of the transverse
/// Christoffel block, the latter checked symbolically.
inline CheckReport projectability_check(const ConnectionCoeffs& conn,
                                        const PresymplecticStructure& ps,
                                        std::uint64_t seed = kDefaultSeed, double tol = 1e-9) {
  require_same_coords(conn.chart(), ps.chart(), "projectability_check");
  const auto s = ps.splitting();
  const int d = conn.dim();
  const auto pts = ps.chart().sample_points(seed);

  CheckReport report;
  {
    CheckItem item = residual_check("adapted", tol, pts, [&](const Point& p) {
      const Tensor3<double> g = conn.evaluate(p);
      double worst = 0.0;
      for (int c : s.transverse)
        for (int j = 0; j < d; ++j)
          for (int a : s.leaf) worst = std::max(worst, std::abs(g.at(c, j, a)));
      return worst;
    });
    item.detail = "transverse components of leafwise-direction derivatives";
    report.add(item);
  }
  {
    CheckItem item = residual_check("leaf_independent", tol, pts, [&](const Point& p) {
      const EvalEnv env = ps.chart().env(p);
      double worst = 0.0;
      for (int c : s.transverse)
        for (int b : s.transverse)
          for (int a : s.transverse)
            for (int z : s.leaf)
              worst = std::max(
                  worst,
                  std::abs(conn.gamma(c, b, a).differentiate(ps.chart().coord(z)).evaluate(env)));
      return worst;
    });
    item.detail = "leaf-coordinate derivatives of the transverse Christoffel block";
    report.add(item);
  }
  return report;
}

/// Residual of kernel parallelism: derivatives of leafwise fields must stay
/// leafwise (the consequence of nabla omega = 0 used for reduction).
inline double kernel_parallel_residual(const ConnectionCoeffs& conn,
                                       const PresymplecticStructure& ps,
                                       const std::vector<Point>& pts) {
  const auto s = ps.splitting();
  const int d = conn.dim();
  double worst = 0.0;
  for (const auto& p : pts) {
    const Tensor3<double> g = conn.evaluate(p);
    for (int c : s.transverse)
      for (int b : s.leaf)
        for (int a = 0; a < d; ++a) worst = std::max(worst, std::abs(g.at(c, b, a)));
  }
  return worst;
}

struct PresymplecticReduction {
  Chart quotient_chart;
  ConnectionCoeffs reduced;
  TwoFormField reduced_form;
  CheckReport checks;
};

/// Projects a projectable connection to the local leaf space: the quotient
/// chart keeps the transverse coordinates, the Christoffels and the form are
/// evaluated along an arbitrary leaf (the domain center of the leaf block).
inline PresymplecticReduction reduce_presymplectic(const ConnectionCoeffs& conn,
                                                   const PresymplecticStructure& ps,
                                                   std::uint64_t seed = kDefaultSeed) {
  const CheckReport pre = projectability_check(conn, ps, seed);
  if (!pre.overall_pass())
    throw PresymplecticError("reduce_presymplectic: connection is not projectable");

  const auto s = ps.splitting();
  const int m = 2 * ps.n();
  std::vector<std::string> coords;
  std::vector<std::array<double, 2>> domain;
  for (int i : s.transverse) {
    coords.push_back(ps.chart().coord(i));
    domain.push_back(ps.chart().domain()[i]);
  }
  Chart quotient(std::move(coords), std::move(domain));

  std::unordered_map<std::string, ScalarExpr> leaf_section;
  for (int z : s.leaf) {
    const auto& iv = ps.chart().domain()[z];
    leaf_section.emplace(ps.chart().coord(z), ScalarExpr::constant(0.5 * (iv[0] + iv[1])));
  }

  ConnectionCoeffs reduced = ConnectionCoeffs::zero(quotient);
  for (int c = 0; c < m; ++c)
    for (int b = 0; b < m; ++b)
      for (int a = 0; a < m; ++a)
        reduced.set_gamma(
            c, b, a,
            conn.gamma(s.transverse[c], s.transverse[b], s.transverse[a])
                .substitute(leaf_section)
                .simplified());

  TwoFormField reduced_form(quotient);
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j)
      reduced_form.set_entry(i, j, ps.omega().entry(s.transverse[i], s.transverse[j]));
  reduced_form.declared_kind = FormKind::Symplectic;

  PresymplecticReduction out{std::move(quotient), std::move(reduced), std::move(reduced_form), pre};
  const auto qpts = out.quotient_chart.sample_points(seed);
  {
    CheckItem item;
    item.name = "reduced_torsion_free";
    item.tolerance = 1e-9;
    item.max_residual = max_residual(torsion_tensor(out.reduced), out.quotient_chart, qpts);
    item.pass = item.max_residual <= item.tolerance;
    out.checks.add(item);
  }
  {
    CheckItem item;
    item.name = "reduced_compatible";
    item.tolerance = 1e-9;
    item.max_residual =
        max_residual(nabla_omega(out.reduced, out.reduced_form), out.quotient_chart, qpts);
    item.pass = item.max_residual <= item.tolerance;
    out.checks.add(item);
  }
  return out;
}

}  // namespace conred
