#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "conred/chart.hpp"
#include "conred/expr.hpp"
#include "conred/geometry.hpp"
#include "conred/symplectic.hpp"

// Cotangent-bundle constructions: the Liouville and canonical forms, the
// horizontal frame of a base connection, its lift to T*P, cotangent lifts of
// base actions with their moment maps, and the full correction pipeline that
// turns a torsionless base connection into a symplectic connection upstairs.

namespace conred {

struct CotangentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Fibre coordinate name conjugate to the i-th base coordinate (0-based i).
inline std::string fibre_coord_name(int i) { return "y_" + std::to_string(i + 1); }

struct CotangentChart {
  Chart base;
  Chart total;
  int n = 0;

  CotangentChart() = default;

  /// Builds the total chart (x^1..x^n, y_1..y_n); each fibre axis is sampled
  /// over [ylo, yhi].
  static CotangentChart over(const Chart& base, double ylo = -2.0, double yhi = 2.0) {
    CotangentChart cc;
    cc.base = base;
    cc.n = base.dim();
    std::vector<std::string> coords = base.coords();
    std::vector<std::array<double, 2>> domain = base.domain();
    for (int i = 0; i < cc.n; ++i) {
      coords.push_back(fibre_coord_name(i));
      domain.push_back({ylo, yhi});
    }
    cc.total = Chart(std::move(coords), std::move(domain));
    return cc;
  }

  /// Reconstructs the split from a 2n-dimensional chart whose trailing
  /// coordinates follow the fibre naming rule.
  static CotangentChart from_total(const Chart& total, int n) {
    if (total.dim() != 2 * n) throw CotangentError("cotangent chart must have dimension 2n");
    for (int i = 0; i < n; ++i)
      if (total.coord(n + i) != fibre_coord_name(i))
        throw CotangentError("fibre coordinate " + std::to_string(n + i + 1) + " must be named '" +
                             fibre_coord_name(i) + "'");
    CotangentChart cc;
    std::vector<std::string> coords(total.coords().begin(), total.coords().begin() + n);
    std::vector<std::array<double, 2>> domain(total.domain().begin(), total.domain().begin() + n);
    cc.base = Chart(std::move(coords), std::move(domain));
    cc.total = total;
    cc.n = n;
    return cc;
  }
};

/// An infinitesimal base action together with its cotangent lift.
struct LinearLiftedAction {
  std::vector<VectorFieldExpr> generators;        // on the base chart
  std::vector<VectorFieldExpr> lifted_generators; // on the total chart
  int lie_algebra_dim = 0;
};

/// lambda = y_i dx^i: components (y_1..y_n, 0..0).
inline std::vector<ScalarExpr> liouville_form(const CotangentChart& cc) {
  std::vector<ScalarExpr> comps(2 * cc.n, ScalarExpr::constant(0.0));
  for (int i = 0; i < cc.n; ++i) comps[i] = cc.total.var(cc.n + i);
  return comps;
}

/// omega = dx^i ^ dy_i = -d lambda.
inline TwoFormField canonical_symplectic_form(const CotangentChart& cc) {
  TwoFormField w(cc.total);
  for (int i = 0; i < cc.n; ++i) w.set_entry(i, cc.n + i, ScalarExpr::constant(1.0));
  w.declared_kind = FormKind::Symplectic;
  return w;
}

/// The frame {X_i, d/dy_i} with X_i = d/dx^i + Gamma^s_{ik} y_s d/dy_k.
/// Unit-triangular in block form, so its determinant is identically one.
inline FrameField horizontal_frame(const ConnectionCoeffs& base_conn, const CotangentChart& cc) {
  require_same_coords(base_conn.chart(), cc.base, "horizontal_frame");
  const int n = cc.n;
  std::vector<VectorFieldExpr> vectors;
  vectors.reserve(2 * n);
  for (int i = 0; i < n; ++i) {
    std::vector<ScalarExpr> comps(2 * n, ScalarExpr::constant(0.0));
    comps[i] = ScalarExpr::constant(1.0);
    for (int k = 0; k < n; ++k) {
      std::vector<ScalarExpr> terms;
      for (int s = 0; s < n; ++s) terms.push_back(base_conn.gamma(s, i, k) * cc.total.var(n + s));
      comps[n + k] = sum_simplified(terms);
    }
    vectors.emplace_back(cc.total, std::move(comps));
  }
  for (int i = 0; i < n; ++i) vectors.push_back(VectorFieldExpr::basis(cc.total, n + i));
  return FrameField(cc.total, std::move(vectors));
}

/// Coordinate Christoffels of the lifted connection, defined against the
/// horizontal frame by
///   nabla_{X_i} X_j          =  Gamma^k_{ji} X_k,
///   nabla_{X_i} d/dy_j       = -Gamma^j_{ik} d/dy_k,
///   nabla_{d/dy_i} (anything in the frame) = 0.
/// The mixed-term index placement is the dual-connection convention; it is
/// the one for which nabla omega = 0 holds (enforced by the test suite).
inline ConnectionCoeffs lift_connection(const ConnectionCoeffs& base_conn,
                                        const CotangentChart& cc,
                                        std::uint64_t seed = kDefaultSeed) {
  require_same_coords(base_conn.chart(), cc.base, "lift_connection");
  const int n = cc.n;
  const int d = 2 * n;
  FrameField frame = horizontal_frame(base_conn, cc);
  Tensor3<ScalarExpr> coeffs(d, ScalarExpr::constant(0.0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        coeffs.at(k, j, i) = base_conn.gamma(k, j, i);
        coeffs.at(n + k, n + j, i) = (-base_conn.gamma(j, i, k)).simplified();
      }
  return frame_to_coordinate_connection(frame, coeffs, seed);
}

/// Cotangent lift of base generators xi^i(x) d/dx^i: the lift appends the
/// fibre components -y_s dxi^s/dx^k.
inline LinearLiftedAction lift_action(const std::vector<VectorFieldExpr>& generators,
                                      const CotangentChart& cc) {
  LinearLiftedAction action;
  action.generators = generators;
  action.lie_algebra_dim = static_cast<int>(generators.size());
  const int n = cc.n;
  for (const auto& gen : generators) {
    require_same_coords(gen.chart, cc.base, "lift_action");
    std::vector<ScalarExpr> comps(2 * n, ScalarExpr::constant(0.0));
    for (int i = 0; i < n; ++i) comps[i] = gen.components[i];
    for (int k = 0; k < n; ++k) {
      std::vector<ScalarExpr> terms;
      for (int s = 0; s < n; ++s)
        terms.push_back(-(cc.total.var(n + s) * gen.components[s].differentiate(cc.base.coord(k))));
      comps[n + k] = sum_simplified(terms);
    }
    action.lifted_generators.emplace_back(cc.total, std::move(comps));
  }
  return action;
}

/// Moment map components J_A = <alpha, A_P> = sum_i xi^i(x) y_i, one per
/// generator.
inline std::vector<ScalarExpr> moment_map_lift(const LinearLiftedAction& action,
                                               const CotangentChart& cc) {
  std::vector<ScalarExpr> out;
  out.reserve(action.generators.size());
  for (const auto& gen : action.generators) {
    std::vector<ScalarExpr> terms;
    for (int i = 0; i < cc.n; ++i) terms.push_back(gen.components[i] * cc.total.var(cc.n + i));
    out.push_back(sum_simplified(terms));
  }
  return out;
}

/// Max residual of the Hamiltonian condition i(A_M) omega = d J_A over the
/// sample points, across all generators.
inline double hamiltonian_residual(const LinearLiftedAction& action, const CotangentChart& cc,
                                   const std::vector<Point>& pts) {
  const TwoFormField omega = canonical_symplectic_form(cc);
  const std::vector<ScalarExpr> moments = moment_map_lift(action, cc);
  const int d = 2 * cc.n;
  double worst = 0.0;
  for (std::size_t g = 0; g < action.lifted_generators.size(); ++g) {
    const auto& lift = action.lifted_generators[g];
    for (const auto& p : pts) {
      const EvalEnv env = cc.total.env(p);
      const Matrix w = omega.evaluate(p);
      for (int m = 0; m < d; ++m) {
        double contraction = 0.0;
        for (int l = 0; l < d; ++l) contraction += lift.components[l].evaluate(env) * w(l, m);
        const double dj = moments[g].differentiate(cc.total.coord(m)).evaluate(env);
        worst = std::max(worst, std::abs(contraction - dj));
      }
    }
  }
  return worst;
}

/// Max residual of the Lie derivative of the Liouville form along each
/// lifted generator: (L_V lambda)_i = V^j d_j lambda_i + lambda_j d_i V^j.
inline double liouville_invariance_residual(const LinearLiftedAction& action,
                                            const CotangentChart& cc,
                                            const std::vector<Point>& pts) {
  const std::vector<ScalarExpr> lambda = liouville_form(cc);
  const int d = 2 * cc.n;
  double worst = 0.0;
  for (const auto& lift : action.lifted_generators) {
    for (int i = 0; i < d; ++i) {
      std::vector<ScalarExpr> terms;
      for (int j = 0; j < d; ++j) {
        terms.push_back(lift.components[j] * lambda[i].differentiate(cc.total.coord(j)));
        terms.push_back(lambda[j] * lift.components[j].differentiate(cc.total.coord(i)));
      }
      const ScalarExpr lie = sum_simplified(terms);
      for (const auto& p : pts) worst = std::max(worst, std::abs(lie.evaluate(cc.total.env(p))));
    }
  }
  return worst;
}

/// Residual of the affine-invariance condition for the affine map
/// p -> L p + b:  L (nabla_{e_i} e_j)(p) vs (nabla_{L e_i} L e_j)(L p + b),
/// over basis fields at the sample points.
inline double affine_invariance_residual(const ConnectionCoeffs& conn, const Matrix& lin,
                                         const Vector& offset, const std::vector<Point>& pts) {
  const int d = conn.dim();
  double worst = 0.0;
  for (const auto& p : pts) {
    const Tensor3<double> g_here = conn.evaluate(p);
    Point q(d);
    for (int i = 0; i < d; ++i) {
      q[i] = offset(i);
      for (int m = 0; m < d; ++m) q[i] += lin(i, m) * p[m];
    }
    const Tensor3<double> g_there = conn.evaluate(q);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k) {
          double lhs = 0.0;
          for (int m = 0; m < d; ++m) lhs += lin(k, m) * g_here.at(m, j, i);
          double rhs = 0.0;
          for (int ii = 0; ii < d; ++ii)
            for (int jj = 0; jj < d; ++jj) rhs += lin(ii, i) * lin(jj, j) * g_there.at(k, jj, ii);
          worst = std::max(worst, std::abs(lhs - rhs));
        }
  }
  return worst;
}

/// Proposition-2.1 pipeline: lift, symmetrise, correct.  The output is
/// torsionless and compatible with the canonical form.
inline ConnectionCoeffs build_affine_symplectic_connection(const ConnectionCoeffs& base_conn,
                                                           const CotangentChart& cc,
                                                           std::uint64_t seed = kDefaultSeed) {
  if (base_conn.symmetry_residual(base_conn.chart().sample_points(seed)) > 1e-10)
    throw CotangentError("build_affine_symplectic_connection: base connection must be torsionless");
  const ConnectionCoeffs lifted = lift_connection(base_conn, cc, seed);
  const ConnectionCoeffs symmetric = symmetric_part(lifted);
  return symplectize(symmetric, canonical_symplectic_form(cc), seed).connection;
}

}  // namespace conred
