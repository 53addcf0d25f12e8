#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "conred/chart.hpp"
#include "conred/expr.hpp"
#include "conred/geometry.hpp"
#include "conred/numeric.hpp"
#include "conred/tensor.hpp"

namespace conred {

struct SymplecticError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class FormKind { Symplectic, Presymplectic };

/// Antisymmetric 2-form field; only the strict upper triangle is stored, the
/// rest is derived, so omega_ij = -omega_ji holds identically.
class TwoFormField {
 public:
  TwoFormField() = default;

  explicit TwoFormField(Chart chart)
      : chart_(std::move(chart)),
        upper_(static_cast<std::size_t>(chart_.dim()) * chart_.dim(), ScalarExpr::constant(0.0)) {}

  const Chart& chart() const { return chart_; }
  int dim() const { return chart_.dim(); }

  /// omega_ij; diagonal entries are the literal zero.
  ScalarExpr entry(int i, int j) const {
    check(i), check(j);
    if (i == j) return ScalarExpr::constant(0.0);
    if (i < j) return upper_[i * dim() + j];
    return (-upper_[j * dim() + i]).simplified();
  }

  void set_entry(int i, int j, ScalarExpr e) {
    check(i), check(j);
    if (i == j) throw SymplecticError("two-form diagonal entries are identically zero");
    if (i < j)
      upper_[i * dim() + j] = std::move(e);
    else
      upper_[j * dim() + i] = (-e).simplified();
  }

  Matrix evaluate(const Point& p) const {
    const int d = dim();
    const EvalEnv env = chart_.env(p);
    Matrix m = Matrix::Zero(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j) {
        m(i, j) = upper_[i * d + j].evaluate(env);
        m(j, i) = -m(i, j);
      }
    return m;
  }

  ExprMatrix full_matrix() const {
    const int d = dim();
    ExprMatrix m(d, std::vector<ScalarExpr>(d));
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) m[i][j] = entry(i, j);
    return m;
  }

  bool constant_coefficients() const {
    for (const auto& e : upper_)
      if (!e.simplified().literal()) return false;
    return true;
  }

  /// Declared classification, carried by scene files; the numeric checks
  /// below decide whether the declaration actually holds.
  std::optional<FormKind> declared_kind;
  int declared_rank = -1;  // 2n for presymplectic forms

 private:
  void check(int i) const {
    if (i < 0 || i >= dim()) throw SymplecticError("two-form index out of range");
  }

  Chart chart_;
  std::vector<ScalarExpr> upper_;
};

/// (d omega)_{ijk} = d_i omega_{jk} + d_j omega_{ki} + d_k omega_{ij},
/// fully antisymmetric by construction.
inline Tensor3<ScalarExpr> exterior_derivative(const TwoFormField& omega) {
  const int d = omega.dim();
  Tensor3<ScalarExpr> out(d, ScalarExpr::constant(0.0));
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j)
      for (int k = j + 1; k < d; ++k) {
        ScalarExpr e = sum_simplified({omega.entry(j, k).differentiate(omega.chart().coord(i)),
                                       omega.entry(k, i).differentiate(omega.chart().coord(j)),
                                       omega.entry(i, j).differentiate(omega.chart().coord(k))});
        const ScalarExpr ne = (-e).simplified();
        out.at(i, j, k) = e;
        out.at(j, k, i) = e;
        out.at(k, i, j) = e;
        out.at(j, i, k) = ne;
        out.at(i, k, j) = ne;
        out.at(k, j, i) = ne;
      }
  return out;
}

/// Max |(d omega)_{ijk}| over the points.
inline double closedness_residual(const TwoFormField& omega, const std::vector<Point>& pts) {
  const auto dw = exterior_derivative(omega);
  double worst = 0.0;
  for (const auto& p : pts) {
    const EvalEnv env = omega.chart().env(p);
    const int d = omega.dim();
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j)
        for (int k = j + 1; k < d; ++k)
          worst = std::max(worst, std::abs(dw.at(i, j, k).evaluate(env)));
  }
  return worst;
}

/// (nabla omega)_{ij;k} = d_k omega_ij - G^l_{ik} omega_lj - G^l_{jk} omega_il,
/// stored as out.at(i, j, k) with k the differentiation direction;
/// antisymmetric in (i, j) by construction.
inline Tensor3<ScalarExpr> nabla_omega(const ConnectionCoeffs& conn, const TwoFormField& omega) {
  require_same_coords(conn.chart(), omega.chart(), "nabla_omega");
  const int d = conn.dim();
  Tensor3<ScalarExpr> out(d, ScalarExpr::constant(0.0));
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j)
      for (int k = 0; k < d; ++k) {
        std::vector<ScalarExpr> terms;
        terms.push_back(omega.entry(i, j).differentiate(conn.chart().coord(k)));
        for (int l = 0; l < d; ++l) {
          terms.push_back(-(conn.gamma(l, i, k) * omega.entry(l, j)));
          terms.push_back(-(conn.gamma(l, j, k) * omega.entry(i, l)));
        }
        ScalarExpr e = sum_simplified(terms);
        out.at(i, j, k) = e;
        out.at(j, i, k) = (-e).simplified();
      }
  return out;
}

inline double max_residual(const Tensor3<ScalarExpr>& t, const Chart& chart,
                           const std::vector<Point>& pts) {
  double worst = 0.0;
  for (const auto& p : pts) {
    const EvalEnv env = chart.env(p);
    for (const auto& e : t.flat()) worst = std::max(worst, std::abs(e.evaluate(env)));
  }
  return worst;
}

/// Inverse of the Gram matrix omega(b_a, b_c) at a point, restricted to the
/// span of `basis`.  Throws on a degenerate restriction.
inline Matrix invert_on_span(const TwoFormField& omega, const Point& p,
                             const std::vector<std::vector<double>>& basis) {
  const int d = omega.dim();
  const int m = static_cast<int>(basis.size());
  const Matrix w = omega.evaluate(p);
  Matrix gram(m, m);
  for (int a = 0; a < m; ++a) {
    if (static_cast<int>(basis[a].size()) != d)
      throw SymplecticError("invert_on_span: basis vector dimension mismatch");
    for (int c = 0; c < m; ++c) {
      double s = 0.0;
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) s += basis[a][i] * w(i, j) * basis[c][j];
      gram(a, c) = s;
    }
  }
  Eigen::FullPivLU<Matrix> lu(gram);
  if (std::abs(lu.determinant()) <= 1e-10)
    throw SymplecticError("invert_on_span: restricted form is degenerate");
  return lu.inverse();
}

/// Verdicts for the classification flags.
inline bool is_symplectic(const TwoFormField& omega, const std::vector<Point>& pts,
                          double closed_tol = 1e-10, double det_tol = 1e-10) {
  if (closedness_residual(omega, pts) > closed_tol) return false;
  for (const auto& p : pts)
    if (std::abs(omega.evaluate(p).determinant()) <= det_tol) return false;
  return true;
}

inline bool has_constant_rank(const TwoFormField& omega, int rank, const std::vector<Point>& pts,
                              double zero_tol = 1e-8, double nonzero_tol = 1e-6) {
  const int d = omega.dim();
  for (const auto& p : pts) {
    const auto sv = singular_values(omega.evaluate(p));
    for (int i = 0; i < d; ++i) {
      if (i < rank && sv[i] <= nonzero_tol) return false;
      if (i >= rank && sv[i] >= zero_tol) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// The compatibility correction
// ---------------------------------------------------------------------------

/// Outcome of symplectize.  The correction splits into the part that
/// enforces compatibility (coefficient 1/2 in the defining relation) and the
/// skew part (the 1/6 terms), which on its own preserves compatibility:
/// omega(skew(X,Y),Z) + omega(Y, skew(X,Z)) = 0.
struct SymplectizeResult {
  ConnectionCoeffs connection;
  Tensor3<ScalarExpr> compat_correction;
  Tensor3<ScalarExpr> skew_correction;
};

/// Corrects a torsionless connection into an omega-compatible torsionless
/// one:  nabla = conn + A  with
///   omega(A(X,Y),Z) = 1/2 (nabla^o_X omega)(Y,Z)
///                   + 1/6 { (nabla^o_Y omega)(X,Z) + (nabla^o_Z omega)(X,Y) }.
/// Requires conn symmetric and omega symplectic (closed and nondegenerate);
/// closedness is what makes the output torsionless.
inline SymplectizeResult symplectize(const ConnectionCoeffs& conn, const TwoFormField& omega,
                                     std::uint64_t seed = kDefaultSeed) {
  require_same_coords(conn.chart(), omega.chart(), "symplectize");
  const auto pts = conn.chart().sample_points(seed);
  if (conn.symmetry_residual(pts) > 1e-10)
    throw SymplecticError("symplectize: connection is not symmetric");
  if (closedness_residual(omega, pts) > 1e-10)
    throw SymplecticError("symplectize: form is not closed");
  for (const auto& p : pts)
    if (std::abs(omega.evaluate(p).determinant()) <= 1e-10)
      throw SymplecticError("symplectize: form is degenerate at a sample point");

  const int d = conn.dim();
  const auto n = nabla_omega(conn, omega);

  // Transposed inverse of [omega_kl]; for constant-coefficient forms this is
  // an exact constant matrix.
  const ExprMatrix winv = invert_expr_matrix(omega.full_matrix());
  auto winv_t = [&](int k, int l) { return winv[l][k]; };

  const ScalarExpr half = ScalarExpr::constant(0.5);
  const ScalarExpr sixth = ScalarExpr::constant(1.0) / ScalarExpr::constant(6.0);

  SymplectizeResult out{ConnectionCoeffs::zero(conn.chart()),
                        Tensor3<ScalarExpr>(d, ScalarExpr::constant(0.0)),
                        Tensor3<ScalarExpr>(d, ScalarExpr::constant(0.0))};

  for (int i = 0; i < d; ++i)      // direction X
    for (int j = 0; j < d; ++j) {  // field Y
      for (int k = 0; k < d; ++k) {
        std::vector<ScalarExpr> compat_terms, skew_terms;
        for (int l = 0; l < d; ++l) {
          compat_terms.push_back(winv_t(k, l) * half * n.at(j, l, i));
          skew_terms.push_back(winv_t(k, l) * sixth * (n.at(i, l, j) + n.at(i, j, l)));
        }
        out.compat_correction.at(k, j, i) = sum_simplified(compat_terms);
        out.skew_correction.at(k, j, i) = sum_simplified(skew_terms);
        out.connection.set_gamma(
            k, j, i,
            sum_simplified({conn.gamma(k, j, i), out.compat_correction.at(k, j, i),
                            out.skew_correction.at(k, j, i)}));
      }
    }
  return out;
}

}  // namespace conred
