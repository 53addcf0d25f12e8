#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace conred {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline std::vector<double> singular_values(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  std::vector<double> out(svd.singularValues().data(),
                          svd.singularValues().data() + svd.singularValues().size());
  return out;
}

inline double smallest_singular_value(const Matrix& m) {
  auto sv = singular_values(m);
  return sv.empty() ? 0.0 : sv.back();
}

inline int numeric_rank(const Matrix& m, double tol) {
  int r = 0;
  for (double s : singular_values(m))
    if (s > tol) ++r;
  return r;
}

/// Modified Gram-Schmidt over the rows of `m`, in row order; rows that fall
/// below `tol` after projection are dropped.  The fixed order keeps every
/// derived basis reproducible.
inline Matrix orthonormal_rows(const Matrix& m, double tol = 1e-12) {
  std::vector<Vector> rows;
  for (int r = 0; r < m.rows(); ++r) {
    Vector v = m.row(r).transpose();
    for (const auto& q : rows) v -= q.dot(v) * q;
    const double n = v.norm();
    if (n > tol) rows.push_back(v / n);
  }
  Matrix out(static_cast<int>(rows.size()), m.cols());
  for (int r = 0; r < out.rows(); ++r) out.row(r) = rows[r].transpose();
  return out;
}

/// Deterministic orthonormal basis of the null space of `constraints`:
/// candidate vectors e_1, e_2, ... are projected off the constraint row
/// space and then off each other, in index order.
inline std::vector<Vector> null_space_basis(const Matrix& constraints, double tol = 1e-10) {
  const int n = static_cast<int>(constraints.cols());
  const Matrix q = orthonormal_rows(constraints);
  std::vector<Vector> basis;
  const int want = n - static_cast<int>(q.rows());
  for (int i = 0; i < n && static_cast<int>(basis.size()) < want; ++i) {
    Vector v = Vector::Zero(n);
    v(i) = 1.0;
    for (int r = 0; r < q.rows(); ++r) v -= q.row(r).dot(v) * q.row(r).transpose();
    for (const auto& b : basis) v -= b.dot(v) * b;
    const double nn = v.norm();
    if (nn > tol) basis.push_back(v / nn);
  }
  return basis;
}

/// Least-norm solution of N x = c (for full-row-rank N).
inline Vector least_norm_solution(const Matrix& n, const Vector& c) {
  return n.completeOrthogonalDecomposition().pseudoInverse() * c;
}

inline Matrix invert_matrix(const Matrix& m, double det_tol = 1e-10) {
  Eigen::FullPivLU<Matrix> lu(m);
  if (std::abs(lu.determinant()) <= det_tol)
    throw std::runtime_error("matrix inversion: determinant below threshold");
  return lu.inverse();
}

}  // namespace conred
