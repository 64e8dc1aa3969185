#pragma once

#include "mismatch/numlin.hpp"

namespace mismatch {

inline constexpr double kDefaultCosTol = 1e-9;

/// Linear subspace of R^N held by an orthonormal basis. k = 0 is the
/// trivial subspace {0}.
class Subspace {
 public:
  Subspace() = default;

  /// Basis columns must be orthonormal within 1e-8.
  Subspace(Index ambient_dim, Matrix basis);

  static Subspace trivial(Index ambient_dim);
  /// Span of arbitrary columns (orthonormalized, rank-revealing).
  static Subspace from_columns(const Matrix& columns, double rel_tol = 1e-8);

  Index ambient_dim() const { return ambient_dim_; }
  Index dim() const { return basis_.cols(); }
  bool is_trivial() const { return basis_.cols() == 0; }
  const Matrix& basis() const { return basis_; }
  Matrix projector() const { return basis_ * basis_.transpose(); }

 private:
  Index ambient_dim_ = 0;
  Matrix basis_;
};

struct PrincipalAngles {
  Vector cosines;  // descending
  Vector angles;   // ascending, radians
};

PrincipalAngles principal_angles(const Subspace& y, const Subspace& z);

/// sin of the smallest principal angle.
double d_max(const Subspace& y, const Subspace& z);
/// sin of the largest principal angle.
double d_min(const Subspace& y, const Subspace& z);

Subspace intersect(const Subspace& y, const Subspace& z, double cos_tol = kDefaultCosTol);

/// Orthogonal complement of im(S) inside im(Y). S must lie in im(Y):
/// ||(I - YY^T) S|| <= contain_tol.
Subspace complement_within(const Subspace& y, const Subspace& s, double contain_tol = 1e-8);

/// {x in im(Y) : T^T x = 0}.
Subspace intersect_with_kernel(const Subspace& y, const Subspace& t,
                               double cos_tol = kDefaultCosTol);

struct PairSplit {
  Subspace shared;  // im(U~_i) ∩ im(U~_j)
  Subspace own_ij;  // rest of U~_i
  Subspace own_ji;  // rest of U~_j
};

PairSplit pair_decomposition(const Subspace& ui_mis, const Subspace& uj_mis,
                             double cos_tol = kDefaultCosTol);

struct MismatchSplit {
  Subspace w;  // part of U_i orthogonal to U~'_ij
  Subspace v;  // its complement inside U_i
};

MismatchSplit mismatch_geometry(const Subspace& ui, const Subspace& own_ij,
                                double cos_tol = kDefaultCosTol);

}  // namespace mismatch
