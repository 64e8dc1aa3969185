#include "mismatch/subspace.hpp"

#include "mismatch/error.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace mismatch {

namespace {

// Thin Q of a full-column-rank matrix; keeps the column count fixed so the
// dimension bookkeeping never drifts.
Matrix reorthonormalize(const Matrix& m) {
  if (m.cols() == 0) return Matrix(m.rows(), 0);
  Eigen::HouseholderQR<Matrix> qr(m);
  return qr.householderQ() * Matrix::Identity(m.rows(), m.cols());
}

void require_same_ambient(const Subspace& a, const Subspace& b) {
  if (a.ambient_dim() != b.ambient_dim()) {
    throw Error(ErrorCode::AmbientMismatch,
                "ambient dimensions " + std::to_string(a.ambient_dim()) + " and " +
                    std::to_string(b.ambient_dim()));
  }
}

Matrix pick_columns(const Matrix& m, const std::vector<Index>& cols) {
  Matrix out(m.rows(), static_cast<Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Index>(k)) = m.col(cols[k]);
  return out;
}

}  // namespace

Subspace::Subspace(Index ambient_dim, Matrix basis) : ambient_dim_(ambient_dim), basis_(std::move(basis)) {
  if (basis_.cols() == 0) basis_.resize(ambient_dim_, 0);
  if (basis_.rows() != ambient_dim_) {
    throw Error(ErrorCode::DimensionMismatch, "basis has " + std::to_string(basis_.rows()) +
                                                  " rows, ambient dimension is " +
                                                  std::to_string(ambient_dim_));
  }
  if (basis_.cols() > ambient_dim_) {
    throw Error(ErrorCode::RankExceedsAmbient, "more basis vectors than ambient dimension");
  }
  if (orthonormality_error(basis_) > 1e-8) {
    throw Error(ErrorCode::NotOrthonormal, "subspace basis is not orthonormal");
  }
}

Subspace Subspace::trivial(Index ambient_dim) { return Subspace(ambient_dim, Matrix(ambient_dim, 0)); }

Subspace Subspace::from_columns(const Matrix& columns, double rel_tol) {
  return Subspace(columns.rows(), orthonormalize(columns, rel_tol));
}

PrincipalAngles principal_angles(const Subspace& y, const Subspace& z) {
  require_same_ambient(y, z);
  if (y.is_trivial() || z.is_trivial()) {
    throw Error(ErrorCode::TrivialSubspace, "principal angles need nontrivial subspaces");
  }
  const Vector s = svd(y.basis().transpose() * z.basis()).singular_values;
  PrincipalAngles out;
  out.cosines = s.cwiseMax(0.0).cwiseMin(1.0);
  out.angles = out.cosines.unaryExpr([](double c) { return std::acos(c); });
  return out;
}

namespace {

double sine_from_cosine(double c) { return std::sqrt(std::max(0.0, 1.0 - c * c)); }

}  // namespace

double d_max(const Subspace& y, const Subspace& z) {
  const PrincipalAngles pa = principal_angles(y, z);
  return sine_from_cosine(pa.cosines[0]);
}

double d_min(const Subspace& y, const Subspace& z) {
  const PrincipalAngles pa = principal_angles(y, z);
  return sine_from_cosine(pa.cosines[pa.cosines.size() - 1]);
}

Subspace intersect(const Subspace& y, const Subspace& z, double cos_tol) {
  require_same_ambient(y, z);
  const Index n = y.ambient_dim();
  if (y.is_trivial() || z.is_trivial()) return Subspace::trivial(n);
  const Svd f = svd(y.basis().transpose() * z.basis());
  std::vector<Index> keep;
  for (Index l = 0; l < f.singular_values.size(); ++l) {
    if (f.singular_values[l] >= 1.0 - cos_tol) keep.push_back(l);
  }
  if (keep.empty()) return Subspace::trivial(n);
  return Subspace(n, reorthonormalize(y.basis() * pick_columns(f.left, keep)));
}

Subspace complement_within(const Subspace& y, const Subspace& s, double contain_tol) {
  require_same_ambient(y, s);
  const Index n = y.ambient_dim();
  if (s.is_trivial()) return y;
  const Matrix coords = y.basis().transpose() * s.basis();
  const double leak = spectral_norm(s.basis() - y.basis() * coords);
  if (leak > contain_tol) {
    throw Error(ErrorCode::NotContained,
                "subspace leaves its container by " + format_double(leak));
  }
  const Index k = y.dim() - s.dim();
  if (k <= 0) return Subspace::trivial(n);
  const Svd f = svd(coords);
  return Subspace(n, reorthonormalize(y.basis() * f.left.rightCols(k)));
}

Subspace intersect_with_kernel(const Subspace& y, const Subspace& t, double cos_tol) {
  require_same_ambient(y, t);
  const Index n = y.ambient_dim();
  if (t.is_trivial() || y.is_trivial()) return y;
  const Svd f = svd(t.basis().transpose() * y.basis());
  std::vector<Index> keep;
  for (Index l = 0; l < y.dim(); ++l) {
    // Directions beyond the number of singular values map to zero.
    const double s = l < f.singular_values.size() ? f.singular_values[l] : 0.0;
    if (s <= cos_tol) keep.push_back(l);
  }
  if (keep.empty()) return Subspace::trivial(n);
  return Subspace(n, reorthonormalize(y.basis() * pick_columns(f.right, keep)));
}

PairSplit pair_decomposition(const Subspace& ui_mis, const Subspace& uj_mis, double cos_tol) {
  PairSplit out;
  out.shared = intersect(ui_mis, uj_mis, cos_tol);
  // The shared basis is built inside U~_i; a cosine of 1 - cos_tol leaves
  // U~_j by up to sqrt(2 cos_tol).
  const double slack = std::sqrt(2.0 * cos_tol) + 1e-8;
  out.own_ij = complement_within(ui_mis, out.shared);
  out.own_ji = complement_within(uj_mis, out.shared, slack);
  return out;
}

MismatchSplit mismatch_geometry(const Subspace& ui, const Subspace& own_ij, double cos_tol) {
  MismatchSplit out;
  out.w = intersect_with_kernel(ui, own_ij, cos_tol);
  out.v = complement_within(ui, out.w);
  return out;
}

}  // namespace mismatch
