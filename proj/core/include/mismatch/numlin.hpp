#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>

namespace mismatch {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Default relative threshold for numerical rank decisions.
inline constexpr double kDefaultRankTol = 1e-10;

struct SpectralDecomposition {
  Vector eigenvalues;   // descending
  Matrix eigenvectors;  // columns orthonormal, aligned with eigenvalues
};

struct Svd {
  Matrix left;             // full, rows x rows
  Vector singular_values;  // descending, length min(rows, cols)
  Matrix right;            // full, cols x cols
};

/// Symmetric eigendecomposition of (A + A^T)/2. Rejects inputs whose
/// asymmetry exceeds 1e-8 * max(1, |A|_max).
SpectralDecomposition sym_eig(const Matrix& a);

/// Full SVD. Works for empty and zero matrices.
Svd svd(const Matrix& a);

/// Number of entries strictly greater than rel_tol * values[0].
Index rank_with_tol(const Vector& values, double rel_tol = kDefaultRankTol);

/// Basis C of the orthogonal complement of im(B), so that [B | C] is an
/// orthonormal basis of R^N. B must have orthonormal columns within 1e-8.
Matrix orthonormal_complement(const Matrix& b);

/// Orthonormal basis of im(M) from its left singular vectors; columns with
/// singular value <= rel_tol * max(1, s_max) are dropped.
Matrix orthonormalize(const Matrix& m, double rel_tol = 1e-8);

/// Product of the eigenvalues above rel_tol * lambda_max. The zero matrix
/// has pdet 1 (empty product).
double pdet(const Matrix& a, double rel_tol = kDefaultRankTol);
double log_pdet(const Matrix& a, double rel_tol = kDefaultRankTol);

/// log|A| for symmetric positive definite A.
double logdet_pd(const Matrix& a);

/// min eigenvalue > abs_tol; abs_tol defaults to 1e-12 * max(1, lambda_max).
bool is_pd(const Matrix& a, std::optional<double> abs_tol = std::nullopt);

double min_eig_sym(const Matrix& a);

double spectral_norm(const Matrix& a);

/// Max entrywise |A^T A - I|.
double orthonormality_error(const Matrix& a);

// Matrix CSV: one row per line, comma separated, no header.
Matrix read_matrix_csv(std::istream& in);
Matrix read_matrix_csv_file(const std::string& path);
void write_matrix_csv(std::ostream& out, const Matrix& m);
void write_matrix_csv_file(const std::string& path, const Matrix& m);

/// Shortest round-trip decimal form of a double.
std::string format_double(double value);

}  // namespace mismatch
