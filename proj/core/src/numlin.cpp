#include "mismatch/numlin.hpp"

#include "mismatch/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace mismatch {

namespace {

void require_finite(const Matrix& a, const char* what) {
  if (!a.allFinite()) {
    throw Error(ErrorCode::NumericalFailure, std::string(what) + ": non-finite entry");
  }
}

}  // namespace

SpectralDecomposition sym_eig(const Matrix& a) {
  if (a.rows() != a.cols()) {
    throw Error(ErrorCode::NonSquare, "sym_eig expects a square matrix, got " +
                                          std::to_string(a.rows()) + "x" +
                                          std::to_string(a.cols()));
  }
  require_finite(a, "sym_eig");
  const Index n = a.rows();
  if (n == 0) return {Vector(0), Matrix(0, 0)};

  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-8 * scale) {
    throw Error(ErrorCode::AsymmetryTooLarge,
                "asymmetry " + format_double(asym) + " exceeds tolerance");
  }
  const Matrix sym = 0.5 * (a + a.transpose());

  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::NumericalFailure, "symmetric eigensolver did not converge");
  }
  // Eigen returns ascending order.
  SpectralDecomposition out;
  out.eigenvalues = solver.eigenvalues().reverse();
  out.eigenvectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

Svd svd(const Matrix& a) {
  require_finite(a, "svd");
  const Index m = a.rows();
  const Index n = a.cols();
  if (m == 0 || n == 0) {
    return {Matrix::Identity(m, m), Vector(0), Matrix::Identity(n, n)};
  }
  Eigen::JacobiSVD<Matrix> solver(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::NumericalFailure, "SVD did not converge");
  }
  return {solver.matrixU(), solver.singularValues(), solver.matrixV()};
}

Index rank_with_tol(const Vector& values, double rel_tol) {
  if (values.size() == 0 || values[0] <= 0.0) return 0;
  const double threshold = rel_tol * values[0];
  Index count = 0;
  for (Index k = 0; k < values.size(); ++k) {
    if (values[k] > threshold) ++count;
  }
  return count;
}

double orthonormality_error(const Matrix& a) {
  if (a.cols() == 0) return 0.0;
  return (a.transpose() * a - Matrix::Identity(a.cols(), a.cols())).cwiseAbs().maxCoeff();
}

Matrix orthonormal_complement(const Matrix& b) {
  const Index n = b.rows();
  const Index k = b.cols();
  if (k > n || orthonormality_error(b) > 1e-8) {
    throw Error(ErrorCode::NotOrthonormal, "orthonormal_complement expects orthonormal columns");
  }
  if (k == 0) return Matrix::Identity(n, n);
  if (k == n) return Matrix(n, 0);
  Eigen::HouseholderQR<Matrix> qr(b);
  const Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  return q.rightCols(n - k);
}

Matrix orthonormalize(const Matrix& m, double rel_tol) {
  if (m.cols() == 0 || m.rows() == 0) return Matrix(m.rows(), 0);
  Eigen::JacobiSVD<Matrix> solver(m, Eigen::ComputeThinU);
  const Vector& s = solver.singularValues();
  const double threshold = rel_tol * std::max(1.0, s.size() > 0 ? s[0] : 0.0);
  Index keep = 0;
  while (keep < s.size() && s[keep] > threshold) ++keep;
  return solver.matrixU().leftCols(keep);
}

namespace {

// Eigenvalues of a PSD matrix kept by the pseudo-determinant rule.
std::vector<double> pdet_eigenvalues(const Matrix& a, double rel_tol) {
  const Vector values = sym_eig(a).eigenvalues;
  std::vector<double> kept;
  if (values.size() == 0) return kept;
  const double top = values[0];
  if (top <= 0.0) {
    if (top < 0.0 || values.minCoeff() < 0.0) {
      throw Error(ErrorCode::NotPSD, "pdet of a matrix with only nonpositive eigenvalues");
    }
    return kept;
  }
  if (values[values.size() - 1] < -1e-10 * top) {
    throw Error(ErrorCode::NotPSD, "eigenvalue " + format_double(values[values.size() - 1]) +
                                       " below -1e-10 * lambda_max");
  }
  for (Index k = 0; k < values.size(); ++k) {
    if (values[k] > rel_tol * top) kept.push_back(values[k]);
  }
  return kept;
}

}  // namespace

double pdet(const Matrix& a, double rel_tol) {
  double product = 1.0;
  for (double v : pdet_eigenvalues(a, rel_tol)) product *= v;
  return product;
}

double log_pdet(const Matrix& a, double rel_tol) {
  double sum = 0.0;
  for (double v : pdet_eigenvalues(a, rel_tol)) sum += std::log(v);
  return sum;
}

double logdet_pd(const Matrix& a) {
  const Vector values = sym_eig(a).eigenvalues;
  if (values.size() > 0 && values[values.size() - 1] <= 0.0) {
    throw Error(ErrorCode::NotPD, "logdet_pd: smallest eigenvalue " +
                                      format_double(values[values.size() - 1]));
  }
  return values.array().log().sum();
}

bool is_pd(const Matrix& a, std::optional<double> abs_tol) {
  const Vector values = sym_eig(a).eigenvalues;
  if (values.size() == 0) return true;
  const double tol = abs_tol.value_or(1e-12 * std::max(1.0, values[0]));
  return values[values.size() - 1] > tol;
}

double min_eig_sym(const Matrix& a) {
  const Vector values = sym_eig(a).eigenvalues;
  if (values.size() == 0) {
    throw Error(ErrorCode::NumericalFailure, "min_eig_sym of an empty matrix");
  }
  return values[values.size() - 1];
}

double spectral_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  return svd(a).singular_values[0];
}

Matrix read_matrix_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream fields(line);
    std::string field;
    while (std::getline(fields, field, ',')) {
      const auto first = field.find_first_not_of(" \t");
      const auto last = field.find_last_not_of(" \t");
      if (first == std::string::npos) {
        throw Error(ErrorCode::ParseError, "empty field on line " + std::to_string(line_no));
      }
      const std::string token = field.substr(first, last - first + 1);
      double value = 0.0;
      const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
      if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(value)) {
        throw Error(ErrorCode::ParseError,
                    "bad number '" + token + "' on line " + std::to_string(line_no));
      }
      row.push_back(value);
    }
    if (!line.empty() && line.back() == ',') {
      throw Error(ErrorCode::ParseError, "trailing comma on line " + std::to_string(line_no));
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw Error(ErrorCode::ParseError, "ragged row on line " + std::to_string(line_no));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) return Matrix(0, 0);
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) m(r, c) = rows[r][c];
  }
  return m;
}

Matrix read_matrix_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return read_matrix_csv(in);
}

void write_matrix_csv(std::ostream& out, const Matrix& m) {
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      if (c > 0) out << ',';
      out << format_double(m(r, c));
    }
    out << '\n';
  }
}

void write_matrix_csv_file(const std::string& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  write_matrix_csv(out, m);
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) return "nan";
  return std::string(buf, ptr);
}

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonSquare: return "NonSquare";
    case ErrorCode::AsymmetryTooLarge: return "AsymmetryTooLarge";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::NotOrthonormal: return "NotOrthonormal";
    case ErrorCode::NotPSD: return "NotPSD";
    case ErrorCode::NotPD: return "NotPD";
    case ErrorCode::AmbientMismatch: return "AmbientMismatch";
    case ErrorCode::TrivialSubspace: return "TrivialSubspace";
    case ErrorCode::NotContained: return "NotContained";
    case ErrorCode::RankExceedsAmbient: return "RankExceedsAmbient";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::EmptySampleSet: return "EmptySampleSet";
    case ErrorCode::RankTooLarge: return "RankTooLarge";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonpositiveNoise: return "NonpositiveNoise";
    case ErrorCode::DegenerateMismatchedRank: return "DegenerateMismatchedRank";
    case ErrorCode::SigmaNotPD: return "SigmaNotPD";
    case ErrorCode::ConditionsFail: return "ConditionsFail";
    case ErrorCode::KernelDetNonpositive: return "KernelDetNonpositive";
    case ErrorCode::DiagonalityViolated: return "DiagonalityViolated";
    case ErrorCode::NotOrthogonal: return "NotOrthogonal";
    case ErrorCode::DegenerateOverlap: return "DegenerateOverlap";
    case ErrorCode::InsufficientPoints: return "InsufficientPoints";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace mismatch
