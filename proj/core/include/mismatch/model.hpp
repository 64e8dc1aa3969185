#pragma once

#include "mismatch/numlin.hpp"
#include "mismatch/rng.hpp"
#include "mismatch/subspace.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mismatch {

/// Either a forced rank or a relative eigenvalue threshold.
struct RankSpec {
  std::optional<Index> rank;
  double rel_tol = kDefaultRankTol;

  static RankSpec exact(Index r) { return {r, kDefaultRankTol}; }
  static RankSpec tolerance(double t) { return {std::nullopt, t}; }
};

struct ClassModel {
  double prior = 0.0;
  Matrix covariance;     // as given (symmetrized)
  Subspace basis;        // U, N x r
  Vector eigenvalues;    // lambda_1 >= ... >= lambda_r > 0

  Index rank() const { return basis.dim(); }
  Index ambient_dim() const { return basis.ambient_dim(); }
  /// U diag(lambda) U^T.
  Matrix low_rank_covariance() const;
};

ClassModel from_covariance(double prior, const Matrix& cov, const RankSpec& rank = {});

/// Model directly from factors; basis must be orthonormal, eigenvalues positive.
ClassModel from_factors(double prior, const Matrix& basis, const Vector& eigenvalues);

struct ProblemInstance {
  Index ambient_dim = 0;
  std::vector<ClassModel> true_models;
  std::vector<ClassModel> mismatched_models;

  std::size_t num_classes() const { return true_models.size(); }
  /// Throws InvalidArgument / DimensionMismatch on a malformed instance.
  void validate() const;
};

/// Draws (label, y) from the true models with y = x + n.
class Sampler {
 public:
  Sampler(const ProblemInstance& instance, double noise_var);

  /// Writes the observation into y (resized on first use) and returns the label.
  int draw(Rng& rng, Vector& y) const;

 private:
  std::vector<Matrix> factors_;  // U diag(sqrt(lambda))
  std::vector<double> cumulative_;
  double noise_sd_;
  Index n_;
};

struct Sample {
  int label;
  Vector y;
};

Sample sample(const ProblemInstance& instance, double noise_var, Rng& rng);

/// Zero-mean ML estimate (1/n) X^T X truncated to the given rank. Rows of X are samples.
ClassModel estimate_from_samples(const Matrix& samples, double prior, Index rank);

/// Classes without an explicit rank are truncated at rank_tol.
ProblemInstance load_instance_json(const std::string& path, double rank_tol = kDefaultRankTol);
ProblemInstance parse_instance_json(const std::string& text, const std::string& base_dir = ".",
                                    double rank_tol = kDefaultRankTol);
std::string instance_to_json(const ProblemInstance& instance);
void save_instance_json(const std::string& path, const ProblemInstance& instance);

struct LabeledData {
  Matrix features;          // n x N
  std::vector<int> labels;  // 0-based

  int num_classes() const;
  /// Row indices per class.
  std::vector<std::vector<Index>> class_rows() const;
};

LabeledData read_dataset_csv(std::istream& in);
LabeledData read_dataset_csv_file(const std::string& path);
void write_dataset_csv(std::ostream& out, const LabeledData& data);
void write_dataset_csv_file(const std::string& path, const LabeledData& data);

}  // namespace mismatch
