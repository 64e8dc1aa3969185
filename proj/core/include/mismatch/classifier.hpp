#pragma once

#include "mismatch/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mismatch {

/// Per-class constants of the Gaussian discriminant at a fixed noise level.
struct DiscriminantCache {
  struct Entry {
    double log_prior;
    double log_det;      // log|Sigma + sigma^2 I|
    Matrix basis;        // U
    Vector inv_shifted;  // 1 / (lambda_k + sigma^2)
  };

  DiscriminantCache(const std::vector<ClassModel>& models, double noise_var);

  /// y^T (Sigma + sigma^2 I)^{-1} y for class c.
  double quadratic_form(std::size_t c, const Vector& y) const;
  /// log p_c - 1/2 log|.| - 1/2 quadratic form.
  double discriminant(std::size_t c, const Vector& y) const;
  /// Argmax; lowest index wins ties.
  int classify(const Vector& y) const;

  std::size_t num_classes() const { return entries_.size(); }

 private:
  std::vector<Entry> entries_;
  double noise_var_;
  Index n_;
};

double discriminant(const Vector& y, const ClassModel& model, double noise_var);
int classify(const Vector& y, const std::vector<ClassModel>& models, double noise_var);

struct ErrorEstimate {
  std::uint64_t trials = 0;
  double overall_error = 0.0;
  std::vector<double> per_class_error;
  std::vector<std::vector<std::uint64_t>> confusion;  // [true][decided]
  double std_error = 0.0;

  std::string to_json() const;
  /// "overall\tstd_error"
  std::string to_tsv_row() const;
};

/// Samples from the true models and classifies with the mismatched ones
/// (or the true ones when matched = true). Trial t draws from Rng(seed, t),
/// so the result does not depend on the thread count.
ErrorEstimate monte_carlo_error(const ProblemInstance& instance, double noise_var,
                                std::uint64_t trials, std::uint64_t seed,
                                unsigned threads = 1, bool matched = false);

}  // namespace mismatch
