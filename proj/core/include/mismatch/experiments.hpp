#pragma once

#include "mismatch/bounds.hpp"
#include "mismatch/classifier.hpp"
#include "mismatch/expansion.hpp"

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mismatch {

struct NamedInstance {
  std::string name;
  ProblemInstance instance;
  std::optional<Verdict> expected_verdict;
  std::optional<double> expected_d;
};

/// Built-in instances: example1, example1-mod, example2, example2-mod,
/// tableIII-a..d, rob1..rob3. Unit eigenvalues, uniform priors.
const std::vector<NamedInstance>& catalog();
const NamedInstance& catalog_entry(const std::string& name);

inline double db_to_noise_var(double db) { return std::pow(10.0, -db / 10.0); }

struct SweepRow {
  double inv_sigma2_db = 0.0;
  double noise_var = 0.0;
  BoundCurvePoint bound;
  std::optional<ErrorEstimate> mc;
};

struct SweepTable {
  std::vector<SweepRow> rows;

  /// Monte Carlo columns are written only when every row has an estimate.
  void write_tsv(std::ostream& out) const;
  std::string to_tsv() const;
};

struct SweepOptions {
  std::uint64_t trials = 0;  // 0 = bound only
  std::uint64_t seed = 0;
  unsigned threads = 1;
  AnalysisOptions analysis;
};

/// One row per grid point (dB of 1/sigma^2). Row k uses seed mix_key(seed, k).
SweepTable sweep_noise(const ProblemInstance& instance, const std::vector<double>& db_grid,
                       const SweepOptions& opts);

/// Least-squares slope of log10(bound) against log10(sigma^2) over rows with
/// sigma^2 in [lo, hi] and bound < 1.
double fit_decay_exponent(const SweepTable& table, double noise_lo, double noise_hi);

struct PhaseConfig {
  Index rank = 1;      // true-model rank
  Index mis_rank = 1;  // mismatched-model rank
  std::vector<std::vector<Index>> n_grid;  // per cell: training count per class
  std::size_t runs = 100;
  double p_p = 0.9;
  double sigma2_eval = 0.0;  // required, > 0
  Index test_per_class = 50;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  AnalysisOptions analysis;
};

struct PhaseCell {
  std::vector<Index> counts;
  std::size_t runs = 0;
  double cond_pass_fraction = 0.0;
  double quantile_error = 0.0;
  double mean_error = 0.0;
};

/// Per run: shuffle each class, hold out test_per_class rows, estimate the
/// true model from the rest and the mismatched model from the first n_i rows.
std::vector<PhaseCell> phase_transition(const LabeledData& data, const PhaseConfig& config);

void write_phase_tsv(std::ostream& out, const std::vector<PhaseCell>& cells);

/// ceil(p * n)-th smallest value (1-based), at least the first.
double order_statistic_quantile(std::vector<double> values, double p);

struct SynthConfig {
  Index ambient_dim = 30;
  int classes = 3;
  Index rank = 4;
  Index per_class = 300;
  std::vector<double> spectrum = {1.0, 0.6, 0.35, 0.2};  // length = rank
  double noise_var = 0.02;
  std::uint64_t seed = 1;
};

/// Classes on mutually orthogonal random subspaces plus isotropic noise.
LabeledData make_synthetic(const SynthConfig& config);

}  // namespace mismatch
