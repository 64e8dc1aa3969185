#pragma once

#include "mismatch/model.hpp"
#include "mismatch/subspace.hpp"
#include "mismatch/tolerances.hpp"

#include <optional>
#include <vector>

namespace mismatch {

struct PairGeometry {
  std::size_t i = 0;
  std::size_t j = 0;
  PairSplit split;      // U~∩_ij, U~'_ij, U~'_ji
  MismatchSplit parts;  // W_ij, V_ij

  Index r_shared = 0;
  Index r_own_ij = 0;
  Index r_own_ji = 0;
  Index s_w = 0;
  Index s_v = 0;

  double nec_residual = 0.0;  // ||U~'_ji^T W_ij||_2
  std::optional<double> c0;   // smallest eigenvalue of V^T (P~'_ij - P~'_ji) V, s_v > 0 only
  std::optional<double> alpha0;
  double alpha = 0.0;
  bool alpha_fallback = false;

  bool nec_holds(const Tolerances& tol) const;
  bool suff_holds(const Tolerances& tol) const;
};

/// Upper end of the admissible alpha interval. Uses the c0 form when s_v > 0,
/// the c0-free form otherwise.
double alpha_max(const PairGeometry& geom, double lambda1_true, double lambda_min_mis);

/// Admissible upper end for a pair; nullopt when the conditions fail or the
/// mismatched class i is degenerate.
std::optional<double> admissible_alpha0(const PairGeometry& geom, const ProblemInstance& instance,
                                        const Tolerances& tol);

PairGeometry pair_geometry(const ProblemInstance& instance, std::size_t i, std::size_t j,
                           const AnalysisOptions& opts = {});

/// All ordered pairs (i, j), i != j, in row-major order.
std::vector<PairGeometry> all_pair_geometry(const ProblemInstance& instance,
                                            const AnalysisOptions& opts = {});

/// (Sigma + sigma^2 I)^{-1} from the eigen factors of a model.
Matrix shifted_inverse(const ClassModel& model, double noise_var);

/// log|Sigma + sigma^2 I| from the eigen factors.
double shifted_logdet(const ClassModel& model, double noise_var);

Matrix sigma_ij(const ProblemInstance& instance, std::size_t i, std::size_t j, double alpha,
                double noise_var);

struct LKSplit {
  Matrix L;  // sigma-dependent part
  Matrix K;  // complement projector part
};

/// Sigma_ij = L + K / sigma^2 with L, K built from projectors.
LKSplit split_LK(const ProblemInstance& instance, std::size_t i, std::size_t j, double alpha,
                 double noise_var);

/// The sigma -> 0 limit of L (Lambda^{-1} in place of (Lambda + sigma^2)^{-1}).
Matrix L0_ij(const ProblemInstance& instance, std::size_t i, std::size_t j, double alpha);

/// Natural log of the pairwise bound. Throws SigmaNotPD.
double theorem1_pair_log_bound(const ProblemInstance& instance, std::size_t i, std::size_t j,
                               double alpha, double noise_var, double pd_rel = 1e-12);

struct PairTerm {
  std::size_t i = 0;
  std::size_t j = 0;
  bool pd = false;
  double log_term = 0.0;  // natural log; 0 when not PD
};

struct BoundCurvePoint {
  double noise_var = 0.0;
  double log10_bound = 0.0;
  double bound = 1.0;
  bool trivial = false;  // some Sigma_ij was not PD
  std::vector<PairTerm> pairs;
};

BoundCurvePoint theorem1_bound(const ProblemInstance& instance, double noise_var,
                               const std::vector<PairGeometry>& geometry,
                               const Tolerances& tol = {});
BoundCurvePoint theorem1_bound(const ProblemInstance& instance, double noise_var,
                               const AnalysisOptions& opts = {});

}  // namespace mismatch
