#pragma once

#include "mismatch/bounds.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mismatch {

struct ConditionReport {
  std::size_t i = 0;
  std::size_t j = 0;
  bool nec_holds = false;
  bool suff_holds = false;
  bool corollary2_holds = false;
  double nec_residual = 0.0;
  std::optional<double> suff_margin;  // c0
  double corollary2_margin = 0.0;     // d_max(U_i, U~_j) - d_min(U_i, U~_i)
};

ConditionReport check_conditions(const ProblemInstance& instance, const PairGeometry& geom,
                                 const Tolerances& tol = {});

double d_exponent(const PairGeometry& geom, Index r_mis_i, Index r_mis_j);

struct KijAnalysis {
  Matrix K;
  Matrix L0;
  Index rank = 0;
  Matrix kernel;              // orthonormal basis of ker(K)
  double log_pdet = 0.0;
  double log_kernel_det = 0.0;  // log|kernel^T L0 kernel|, 0 when K is full rank
  double log_v = 0.0;           // log v_ij
};

/// K_ij = K_i + alpha (K~_j - K~_i) and the kernel-compressed L0_ij.
KijAnalysis analyze_Kij(const ProblemInstance& instance, const PairGeometry& geom,
                        const Tolerances& tol = {});

/// log A_ij. Requires the pair conditions to hold.
double log_expansion_constant(const ProblemInstance& instance, const PairGeometry& geom,
                              const Tolerances& tol = {});
double expansion_constant(const ProblemInstance& instance, const PairGeometry& geom,
                          const Tolerances& tol = {});

enum class Verdict { NoFloor, FloorConditionsFail, FloorNonpositiveD };

std::string_view to_string(Verdict v) noexcept;

struct PairReport {
  ConditionReport conditions;
  Index r_shared = 0, r_own_ij = 0, r_own_ji = 0, s_w = 0, s_v = 0;
  double d_ij = 0.0;
  std::optional<double> alpha0;
  double alpha = 0.0;
  bool alpha_fallback = false;
  std::optional<double> log_A_ij;
};

struct FailingPair {
  std::size_t i = 0;
  std::size_t j = 0;
  std::string reason;
};

struct ExpansionReport {
  Verdict verdict = Verdict::FloorConditionsFail;
  double d = 0.0;
  std::vector<PairReport> pairs;
  std::vector<std::pair<std::size_t, std::size_t>> argmin_pairs;  // S_d
  std::optional<double> A;      // NoFloor only: sum over S_d of p_i A_ij
  std::optional<double> log_A;
  std::vector<FailingPair> failing_pairs;

  std::string to_json() const;
};

ExpansionReport expand(const ProblemInstance& instance, const AnalysisOptions& opts = {});

bool check_corollary1(const ProblemInstance& instance, const AnalysisOptions& opts = {});
bool check_corollary2(const ProblemInstance& instance, const AnalysisOptions& opts = {});
/// Throws DiagonalityViolated unless every covariance is diagonal.
bool check_corollary3(const ProblemInstance& instance, const AnalysisOptions& opts = {});

struct RotationCheck {
  bool decision = false;
  double delta = 0.0;  // largest cosine between U1 and U2
  double eps1 = 0.0;
  double eps2 = 0.0;
};

/// Mismatched bases Q_k U_k. strict multiplies the right side by N.
RotationCheck rotation_mismatch_check(const Subspace& u1, const Subspace& u2, const Matrix& q1,
                                      const Matrix& q2, bool strict);

}  // namespace mismatch
