#pragma once

#include <optional>

namespace mismatch {

struct Tolerances {
  double rank_rel = 1e-10;      // eigenvalue rank threshold, relative to the largest
  double intersection = 1e-9;   // singular-value band for intersections and kernels
  double pd_rel = 1e-12;        // is_pd threshold, relative to max(1, lambda_max)
  double containment = 1e-7;    // spectral-norm test for im(W) inside the complement
  double suff_margin = 1e-10;   // smallest eigenvalue needed for the V-block test
  double corollary_margin = 1e-10;
};

// alpha_ij = scale * alpha0, also capped at scale / (2 |r~_j - r~_i|) when the
// mismatched ranks differ. A fixed value overrides the rule.
struct AlphaPolicy {
  double scale = 0.5;
  std::optional<double> fixed;
  double fallback = 1e-3;  // used when alpha0 is undefined
};

struct AnalysisOptions {
  Tolerances tol;
  AlphaPolicy alpha;
};

}  // namespace mismatch
