#include "mismatch/bounds.hpp"

#include "mismatch/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mismatch {

bool PairGeometry::nec_holds(const Tolerances& tol) const {
  return parts.w.is_trivial() || split.own_ji.is_trivial() || nec_residual <= tol.containment;
}

bool PairGeometry::suff_holds(const Tolerances& tol) const {
  return s_v == 0 || (c0 && *c0 > tol.suff_margin);
}

double alpha_max(const PairGeometry& geom, double lambda1_true, double lambda_min_mis) {
  if (!(lambda_min_mis > 0.0)) {
    throw Error(ErrorCode::DegenerateMismatchedRank,
                "mismatched class " + std::to_string(geom.i) + " has rank 0");
  }
  const double first = lambda_min_mis / (lambda1_true + 1.0);
  double second = 0.0;
  if (geom.s_v > 0) {
    if (!geom.c0) throw Error(ErrorCode::InvalidArgument, "c0 missing for s_v > 0");
    const double c0 = *geom.c0;
    second = c0 / (1.0 + c0 * (1.0 + 1.0 / lambda_min_mis));
  } else {
    second = lambda_min_mis / (lambda_min_mis + 1.0);
  }
  return std::min({first, second, 1.0});
}

std::optional<double> admissible_alpha0(const PairGeometry& geom, const ProblemInstance& instance,
                                        const Tolerances& tol) {
  const ClassModel& mis = instance.mismatched_models[geom.i];
  if (mis.rank() == 0) return std::nullopt;
  if (!geom.nec_holds(tol) || !geom.suff_holds(tol)) return std::nullopt;
  const ClassModel& tru = instance.true_models[geom.i];
  const double lambda1 = tru.rank() > 0 ? tru.eigenvalues[0] : 0.0;
  return alpha_max(geom, lambda1, mis.eigenvalues[mis.rank() - 1]);
}

PairGeometry pair_geometry(const ProblemInstance& instance, std::size_t i, std::size_t j,
                           const AnalysisOptions& opts) {
  if (i == j) throw Error(ErrorCode::InvalidArgument, "pair needs two distinct classes");
  if (i >= instance.num_classes() || j >= instance.num_classes()) {
    throw Error(ErrorCode::InvalidArgument, "class index out of range");
  }
  const Tolerances& tol = opts.tol;
  const ClassModel& ti = instance.true_models[i];
  const ClassModel& mi = instance.mismatched_models[i];
  const ClassModel& mj = instance.mismatched_models[j];

  PairGeometry g;
  g.i = i;
  g.j = j;
  g.split = pair_decomposition(mi.basis, mj.basis, tol.intersection);
  g.parts = mismatch_geometry(ti.basis, g.split.own_ij, tol.intersection);
  g.r_shared = g.split.shared.dim();
  g.r_own_ij = g.split.own_ij.dim();
  g.r_own_ji = g.split.own_ji.dim();
  g.s_w = g.parts.w.dim();
  g.s_v = g.parts.v.dim();

  if (!g.parts.w.is_trivial() && !g.split.own_ji.is_trivial()) {
    g.nec_residual = spectral_norm(g.split.own_ji.basis().transpose() * g.parts.w.basis());
  }
  if (g.s_v > 0) {
    const Matrix& v = g.parts.v.basis();
    const Matrix a = g.split.own_ij.basis().transpose() * v;
    const Matrix b = g.split.own_ji.basis().transpose() * v;
    g.c0 = min_eig_sym(a.transpose() * a - b.transpose() * b);
  }

  g.alpha0 = admissible_alpha0(g, instance, tol);
  const AlphaPolicy& policy = opts.alpha;
  if (policy.fixed) {
    g.alpha = *policy.fixed;
  } else if (g.alpha0) {
    double cap = *g.alpha0;
    const Index gap = mj.rank() - mi.rank();
    if (gap != 0) cap = std::min(cap, 1.0 / (2.0 * static_cast<double>(std::abs(gap))));
    g.alpha = policy.scale * cap;
  } else {
    g.alpha = policy.fallback;
    g.alpha_fallback = true;
  }
  return g;
}

std::vector<PairGeometry> all_pair_geometry(const ProblemInstance& instance,
                                            const AnalysisOptions& opts) {
  instance.validate();
  std::vector<PairGeometry> out;
  const std::size_t c = instance.num_classes();
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      if (i != j) out.push_back(pair_geometry(instance, i, j, opts));
    }
  }
  return out;
}

Matrix shifted_inverse(const ClassModel& model, double noise_var) {
  if (!(noise_var > 0.0)) throw Error(ErrorCode::NonpositiveNoise, "noise variance must be positive");
  const Matrix& u = model.basis.basis();
  const Index n = model.ambient_dim();
  const Vector inner = (model.eigenvalues.array() + noise_var).inverse().matrix();
  Matrix out = u * inner.asDiagonal() * u.transpose();
  out += (Matrix::Identity(n, n) - u * u.transpose()) / noise_var;
  return 0.5 * (out + out.transpose());
}

double shifted_logdet(const ClassModel& model, double noise_var) {
  if (!(noise_var > 0.0)) throw Error(ErrorCode::NonpositiveNoise, "noise variance must be positive");
  return (model.eigenvalues.array() + noise_var).log().sum() +
         static_cast<double>(model.ambient_dim() - model.rank()) * std::log(noise_var);
}

Matrix sigma_ij(const ProblemInstance& instance, std::size_t i, std::size_t j, double alpha,
                double noise_var) {
  if (i == j) throw Error(ErrorCode::InvalidArgument, "pair needs two distinct classes");
  Matrix s = shifted_inverse(instance.true_models[i], noise_var);
  if (alpha != 0.0) {
    s += alpha * (shifted_inverse(instance.mismatched_models[j], noise_var) -
                  shifted_inverse(instance.mismatched_models[i], noise_var));
  }
  return 0.5 * (s + s.transpose());
}

namespace {

Matrix weighted_projector(const ClassModel& m, const Vector& weights) {
  const Matrix& u = m.basis.basis();
  return u * weights.asDiagonal() * u.transpose();
}

Matrix complement_projector(const ClassModel& m) {
  const Matrix c = orthonormal_complement(m.basis.basis());
  return c * c.transpose();
}

}  // namespace

LKSplit split_LK(const ProblemInstance& instance, std::size_t i, std::size_t j, double alpha,
                 double noise_var) {
  const ClassModel& ti = instance.true_models[i];
  const ClassModel& mi = instance.mismatched_models[i];
  const ClassModel& mj = instance.mismatched_models[j];
  auto l_of = [&](const ClassModel& m) {
    return weighted_projector(m, (m.eigenvalues.array() + noise_var).inverse().matrix());
  };
  LKSplit out;
  out.L = l_of(ti) + alpha * (l_of(mj) - l_of(mi));
  out.K = complement_projector(ti) + alpha * (complement_projector(mj) - complement_projector(mi));
  out.L = 0.5 * (out.L + out.L.transpose());
  out.K = 0.5 * (out.K + out.K.transpose());
  return out;
}

Matrix L0_ij(const ProblemInstance& instance, std::size_t i, std::size_t j, double alpha) {
  auto l0 = [](const ClassModel& m) { return weighted_projector(m, m.eigenvalues.cwiseInverse()); };
  Matrix out = l0(instance.true_models[i]) +
               alpha * (l0(instance.mismatched_models[j]) - l0(instance.mismatched_models[i]));
  return 0.5 * (out + out.transpose());
}

double theorem1_pair_log_bound(const ProblemInstance& instance, std::size_t i, std::size_t j,
                               double alpha, double noise_var, double pd_rel) {
  const Matrix s = sigma_ij(instance, i, j, alpha, noise_var);
  const Vector ev = sym_eig(s).eigenvalues;
  const double floor = pd_rel * std::max(1.0, ev[0]);
  if (!(ev[ev.size() - 1] > floor)) {
    throw Error(ErrorCode::SigmaNotPD, "Sigma_" + std::to_string(i) + std::to_string(j) +
                                           " has eigenvalue " + format_double(ev[ev.size() - 1]));
  }
  const ClassModel& mi = instance.mismatched_models[i];
  const ClassModel& mj = instance.mismatched_models[j];
  const double log_sigma = ev.array().log().sum();
  return alpha * (std::log(mj.prior) - std::log(mi.prior)) +
         0.5 * alpha * (shifted_logdet(mi, noise_var) - shifted_logdet(mj, noise_var)) -
         0.5 * shifted_logdet(instance.true_models[i], noise_var) - 0.5 * log_sigma;
}

BoundCurvePoint theorem1_bound(const ProblemInstance& instance, double noise_var,
                               const std::vector<PairGeometry>& geometry, const Tolerances& tol) {
  if (!(noise_var > 0.0)) throw Error(ErrorCode::NonpositiveNoise, "noise variance must be positive");
  BoundCurvePoint pt;
  pt.noise_var = noise_var;
  std::vector<double> weighted;
  for (const PairGeometry& g : geometry) {
    PairTerm term;
    term.i = g.i;
    term.j = g.j;
    try {
      term.log_term = theorem1_pair_log_bound(instance, g.i, g.j, g.alpha, noise_var, tol.pd_rel);
      term.pd = true;
      weighted.push_back(std::log(instance.true_models[g.i].prior) + term.log_term);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::SigmaNotPD) throw;
      pt.trivial = true;
    }
    pt.pairs.push_back(term);
  }
  if (pt.trivial || weighted.empty()) {
    pt.bound = 1.0;
    pt.log10_bound = 0.0;
    return pt;
  }
  const double top = *std::max_element(weighted.begin(), weighted.end());
  double acc = 0.0;
  for (double w : weighted) acc += std::exp(w - top);
  const double log_total = top + std::log(acc);
  if (log_total >= 0.0) {
    pt.bound = 1.0;
    pt.log10_bound = 0.0;
  } else {
    pt.bound = std::exp(log_total);
    pt.log10_bound = log_total / std::log(10.0);
  }
  return pt;
}

BoundCurvePoint theorem1_bound(const ProblemInstance& instance, double noise_var,
                               const AnalysisOptions& opts) {
  return theorem1_bound(instance, noise_var, all_pair_geometry(instance, opts), opts.tol);
}

}  // namespace mismatch
