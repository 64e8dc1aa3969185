#include "mismatch/expansion.hpp"

#include "mismatch/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

namespace mismatch {

namespace {

// d_min(U_i, U~_i) with the convention that a direction of U_i orthogonal to
// all of U~_i (forced when r_i > r~_i) gives distance 1.
double self_distance(const Subspace& u, const Subspace& u_mis) {
  if (u_mis.is_trivial() || u.dim() > u_mis.dim()) return 1.0;
  return d_min(u, u_mis);
}

double cross_distance(const Subspace& u, const Subspace& u_other) {
  if (u_other.is_trivial()) return 1.0;
  return d_max(u, u_other);
}

}  // namespace

ConditionReport check_conditions(const ProblemInstance& instance, const PairGeometry& geom,
                                 const Tolerances& tol) {
  ConditionReport r;
  r.i = geom.i;
  r.j = geom.j;
  r.nec_residual = geom.nec_residual;
  r.nec_holds = geom.nec_holds(tol);
  r.suff_margin = geom.c0;
  r.suff_holds = geom.suff_holds(tol);
  const Subspace& ui = instance.true_models[geom.i].basis;
  if (!ui.is_trivial()) {
    r.corollary2_margin =
        cross_distance(ui, instance.mismatched_models[geom.j].basis) -
        self_distance(ui, instance.mismatched_models[geom.i].basis);
    r.corollary2_holds = r.corollary2_margin > tol.corollary_margin && geom.s_v > 0;
  }
  return r;
}

double d_exponent(const PairGeometry& geom, Index r_mis_i, Index r_mis_j) {
  return 0.5 * (static_cast<double>(geom.s_v) +
                geom.alpha * static_cast<double>(r_mis_j - r_mis_i));
}

KijAnalysis analyze_Kij(const ProblemInstance& instance, const PairGeometry& geom,
                        const Tolerances& tol) {
  KijAnalysis out;
  out.K = split_LK(instance, geom.i, geom.j, geom.alpha, 1.0).K;
  out.L0 = L0_ij(instance, geom.i, geom.j, geom.alpha);
  const SpectralDecomposition eig = sym_eig(out.K);
  const Index n = out.K.rows();
  const double top = n > 0 ? eig.eigenvalues[0] : 0.0;
  if (n > 0 && eig.eigenvalues[n - 1] < -1e-10 * std::max(top, 1e-300)) {
    throw Error(ErrorCode::KernelDetNonpositive,
                "K_ij has eigenvalue " + format_double(eig.eigenvalues[n - 1]));
  }
  out.rank = rank_with_tol(eig.eigenvalues.cwiseMax(0.0), tol.rank_rel);
  out.log_pdet = eig.eigenvalues.head(out.rank).array().log().sum();
  out.kernel = eig.eigenvectors.rightCols(n - out.rank);
  if (out.rank < n) {
    const Matrix compressed = out.kernel.transpose() * out.L0 * out.kernel;
    const Vector ev = sym_eig(compressed).eigenvalues;
    if (!(ev[ev.size() - 1] > 0.0)) {
      throw Error(ErrorCode::KernelDetNonpositive,
                  "L0 on ker(K_ij) has eigenvalue " + format_double(ev[ev.size() - 1]));
    }
    out.log_kernel_det = ev.array().log().sum();
  }
  out.log_v = out.log_pdet + out.log_kernel_det;
  return out;
}

double log_expansion_constant(const ProblemInstance& instance, const PairGeometry& geom,
                              const Tolerances& tol) {
  if (!geom.nec_holds(tol) || !geom.suff_holds(tol)) {
    throw Error(ErrorCode::ConditionsFail, "pair (" + std::to_string(geom.i) + "," +
                                               std::to_string(geom.j) +
                                               ") fails the subspace conditions");
  }
  const ClassModel& ti = instance.true_models[geom.i];
  const ClassModel& mi = instance.mismatched_models[geom.i];
  const ClassModel& mj = instance.mismatched_models[geom.j];
  auto log_pdet_of = [](const ClassModel& m) { return m.eigenvalues.array().log().sum(); };
  const KijAnalysis k = analyze_Kij(instance, geom, tol);
  const double a = geom.alpha;
  return a * (std::log(mj.prior) - std::log(mi.prior)) +
         0.5 * a * (log_pdet_of(mi) - log_pdet_of(mj)) - 0.5 * (log_pdet_of(ti) + k.log_v);
}

double expansion_constant(const ProblemInstance& instance, const PairGeometry& geom,
                          const Tolerances& tol) {
  return std::exp(log_expansion_constant(instance, geom, tol));
}

std::string_view to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::NoFloor: return "NoFloor";
    case Verdict::FloorConditionsFail: return "FloorConditionsFail";
    case Verdict::FloorNonpositiveD: return "FloorNonpositiveD";
  }
  return "Unknown";
}

ExpansionReport expand(const ProblemInstance& instance, const AnalysisOptions& opts) {
  const std::vector<PairGeometry> geometry = all_pair_geometry(instance, opts);
  ExpansionReport rep;
  bool conditions_ok = true;
  rep.d = std::numeric_limits<double>::infinity();
  for (const PairGeometry& g : geometry) {
    PairReport p;
    p.conditions = check_conditions(instance, g, opts.tol);
    p.r_shared = g.r_shared;
    p.r_own_ij = g.r_own_ij;
    p.r_own_ji = g.r_own_ji;
    p.s_w = g.s_w;
    p.s_v = g.s_v;
    p.alpha0 = g.alpha0;
    p.alpha = g.alpha;
    p.alpha_fallback = g.alpha_fallback;
    p.d_ij = d_exponent(g, instance.mismatched_models[g.i].rank(),
                        instance.mismatched_models[g.j].rank());
    rep.d = std::min(rep.d, p.d_ij);
    if (!p.conditions.nec_holds) {
      conditions_ok = false;
      rep.failing_pairs.push_back(
          {g.i, g.j, "W_ij is not orthogonal to U~'_ji (residual " +
                         format_double(g.nec_residual) + ")"});
    }
    if (!p.conditions.suff_holds) {
      conditions_ok = false;
      rep.failing_pairs.push_back(
          {g.i, g.j, "V_ij^T (P~'_ij - P~'_ji) V_ij is not positive definite (min eigenvalue " +
                         format_double(g.c0.value_or(0.0)) + ")"});
    }
    rep.pairs.push_back(std::move(p));
  }

  if (!conditions_ok) {
    rep.verdict = Verdict::FloorConditionsFail;
    return rep;
  }
  if (!(rep.d > 0.0)) {
    rep.verdict = Verdict::FloorNonpositiveD;
    for (const PairReport& p : rep.pairs) {
      if (p.d_ij <= 0.0) {
        rep.failing_pairs.push_back({p.conditions.i, p.conditions.j,
                                     "d_ij = " + format_double(p.d_ij) +
                                         " (s^V = 0 with r~_j <= r~_i)"});
      }
    }
    return rep;
  }
  rep.verdict = Verdict::NoFloor;

  std::vector<double> weighted;
  for (std::size_t k = 0; k < rep.pairs.size(); ++k) {
    PairReport& p = rep.pairs[k];
    try {
      p.log_A_ij = log_expansion_constant(instance, geometry[k], opts.tol);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::KernelDetNonpositive) throw;
      rep.failing_pairs.push_back({p.conditions.i, p.conditions.j, e.what()});
    }
    if (std::abs(p.d_ij - rep.d) <= 1e-9) {
      rep.argmin_pairs.emplace_back(p.conditions.i, p.conditions.j);
      if (p.log_A_ij) {
        weighted.push_back(std::log(instance.true_models[p.conditions.i].prior) + *p.log_A_ij);
      } else {
        weighted.clear();
        break;
      }
    }
  }
  if (!weighted.empty() && weighted.size() == rep.argmin_pairs.size()) {
    const double top = *std::max_element(weighted.begin(), weighted.end());
    double acc = 0.0;
    for (double w : weighted) acc += std::exp(w - top);
    rep.log_A = top + std::log(acc);
    rep.A = std::exp(*rep.log_A);
  }
  return rep;
}

namespace {

nlohmann::ordered_json optional_number(const std::optional<double>& v) {
  if (!v) return nullptr;
  return *v;
}

}  // namespace

std::string ExpansionReport::to_json() const {
  using nlohmann::ordered_json;
  ordered_json doc;
  doc["verdict"] = std::string(to_string(verdict));
  doc["d"] = d;
  doc["A"] = optional_number(A);
  doc["log_A"] = optional_number(log_A);
  ordered_json sd = ordered_json::array();
  for (const auto& [i, j] : argmin_pairs) sd.push_back({i, j});
  doc["argmin_pairs"] = sd;
  ordered_json table = ordered_json::array();
  for (const PairReport& p : pairs) {
    ordered_json row;
    row["i"] = p.conditions.i;
    row["j"] = p.conditions.j;
    row["d_ij"] = p.d_ij;
    row["nec_holds"] = p.conditions.nec_holds;
    row["suff_holds"] = p.conditions.suff_holds;
    row["corollary2_holds"] = p.conditions.corollary2_holds;
    row["c0"] = optional_number(p.conditions.suff_margin);
    row["alpha0"] = optional_number(p.alpha0);
    row["alpha"] = p.alpha;
    row["alpha_fallback"] = p.alpha_fallback;
    row["nec_residual"] = p.conditions.nec_residual;
    row["corollary2_margin"] = p.conditions.corollary2_margin;
    row["dims"] = {{"r_shared", p.r_shared}, {"r_own_ij", p.r_own_ij}, {"r_own_ji", p.r_own_ji},
                   {"s_w", p.s_w},           {"s_v", p.s_v}};
    row["log_A_ij"] = optional_number(p.log_A_ij);
    table.push_back(std::move(row));
  }
  doc["pairs"] = table;
  ordered_json failing = ordered_json::array();
  for (const FailingPair& f : failing_pairs) {
    failing.push_back({{"i", f.i}, {"j", f.j}, {"reason", f.reason}});
  }
  doc["failing_pairs"] = failing;
  return doc.dump(2);
}

bool check_corollary1(const ProblemInstance& instance, const AnalysisOptions& opts) {
  for (const PairGeometry& g : all_pair_geometry(instance, opts)) {
    if (!g.nec_holds(opts.tol) || !g.suff_holds(opts.tol)) return false;
    const Index gap = instance.mismatched_models[g.j].rank() - instance.mismatched_models[g.i].rank();
    if (gap <= 0 && g.s_v == 0) return false;
  }
  return true;
}

bool check_corollary2(const ProblemInstance& instance, const AnalysisOptions& opts) {
  for (const PairGeometry& g : all_pair_geometry(instance, opts)) {
    if (!check_conditions(instance, g, opts.tol).corollary2_holds) return false;
  }
  return true;
}

namespace {

bool is_diagonal(const Matrix& m) {
  const double scale = std::max(1.0, m.diagonal().cwiseAbs().maxCoeff());
  Matrix off = m;
  off.diagonal().setZero();
  return off.cwiseAbs().maxCoeff() <= 1e-10 * scale;
}

}  // namespace

bool check_corollary3(const ProblemInstance& instance, const AnalysisOptions& opts) {
  for (std::size_t c = 0; c < instance.num_classes(); ++c) {
    if (!is_diagonal(instance.true_models[c].covariance) ||
        !is_diagonal(instance.mismatched_models[c].covariance)) {
      throw Error(ErrorCode::DiagonalityViolated,
                  "covariances of class " + std::to_string(c) + " are not diagonal");
    }
  }
  for (const PairGeometry& g : all_pair_geometry(instance, opts)) {
    if (!g.nec_holds(opts.tol)) return false;
    const Index gap = instance.mismatched_models[g.j].rank() - instance.mismatched_models[g.i].rank();
    if (gap <= 0 && g.s_v == 0) return false;
  }
  return true;
}

RotationCheck rotation_mismatch_check(const Subspace& u1, const Subspace& u2, const Matrix& q1,
                                      const Matrix& q2, bool strict) {
  const Index n = u1.ambient_dim();
  if (u2.ambient_dim() != n) throw Error(ErrorCode::AmbientMismatch, "bases differ in ambient dimension");
  for (const Matrix* q : {&q1, &q2}) {
    if (q->rows() != n || q->cols() != n || orthonormality_error(*q) > 1e-8) {
      throw Error(ErrorCode::NotOrthogonal, "rotation is not an orthogonal N x N matrix");
    }
  }
  const Matrix id = Matrix::Identity(n, n);
  ProblemInstance inst;
  inst.ambient_dim = n;
  for (const auto& [u, q] : {std::pair{&u1, &q1}, std::pair{&u2, &q2}}) {
    const Vector ones = Vector::Ones(u->dim());
    inst.true_models.push_back(from_factors(0.5, u->basis(), ones));
    inst.mismatched_models.push_back(
        from_factors(0.5, orthonormalize(*q * u->basis()), ones));
  }
  RotationCheck out;
  out.delta = principal_angles(u1, u2).cosines[0];
  out.eps1 = spectral_norm(id - q1);
  out.eps2 = spectral_norm(id - q2);
  const double rhs = (strict ? static_cast<double>(n) : 1.0) * (out.eps1 + out.eps2);
  out.decision = 1.0 - out.delta > rhs;
  // A false premise decides nothing about the overlap; only a true one needs s^V > 0.
  if (out.decision) {
    const PairGeometry g12 = pair_geometry(inst, 0, 1);
    const PairGeometry g21 = pair_geometry(inst, 1, 0);
    if (g12.s_v == 0 || g21.s_v == 0) {
      throw Error(ErrorCode::DegenerateOverlap, "rotated bases leave s^V_12 or s^V_21 at zero");
    }
  }
  return out;
}

}  // namespace mismatch
