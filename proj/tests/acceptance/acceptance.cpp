// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "cli.hpp"
#include "support.hpp"

#include <mismatch/bounds.hpp>
#include <mismatch/classifier.hpp>
#include <mismatch/expansion.hpp>
#include <mismatch/experiments.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace mismatch;
using namespace testing_support;

namespace {

// Pinned thresholds.
constexpr std::uint64_t kTrials = 100000;
constexpr double kLowError = 1e-3;
constexpr double kHighError = 1e-2;
constexpr double kSlopeTol = 0.05;
constexpr double kStdErrs = 3.0;
constexpr double kRatioLo = 0.95, kRatioHi = 1.05;
constexpr double kDetRel = 0.01;
constexpr double kGramTol = 1e-8;
constexpr int kRandomInstances = 1000;
constexpr std::size_t kPhaseRuns = 100;
constexpr double kPhaseQuantileMax = 0.05;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& why) {
    if (!ok) {
      pass = false;
      detail << " | FAILED: " << why;
    }
  }
};

struct CliResult {
  int code;
  std::string out;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "mismatch");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code == 1) std::cerr << err.str();
  return {code, out.str()};
}

// mc_error column of the first data row of a simulate TSV.
double first_mc_error(const std::string& tsv) {
  std::istringstream in(tsv);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  std::istringstream fields(row);
  std::string db, mc;
  std::getline(fields, db, '\t');
  std::getline(fields, mc, '\t');
  return std::stod(mc);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string g(double v) {
  std::ostringstream s;
  s << std::setprecision(4) << v;
  return s.str();
}

bool is_no_floor(const NamedInstance& e) { return e.expected_verdict == Verdict::NoFloor; }

// 1: floor verdicts from `check`, simulated error at 80 dB.
void ac1(Outcome& o) {
  const std::pair<const char*, bool> cases[] = {
      {"tableIII-a", true}, {"tableIII-b", false}, {"tableIII-c", true}, {"tableIII-d", false}};
  for (const auto& [name, floor] : cases) {
    const auto t0 = std::chrono::steady_clock::now();
    const int code = cli({"check", "--catalog", name}).code;
    o.require(code == (floor ? 2 : 0), std::string(name) + " check exit " + std::to_string(code));
    const CliResult sim = cli({"simulate", "--catalog", name, "--db", "80", "--trials",
                               std::to_string(kTrials), "--seed", "1"});
    o.require(sim.code == 0, std::string(name) + " simulate failed");
    const double err = sim.code == 0 ? first_mc_error(sim.out) : 1.0;
    o.require(floor ? err > kHighError : err < kLowError, std::string(name) + " error " + g(err));
    const double secs = seconds_since(t0);
    o.require(secs <= 60.0, std::string(name) + " took " + g(secs) + " s");
    o.detail << " " << name << ": exit " << code << ", err " << g(err) << ";";
  }
}

// 2: exact d and the fitted slope of the bound for rob1..rob3.
void ac2(Outcome& o) {
  const std::pair<const char*, double> cases[] = {{"rob1", 0.5}, {"rob2", 1.0}, {"rob3", 1.5}};
  std::vector<double> grid;
  for (int db = 60; db <= 90; db += 5) grid.push_back(db);
  for (const auto& [name, d] : cases) {
    const ProblemInstance& inst = catalog_entry(name).instance;
    const ExpansionReport r = expand(inst);
    o.require(r.verdict == Verdict::NoFloor && r.d == d, std::string(name) + " d = " + g(r.d));
    const double slope = fit_decay_exponent(sweep_noise(inst, grid, {}), 1e-9, 1e-6);
    o.require(std::abs(slope - d) <= kSlopeTol, std::string(name) + " slope " + g(slope));
    o.detail << " " << name << ": d " << r.d << ", slope " << g(slope) << ";";
  }
}

// 3: simulated error never exceeds the bound by more than 3 standard errors.
void ac3(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> grid;
  for (int db = 0; db <= 90; db += 10) grid.push_back(db);
  SweepOptions opts;
  opts.trials = kTrials;
  opts.seed = 2024;
  opts.threads = std::max(1u, std::thread::hardware_concurrency());
  int points = 0, violations = 0;
  double worst = -1.0;  // max of (mc - bound) / se over points with se > 0
  for (const NamedInstance& e : catalog()) {
    const SweepTable t = sweep_noise(e.instance, grid, opts);
    for (const SweepRow& r : t.rows) {
      ++points;
      const double mc = r.mc->overall_error, se = r.mc->std_error, b = r.bound.bound;
      if (mc > b + kStdErrs * se) {
        ++violations;
        o.detail << " violation " << e.name << "@" << r.inv_sigma2_db << "dB;";
      }
      if (se > 0) worst = std::max(worst, (mc - b) / se);
    }
  }
  const double secs = seconds_since(t0);
  o.require(violations == 0, std::to_string(violations) + " violations");
  o.require(secs <= 600.0, "took " + g(secs) + " s");
  o.detail << " " << points << " points, 0..90 dB, " << kTrials << " trials each, "
           << "max (mc-bound)/se " << g(worst) << ", " << g(secs) << " s";
}

// 4: bound / (A sigma^{2d}) at sigma^2 = 1e-10.
void ac4(Outcome& o) {
  const double s2 = 1e-10;
  for (const NamedInstance& e : catalog()) {
    if (!is_no_floor(e)) continue;
    const ExpansionReport r = expand(e.instance);
    if (!r.log_A) {
      o.require(false, e.name + " has no constant");
      continue;
    }
    const BoundCurvePoint pt = theorem1_bound(e.instance, s2);
    const double log_ratio = std::log(pt.bound) - *r.log_A - r.d * std::log(s2);
    const double ratio = std::exp(log_ratio);
    o.require(ratio >= kRatioLo && ratio <= kRatioHi, e.name + " ratio " + g(ratio));
    o.detail << " " << e.name << " " << g(ratio) << ";";
  }
}

// 5: rank of K, the determinant expansion, and positive definiteness on the
// validity interval.
void ac5(Outcome& o) {
  int pairs = 0, pd_points = 0;
  double worst_det = 0.0;
  for (const NamedInstance& e : catalog()) {
    const ProblemInstance& inst = e.instance;
    for (const PairGeometry& pg : all_pair_geometry(inst)) {
      const ConditionReport c = check_conditions(inst, pg);
      if (!(c.nec_holds && c.suff_holds) || !pg.alpha0) continue;
      ++pairs;
      const KijAnalysis k = analyze_Kij(inst, pg);
      const Index expected = inst.ambient_dim + pg.s_v - inst.true_models[pg.i].rank();
      o.require(k.rank == expected, e.name + " rank(K) " + std::to_string(k.rank) + " vs " +
                                        std::to_string(expected));

      const double s2 = 1e-8;
      const double lhs = static_cast<double>(k.rank) * std::log(s2) +
                         logdet_pd(sigma_ij(inst, pg.i, pg.j, pg.alpha, s2));
      const double rel = std::abs(std::expm1(lhs - k.log_v));
      worst_det = std::max(worst_det, rel);
      o.require(rel <= kDetRel, e.name + " det expansion off by " + g(rel));

      const double lmin = inst.mismatched_models[pg.i].eigenvalues.minCoeff();
      const double hi = std::min(1.0, (1.0 - pg.alpha) / pg.alpha * lmin);
      for (int p = 0; p < 10; ++p) {
        // Log-spaced from just inside the upper end down nine decades.
        const double v = hi * std::pow(10.0, -static_cast<double>(p)) * (1.0 - 1e-6);
        ++pd_points;
        o.require(is_pd(sigma_ij(inst, pg.i, pg.j, pg.alpha, v)),
                  e.name + " not PD at " + g(v));
      }
    }
  }
  o.require(pairs > 0, "no pairs passed the conditions");
  o.detail << " " << pairs << " pairs, worst det rel err " << g(worst_det) << ", " << pd_points
           << " PD points";
}

// 6: geometry identities and corollary implications on random instances.
void ac6(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(20240601);
  int bookkeeping_bad = 0, gram_bad = 0, chain_bad = 0, diag_bad = 0;
  int cor2 = 0, cor1 = 0, diag = 0;
  double worst_gram = 0.0;
  for (int rep = 0; rep < kRandomInstances; ++rep) {
    const RandomInstance ri = random_instance(rng);
    const ProblemInstance& inst = ri.instance;
    for (const PairGeometry& pg : all_pair_geometry(inst)) {
      const Index rm_i = inst.mismatched_models[pg.i].rank();
      const Index rm_j = inst.mismatched_models[pg.j].rank();
      const Index r_i = inst.true_models[pg.i].rank();
      if (pg.r_shared + pg.r_own_ij != rm_i || pg.r_shared + pg.r_own_ji != rm_j ||
          pg.s_w + pg.s_v != r_i) {
        ++bookkeeping_bad;
      }
      const Subspace& y = inst.true_models[pg.i].basis;
      const Subspace& z = inst.mismatched_models[pg.j].basis;
      const PrincipalAngles pa = principal_angles(y, z);
      const Matrix gram = z.basis().transpose() * y.basis() * y.basis().transpose() * z.basis();
      Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
      const Vector oracle = es.eigenvalues().reverse().cwiseMax(0.0).cwiseSqrt();
      const double gap =
          (pa.cosines - oracle.head(pa.cosines.size())).cwiseAbs().maxCoeff();
      worst_gram = std::max(worst_gram, gap);
      if (gap > kGramTol) ++gram_bad;
    }
    const bool c1 = check_corollary1(inst);
    const bool c2 = check_corollary2(inst);
    cor1 += c1;
    cor2 += c2;
    if ((c2 && !c1) || (c1 && expand(inst).verdict != Verdict::NoFloor)) ++chain_bad;
    if (ri.diagonal) {
      ++diag;
      if (check_corollary3(inst) != c1) ++diag_bad;
    }
  }
  const double secs = seconds_since(t0);
  o.require(bookkeeping_bad == 0, std::to_string(bookkeeping_bad) + " bookkeeping mismatches");
  o.require(gram_bad == 0, std::to_string(gram_bad) + " Gram oracle mismatches");
  o.require(chain_bad == 0, std::to_string(chain_bad) + " implication counterexamples");
  o.require(diag_bad == 0, std::to_string(diag_bad) + " diagonal disagreements");
  o.require(cor2 > 0 && cor1 > cor2 / 2, "implication chain exercised too rarely");
  o.require(secs <= 60.0, "took " + g(secs) + " s");
  o.detail << " " << kRandomInstances << " instances: cor2 true " << cor2 << ", cor1 true " << cor1
           << ", diagonal " << diag << ", worst Gram gap " << g(worst_gram) << ", " << g(secs)
           << " s";
}

// 7: synthetic phase transition.
void ac7(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  SynthConfig sc;
  sc.seed = 7;
  const LabeledData data = make_synthetic(sc);
  PhaseConfig pc;
  pc.rank = 4;
  pc.mis_rank = 4;
  pc.n_grid = {{8, 8, 8}, {50, 50, 50}};
  pc.runs = kPhaseRuns;
  pc.p_p = 0.9;
  pc.sigma2_eval = 1e-4;
  pc.seed = 3;
  const auto cells = phase_transition(data, pc);
  const double secs = seconds_since(t0);
  o.require(cells[1].cond_pass_fraction > cells[0].cond_pass_fraction,
            "pass fraction did not increase");
  o.require(cells[1].quantile_error < kPhaseQuantileMax,
            "quantile error " + g(cells[1].quantile_error));
  o.require(secs <= 300.0, "took " + g(secs) + " s");
  o.detail << " pass fraction n=8 " << g(cells[0].cond_pass_fraction) << ", n=50 "
           << g(cells[1].cond_pass_fraction) << "; 0.9-quantile error n=50 "
           << g(cells[1].quantile_error) << ", " << g(secs) << " s";
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 8: byte-identical files across runs and thread counts.
void ac8(Outcome& o) {
  const auto dir = std::filesystem::temp_directory_path() / "mismatch_acceptance";
  std::filesystem::create_directories(dir);
  const auto data = dir / "synth.csv";
  cli({"gen-synth", "--per-class", "120", "--seed", "5", "-o", data.string()});
  const std::vector<std::pair<std::string, std::vector<std::string>>> jobs = {
      {"simulate", {"simulate", "--catalog", "tableIII-c", "--db-range", "0:40:10", "--trials",
                    "20000", "--seed", "99"}},
      {"bound", {"bound", "--catalog", "rob2", "--db-range", "0:90:10"}},
      {"phase", {"phase", "--data", data.string(), "--rank", "4", "--mis-rank", "4", "--n",
                 "6,12", "--runs", "8", "--sigma2-eval", "1e-3", "--seed", "11"}},
  };
  for (const auto& [name, args] : jobs) {
    std::vector<std::string> contents;
    for (const auto& [tag, threads] : {std::pair{"a", "1"}, std::pair{"b", "1"}, std::pair{"c", "4"}}) {
      const auto path = dir / (name + "_" + tag + ".tsv");
      auto full = args;
      full.insert(full.end(), {"--threads", threads, "-o", path.string()});
      o.require(cli(full).code == 0, name + " run failed");
      contents.push_back(slurp(path));
    }
    o.require(!contents[0].empty(), name + " produced no output");
    o.require(contents[0] == contents[1], name + " differs between runs");
    o.require(contents[0] == contents[2], name + " differs between 1 and 4 threads");
    o.detail << " " << name << " " << contents[0].size() << " bytes identical x3;";
  }
  std::filesystem::remove_all(dir);
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
      {"AC1 floor verdicts and 80 dB simulated error", ac1},
      {"AC2 decay exponents", ac2},
      {"AC3 simulated error below bound", ac3},
      {"AC4 expansion constant", ac4},
      {"AC5 kernel rank, determinant expansion, PD interval", ac5},
      {"AC6 random geometry and implication chain", ac6},
      {"AC7 synthetic phase transition", ac7},
      {"AC8 determinism", ac8},
  };
  int failures = 0;
  for (const auto& [label, check] : criteria) {
    Outcome o;
    try {
      check(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    failures += !o.pass;
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << label << ":" << o.detail.str() << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
