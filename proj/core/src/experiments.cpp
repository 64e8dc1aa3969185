#include "mismatch/experiments.hpp"

#include "mismatch/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

namespace mismatch {

namespace {

// Covariance with unit eigenvalues on the span of the given axes (0-based).
Matrix axes_cov(Index n, std::initializer_list<Index> axes) {
  Matrix m = Matrix::Zero(n, n);
  for (Index a : axes) m(a, a) = 1.0;
  return m;
}

Matrix line_cov(double angle) {
  Vector u(2);
  u << std::cos(angle), std::sin(angle);
  return u * u.transpose();
}

ProblemInstance two_class(Index n, const Matrix& s1, const Matrix& s2, const Matrix& m1,
                          const Matrix& m2) {
  ProblemInstance inst;
  inst.ambient_dim = n;
  inst.true_models = {from_covariance(0.5, s1), from_covariance(0.5, s2)};
  inst.mismatched_models = {from_covariance(0.5, m1), from_covariance(0.5, m2)};
  inst.validate();
  return inst;
}

std::vector<NamedInstance> build_catalog() {
  const double pi = std::acos(-1.0);
  // example1 / tableIII-a,b: R^4, axes are 0-based here.
  const Matrix s1 = axes_cov(4, {0, 1, 2});
  const Matrix s2 = axes_cov(4, {1, 2, 3});
  const ProblemInstance ex1 = two_class(4, s1, s2, axes_cov(4, {0, 1}), axes_cov(4, {1, 2}));
  const ProblemInstance ex1m = two_class(4, s1, s2, axes_cov(4, {0, 1}), axes_cov(4, {1, 3}));
  // example2 / tableIII-c,d: lines in R^2.
  const Matrix l1 = line_cov(pi / 2.0);
  const Matrix l2 = line_cov(pi / 4.0);
  const ProblemInstance ex2 = two_class(2, l1, l2, line_cov(5.0 * pi / 6.0), l2);
  const ProblemInstance ex2m = two_class(2, l1, l2, line_cov(4.0 * pi / 6.0), l2);
  // Robustness family in R^6.
  const Matrix r1 = axes_cov(6, {0, 1, 2});
  const Matrix r2 = axes_cov(6, {3, 4, 5});
  const ProblemInstance rob1 = two_class(6, r1, r2, axes_cov(6, {0}), axes_cov(6, {3}));
  const ProblemInstance rob2 = two_class(6, r1, r2, axes_cov(6, {0, 1}), axes_cov(6, {3, 4}));
  const ProblemInstance rob3 = two_class(6, r1, r2, r1, r2);

  const auto floor = Verdict::FloorConditionsFail;
  const auto clean = Verdict::NoFloor;
  return {
      {"example1", ex1, floor, std::nullopt},
      {"example1-mod", ex1m, clean, 0.5},
      {"example2", ex2, floor, std::nullopt},
      {"example2-mod", ex2m, clean, 0.5},
      {"tableIII-a", ex1, floor, std::nullopt},
      {"tableIII-b", ex1m, clean, 0.5},
      {"tableIII-c", ex2, floor, std::nullopt},
      {"tableIII-d", ex2m, clean, 0.5},
      {"rob1", rob1, clean, 0.5},
      {"rob2", rob2, clean, 1.0},
      {"rob3", rob3, clean, 1.5},
  };
}

}  // namespace

const std::vector<NamedInstance>& catalog() {
  static const std::vector<NamedInstance> entries = build_catalog();
  return entries;
}

const NamedInstance& catalog_entry(const std::string& name) {
  for (const NamedInstance& e : catalog()) {
    if (e.name == name) return e;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown catalog entry '" + name + "'");
}

// ---------------------------------------------------------------------------
// Noise sweeps

void SweepTable::write_tsv(std::ostream& out) const {
  const bool with_mc =
      !rows.empty() && std::all_of(rows.begin(), rows.end(), [](const SweepRow& r) { return r.mc.has_value(); });
  out << "inv_sigma2_db";
  if (with_mc) out << "\tmc_error\tmc_stderr";
  out << "\tbound";
  if (!rows.empty()) {
    for (const PairTerm& p : rows.front().bound.pairs) out << "\tbound_" << p.i << '_' << p.j;
  }
  out << '\n';
  for (const SweepRow& r : rows) {
    out << format_double(r.inv_sigma2_db);
    if (with_mc) out << '\t' << r.mc->to_tsv_row();
    out << '\t' << format_double(r.bound.bound);
    for (const PairTerm& p : r.bound.pairs) {
      out << '\t' << format_double(p.pd ? std::exp(p.log_term) : 1.0);
    }
    out << '\n';
  }
}

std::string SweepTable::to_tsv() const {
  std::ostringstream out;
  write_tsv(out);
  return out.str();
}

SweepTable sweep_noise(const ProblemInstance& instance, const std::vector<double>& db_grid,
                       const SweepOptions& opts) {
  if (db_grid.empty()) throw Error(ErrorCode::InvalidArgument, "empty noise grid");
  instance.validate();
  const std::vector<PairGeometry> geometry = all_pair_geometry(instance, opts.analysis);
  SweepTable table;
  for (std::size_t k = 0; k < db_grid.size(); ++k) {
    SweepRow row;
    row.inv_sigma2_db = db_grid[k];
    row.noise_var = db_to_noise_var(db_grid[k]);
    row.bound = theorem1_bound(instance, row.noise_var, geometry, opts.analysis.tol);
    if (opts.trials > 0) {
      row.mc = monte_carlo_error(instance, row.noise_var, opts.trials, mix_key(opts.seed, k),
                                 opts.threads);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

double fit_decay_exponent(const SweepTable& table, double noise_lo, double noise_hi) {
  std::vector<double> xs, ys;
  for (const SweepRow& r : table.rows) {
    const double v = r.noise_var;
    if (v < noise_lo * (1.0 - 1e-9) || v > noise_hi * (1.0 + 1e-9)) continue;
    if (r.bound.trivial || !(r.bound.bound < 1.0)) continue;
    xs.push_back(std::log10(v));
    ys.push_back(r.bound.log10_bound);
  }
  if (xs.size() < 3) {
    throw Error(ErrorCode::InsufficientPoints,
                "need 3 rows with bound < 1 in the window, found " + std::to_string(xs.size()));
  }
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxy += (xs[k] - mx) * (ys[k] - my);
    sxx += (xs[k] - mx) * (xs[k] - mx);
  }
  if (sxx <= 0.0) throw Error(ErrorCode::InsufficientPoints, "window has a single noise level");
  return sxy / sxx;
}

// ---------------------------------------------------------------------------
// Phase transition

double order_statistic_quantile(std::vector<double> values, double p) {
  if (values.empty()) throw Error(ErrorCode::InvalidArgument, "no values");
  std::sort(values.begin(), values.end());
  const auto k = static_cast<std::size_t>(std::ceil(p * static_cast<double>(values.size()) - 1e-12));
  return values[std::clamp<std::size_t>(k, 1, values.size()) - 1];
}

namespace {

struct RunResult {
  bool pass = false;
  double error = 0.0;
};

Matrix gather_rows(const Matrix& src, const std::vector<Index>& rows, std::size_t begin,
                   std::size_t end) {
  Matrix out(static_cast<Index>(end - begin), src.cols());
  for (std::size_t k = begin; k < end; ++k) out.row(static_cast<Index>(k - begin)) = src.row(rows[k]);
  return out;
}

RunResult phase_run(const LabeledData& data, const std::vector<std::vector<Index>>& by_class,
                    const std::vector<double>& priors, const std::vector<Index>& counts,
                    const PhaseConfig& cfg, std::uint64_t key) {
  const std::size_t c = by_class.size();
  const std::size_t test = static_cast<std::size_t>(cfg.test_per_class);
  Rng rng(key);
  ProblemInstance inst;
  inst.ambient_dim = data.features.cols();
  std::vector<Matrix> tests;
  for (std::size_t k = 0; k < c; ++k) {
    std::vector<Index> rows = by_class[k];
    std::shuffle(rows.begin(), rows.end(), rng);
    tests.push_back(gather_rows(data.features, rows, 0, test));
    const Matrix pool = gather_rows(data.features, rows, test, rows.size());
    inst.true_models.push_back(estimate_from_samples(pool, priors[k], cfg.rank));
    inst.mismatched_models.push_back(estimate_from_samples(
        pool.topRows(counts[k]), priors[k], cfg.mis_rank));
  }
  RunResult out;
  out.pass = expand(inst, cfg.analysis).verdict == Verdict::NoFloor;
  const DiscriminantCache cache(inst.mismatched_models, cfg.sigma2_eval);
  std::size_t wrong = 0, total = 0;
  for (std::size_t k = 0; k < c; ++k) {
    for (Index r = 0; r < tests[k].rows(); ++r) {
      if (cache.classify(tests[k].row(r).transpose()) != static_cast<int>(k)) ++wrong;
      ++total;
    }
  }
  out.error = static_cast<double>(wrong) / static_cast<double>(total);
  return out;
}

}  // namespace

std::vector<PhaseCell> phase_transition(const LabeledData& data, const PhaseConfig& cfg) {
  if (!(cfg.sigma2_eval > 0.0)) throw Error(ErrorCode::NonpositiveNoise, "sigma2_eval must be positive");
  if (!(cfg.p_p > 0.0 && cfg.p_p <= 1.0)) throw Error(ErrorCode::InvalidArgument, "p_p must be in (0,1]");
  if (cfg.runs == 0) throw Error(ErrorCode::InvalidArgument, "runs must be at least 1");
  if (cfg.test_per_class < 1) throw Error(ErrorCode::InvalidArgument, "test_per_class must be at least 1");
  const auto by_class = data.class_rows();
  const std::size_t c = by_class.size();
  if (c < 2) throw Error(ErrorCode::InvalidArgument, "dataset needs at least two classes");
  std::vector<double> priors(c);
  for (std::size_t k = 0; k < c; ++k) {
    priors[k] = static_cast<double>(by_class[k].size()) / static_cast<double>(data.labels.size());
  }
  for (std::size_t k = 0; k < c; ++k) {
    const Index pool = static_cast<Index>(by_class[k].size()) - cfg.test_per_class;
    if (pool < cfg.rank) {
      throw Error(ErrorCode::InsufficientSamples,
                  "class " + std::to_string(k) + " has too few samples for the true-model rank");
    }
    for (const auto& counts : cfg.n_grid) {
      if (counts.size() != c) {
        throw Error(ErrorCode::DimensionMismatch, "grid cell has " + std::to_string(counts.size()) +
                                                      " counts for " + std::to_string(c) + " classes");
      }
      if (counts[k] > pool) {
        throw Error(ErrorCode::InsufficientSamples,
                    "class " + std::to_string(k) + " has " + std::to_string(pool) +
                        " training rows, cell asks for " + std::to_string(counts[k]));
      }
      if (counts[k] < cfg.mis_rank) {
        throw Error(ErrorCode::InsufficientSamples,
                    "training count " + std::to_string(counts[k]) + " below mismatched rank " +
                        std::to_string(cfg.mis_rank));
      }
    }
  }

  std::vector<PhaseCell> cells;
  for (std::size_t cell = 0; cell < cfg.n_grid.size(); ++cell) {
    std::vector<RunResult> results(cfg.runs);
    auto work = [&](std::size_t begin, std::size_t end) {
      for (std::size_t run = begin; run < end; ++run) {
        results[run] = phase_run(data, by_class, priors, cfg.n_grid[cell], cfg,
                                 mix_key(mix_key(cfg.seed, cell), run));
      }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(cfg.threads, cfg.runs));
    if (workers == 1) {
      work(0, cfg.runs);
    } else {
      std::vector<std::thread> pool;
      const std::size_t chunk = cfg.runs / workers, extra = cfg.runs % workers;
      std::size_t begin = 0;
      for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t end = begin + chunk + (w < extra ? 1 : 0);
        pool.emplace_back(work, begin, end);
        begin = end;
      }
      for (auto& t : pool) t.join();
    }
    PhaseCell out;
    out.counts = cfg.n_grid[cell];
    out.runs = cfg.runs;
    std::vector<double> errors;
    std::size_t passes = 0;
    double sum = 0.0;
    for (const RunResult& r : results) {
      passes += r.pass ? 1 : 0;
      errors.push_back(r.error);
      sum += r.error;
    }
    out.cond_pass_fraction = static_cast<double>(passes) / static_cast<double>(cfg.runs);
    out.mean_error = sum / static_cast<double>(cfg.runs);
    out.quantile_error = order_statistic_quantile(errors, cfg.p_p);
    cells.push_back(std::move(out));
  }
  return cells;
}

void write_phase_tsv(std::ostream& out, const std::vector<PhaseCell>& cells) {
  const std::size_t c = cells.empty() ? 0 : cells.front().counts.size();
  for (std::size_t k = 0; k < c; ++k) out << 'n' << (k + 1) << '\t';
  out << "runs\tcond_pass_fraction\tquantile_error\tmean_error\n";
  for (const PhaseCell& cell : cells) {
    for (Index n : cell.counts) out << n << '\t';
    out << cell.runs << '\t' << format_double(cell.cond_pass_fraction) << '\t'
        << format_double(cell.quantile_error) << '\t' << format_double(cell.mean_error) << '\n';
  }
}

LabeledData make_synthetic(const SynthConfig& cfg) {
  const Index total_rank = cfg.rank * cfg.classes;
  if (cfg.classes < 2 || cfg.rank < 1 || total_rank > cfg.ambient_dim) {
    throw Error(ErrorCode::InvalidArgument, "classes * rank must fit in the ambient dimension");
  }
  if (static_cast<Index>(cfg.spectrum.size()) != cfg.rank) {
    throw Error(ErrorCode::DimensionMismatch, "spectrum length must equal the rank");
  }
  if (!(cfg.noise_var >= 0.0) || cfg.per_class < 1) {
    throw Error(ErrorCode::InvalidArgument, "bad noise variance or sample count");
  }
  Rng rng(cfg.seed, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(cfg.ambient_dim, total_rank);
  for (Index c = 0; c < g.cols(); ++c) {
    for (Index r = 0; r < g.rows(); ++r) g(r, c) = normal(rng);
  }
  Eigen::HouseholderQR<Matrix> qr(g);
  const Matrix q = qr.householderQ() * Matrix::Identity(cfg.ambient_dim, total_rank);
  Vector scale(cfg.rank);
  for (Index k = 0; k < cfg.rank; ++k) scale[k] = std::sqrt(cfg.spectrum[static_cast<std::size_t>(k)]);
  const double noise_sd = std::sqrt(cfg.noise_var);

  LabeledData data;
  data.features.resize(cfg.per_class * cfg.classes, cfg.ambient_dim);
  Index row = 0;
  for (int c = 0; c < cfg.classes; ++c) {
    const Matrix u = q.middleCols(c * cfg.rank, cfg.rank);
    Rng class_rng(cfg.seed, static_cast<std::uint64_t>(c) + 1);
    normal.reset();
    for (Index s = 0; s < cfg.per_class; ++s, ++row) {
      Vector z(cfg.rank);
      for (Index k = 0; k < cfg.rank; ++k) z[k] = scale[k] * normal(class_rng);
      Vector y = u * z;
      for (Index k = 0; k < cfg.ambient_dim; ++k) y[k] += noise_sd * normal(class_rng);
      data.features.row(row) = y.transpose();
      data.labels.push_back(c);
    }
  }
  return data;
}

}  // namespace mismatch
