#include "cli.hpp"

#include <mismatch/error.hpp>
#include <mismatch/experiments.hpp>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace mismatch::cli {

namespace {

struct Settings {
  std::string catalog;
  std::string instance;
  double alpha_scale = 0.5;
  std::optional<double> alpha;
  double rank_tol = 1e-10;
  double cos_tol = 1e-9;
  double pd_tol = 1e-12;
  std::uint64_t seed = 0;
  std::string output;
  std::string format = "tsv";
  unsigned threads = 1;
  std::string config;

  std::vector<double> db;
  std::string db_range;
  std::uint64_t trials = 100000;

  // angles
  std::string basis_a, basis_b;

  // phase
  std::string data;
  Index rank = 4;
  Index mis_rank = 4;
  std::vector<Index> n_star;
  std::size_t runs = 100;
  double p_p = 0.9;
  std::optional<double> sigma2_eval;
  Index test_per_class = 50;

  // gen-synth
  SynthConfig synth;
};

std::uint64_t default_seed() {
  if (const char* env = std::getenv("MISMATCH_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "MISMATCH_SEED is not an unsigned integer");
    }
  }
  return 0;
}

// Values from a JSON config file fill every option the command line left unset.
void apply_config(const std::string& path, Settings& s, const CLI::App& app) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("config: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::ParseError, "config must be a JSON object");
  static const std::set<std::string> keys = {"catalog", "instance", "alpha_scale", "alpha",
                                             "rank_tol", "cos_tol",  "pd_tol",      "seed",
                                             "output",  "format",   "threads"};
  auto given = [&](const char* flag) { return app.count(flag) > 0; };
  try {
    for (const auto& item : doc.items()) {
      const std::string& k = item.key();
      if (!keys.count(k)) throw Error(ErrorCode::ParseError, "unknown config key '" + k + "'");
      const auto& v = item.value();
      if (k == "catalog" && !given("--catalog")) s.catalog = v.get<std::string>();
      if (k == "instance" && !given("--instance")) s.instance = v.get<std::string>();
      if (k == "alpha_scale" && !given("--alpha-scale")) s.alpha_scale = v.get<double>();
      if (k == "alpha" && !given("--alpha")) s.alpha = v.get<double>();
      if (k == "rank_tol" && !given("--rank-tol")) s.rank_tol = v.get<double>();
      if (k == "cos_tol" && !given("--cos-tol")) s.cos_tol = v.get<double>();
      if (k == "pd_tol" && !given("--pd-tol")) s.pd_tol = v.get<double>();
      if (k == "seed" && !given("--seed")) s.seed = v.get<std::uint64_t>();
      if (k == "output" && !given("--output")) s.output = v.get<std::string>();
      if (k == "format" && !given("--format")) s.format = v.get<std::string>();
      if (k == "threads" && !given("--threads")) s.threads = v.get<unsigned>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("config: ") + e.what());
  }
}

void validate_settings(const Settings& s) {
  for (double t : {s.rank_tol, s.cos_tol, s.pd_tol}) {
    if (!(t > 0.0)) throw Error(ErrorCode::InvalidArgument, "tolerances must be positive");
  }
  if (!(s.alpha_scale > 0.0 && s.alpha_scale < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "alpha scale must lie in (0,1)");
  }
  if (s.alpha && !(*s.alpha > 0.0)) throw Error(ErrorCode::InvalidArgument, "alpha must be positive");
  if (s.format != "tsv" && s.format != "json") {
    throw Error(ErrorCode::InvalidArgument, "format must be tsv or json");
  }
  if (s.threads < 1) throw Error(ErrorCode::InvalidArgument, "threads must be at least 1");
}

AnalysisOptions analysis_options(const Settings& s) {
  AnalysisOptions o;
  o.tol.rank_rel = s.rank_tol;
  o.tol.intersection = s.cos_tol;
  o.tol.pd_rel = s.pd_tol;
  o.alpha.scale = s.alpha_scale;
  o.alpha.fixed = s.alpha;
  return o;
}

ProblemInstance load_instance(const Settings& s) {
  if (!s.catalog.empty() && !s.instance.empty()) {
    throw Error(ErrorCode::InvalidArgument, "give either --catalog or --instance, not both");
  }
  if (!s.catalog.empty()) return catalog_entry(s.catalog).instance;
  if (!s.instance.empty()) return load_instance_json(s.instance, s.rank_tol);
  throw Error(ErrorCode::InvalidArgument, "an instance is required (--catalog or --instance)");
}

std::vector<double> noise_grid(const Settings& s) {
  std::vector<double> grid = s.db;
  if (!s.db_range.empty()) {
    if (!grid.empty()) throw Error(ErrorCode::InvalidArgument, "give either --db or --db-range");
    std::vector<double> parts;
    std::stringstream ss(s.db_range);
    std::string tok;
    while (std::getline(ss, tok, ':')) {
      try {
        parts.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw Error(ErrorCode::ParseError, "bad --db-range '" + s.db_range + "'");
      }
    }
    if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0]) {
      throw Error(ErrorCode::ParseError, "--db-range expects start:stop:step with step > 0");
    }
    const auto count = static_cast<long>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9)) + 1;
    for (long k = 0; k < count; ++k) grid.push_back(parts[0] + static_cast<double>(k) * parts[2]);
  }
  if (grid.empty()) throw Error(ErrorCode::InvalidArgument, "empty noise grid (use --db or --db-range)");
  return grid;
}

// Writes to --output when given, else to the command's stream.
void emit(const Settings& s, std::ostream& out, const std::string& text) {
  if (s.output.empty()) {
    out << text;
    return;
  }
  std::ofstream file(s.output, std::ios::binary);
  if (!file) throw Error(ErrorCode::IoError, "cannot write " + s.output);
  file << text;
}

std::string sweep_json(const SweepTable& table) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const SweepRow& r : table.rows) {
    nlohmann::ordered_json row;
    row["inv_sigma2_db"] = r.inv_sigma2_db;
    row["noise_var"] = r.noise_var;
    row["bound"] = r.bound.bound;
    row["log10_bound"] = r.bound.log10_bound;
    row["trivial"] = r.bound.trivial;
    nlohmann::ordered_json pairs = nlohmann::ordered_json::array();
    for (const PairTerm& p : r.bound.pairs) {
      pairs.push_back({{"i", p.i}, {"j", p.j}, {"pd", p.pd}, {"log_term", p.log_term}});
    }
    row["pairs"] = pairs;
    if (r.mc) row["mc"] = nlohmann::ordered_json::parse(r.mc->to_json());
    rows.push_back(std::move(row));
  }
  return rows.dump(2) + "\n";
}

std::string expansion_tsv(const ExpansionReport& rep) {
  std::ostringstream out;
  out << "i\tj\td_ij\tnec\tsuff\tcor2\tc0\talpha0\talpha\ts_w\ts_v\tlog_A_ij\n";
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("NA"); };
  for (const PairReport& p : rep.pairs) {
    out << p.conditions.i << '\t' << p.conditions.j << '\t' << format_double(p.d_ij) << '\t'
        << p.conditions.nec_holds << '\t' << p.conditions.suff_holds << '\t'
        << p.conditions.corollary2_holds << '\t' << opt(p.conditions.suff_margin) << '\t'
        << opt(p.alpha0) << '\t' << format_double(p.alpha) << '\t' << p.s_w << '\t' << p.s_v
        << '\t' << opt(p.log_A_ij) << '\n';
  }
  return out.str();
}

void add_instance_options(CLI::App* cmd, Settings& s) {
  cmd->add_option("--catalog", s.catalog, "Built-in instance name");
  cmd->add_option("--instance", s.instance, "Instance JSON file");
  cmd->add_option("--alpha-scale", s.alpha_scale, "Fraction of the admissible alpha");
  cmd->add_option("--alpha", s.alpha, "Fixed alpha for every pair");
  cmd->add_option("--rank-tol", s.rank_tol, "Relative eigenvalue rank tolerance");
  cmd->add_option("--cos-tol", s.cos_tol, "Singular-value band for intersections");
  cmd->add_option("--pd-tol", s.pd_tol, "Relative positive-definiteness tolerance");
}

void add_common_options(CLI::App* cmd, Settings& s) {
  cmd->add_option("--seed", s.seed, "Master seed (default $MISMATCH_SEED or 0)");
  cmd->add_option("--output,-o", s.output, "Output file (default stdout)");
  cmd->add_option("--format", s.format, "tsv or json");
  cmd->add_option("--threads", s.threads, "Worker threads");
  cmd->add_option("--config", s.config, "JSON config file");
}

void add_grid_options(CLI::App* cmd, Settings& s) {
  cmd->add_option("--db", s.db, "1/sigma^2 grid in dB")->delimiter(',');
  cmd->add_option("--db-range", s.db_range, "start:stop:step in dB");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Settings s;
  CLI::App app{"Mismatched subspace classification: bounds, expansions and simulation"};
  app.require_subcommand(1);

  auto* check = app.add_subcommand("check", "Floor conditions and verdict (JSON); exit 0/2/1");
  auto* expand_cmd = app.add_subcommand("expand", "Low-noise expansion report");
  auto* bound = app.add_subcommand("bound", "Error-probability bound over a noise grid");
  auto* simulate = app.add_subcommand("simulate", "Bound plus Monte Carlo error over a noise grid");
  auto* angles = app.add_subcommand("angles", "Principal angles between two CSV bases");
  auto* phase = app.add_subcommand("phase", "Training-size phase grid over a labeled dataset");
  auto* synth = app.add_subcommand("gen-synth", "Write a synthetic union-of-subspaces dataset");

  for (auto* cmd : {check, expand_cmd, bound, simulate}) add_instance_options(cmd, s);
  for (auto* cmd : {check, expand_cmd, bound, simulate, angles, phase, synth}) add_common_options(cmd, s);
  for (auto* cmd : {bound, simulate}) add_grid_options(cmd, s);
  simulate->add_option("--trials", s.trials, "Monte Carlo trials per grid point");

  angles->add_option("basis_a", s.basis_a, "CSV basis (columns)")->required();
  angles->add_option("basis_b", s.basis_b, "CSV basis (columns)")->required();

  phase->add_option("--data", s.data, "Dataset CSV (label first)")->required();
  phase->add_option("--rank", s.rank, "True-model rank");
  phase->add_option("--mis-rank", s.mis_rank, "Mismatched-model rank");
  phase->add_option("--n", s.n_star, "Training samples per class, one cell each")
      ->delimiter(',')
      ->required();
  phase->add_option("--runs", s.runs, "Random splits per cell");
  phase->add_option("--p-p", s.p_p, "Probability level for the quantile");
  phase->add_option("--sigma2-eval", s.sigma2_eval, "Classifier noise variance")->required();
  phase->add_option("--test-per-class", s.test_per_class, "Held-out rows per class");

  synth->add_option("--ambient", s.synth.ambient_dim, "Ambient dimension");
  synth->add_option("--classes", s.synth.classes, "Number of classes");
  synth->add_option("--rank", s.synth.rank, "Subspace rank");
  synth->add_option("--per-class", s.synth.per_class, "Samples per class");
  synth->add_option("--spectrum", s.synth.spectrum, "Signal eigenvalues")->delimiter(',');
  synth->add_option("--noise-var", s.synth.noise_var, "Additive noise variance");

  try {
    s.seed = default_seed();
    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? 0 : 1;
    }
    CLI::App* cmd = app.get_subcommands().front();
    if (!s.config.empty()) apply_config(s.config, s, *cmd);
    validate_settings(s);
    const AnalysisOptions opts = analysis_options(s);

    if (cmd == check || cmd == expand_cmd) {
      const ProblemInstance inst = load_instance(s);
      const ExpansionReport rep = expand(inst, opts);
      const bool tsv = cmd == expand_cmd && s.format == "tsv";
      emit(s, out, tsv ? expansion_tsv(rep) : rep.to_json() + "\n");
      if (cmd == check) return rep.verdict == Verdict::NoFloor ? 0 : 2;
      return 0;
    }
    if (cmd == bound || cmd == simulate) {
      const ProblemInstance inst = load_instance(s);
      SweepOptions so;
      so.trials = cmd == simulate ? s.trials : 0;
      if (cmd == simulate && s.trials < 1) throw Error(ErrorCode::InvalidArgument, "trials must be at least 1");
      so.seed = s.seed;
      so.threads = s.threads;
      so.analysis = opts;
      const SweepTable table = sweep_noise(inst, noise_grid(s), so);
      emit(s, out, s.format == "json" ? sweep_json(table) : table.to_tsv());
      return 0;
    }
    if (cmd == angles) {
      const Subspace a = Subspace::from_columns(read_matrix_csv_file(s.basis_a));
      const Subspace b = Subspace::from_columns(read_matrix_csv_file(s.basis_b));
      const PrincipalAngles pa = principal_angles(a, b);
      std::ostringstream text;
      if (s.format == "json") {
        nlohmann::ordered_json j;
        j["cosines"] = std::vector<double>(pa.cosines.data(), pa.cosines.data() + pa.cosines.size());
        j["angles"] = std::vector<double>(pa.angles.data(), pa.angles.data() + pa.angles.size());
        j["d_min"] = d_min(a, b);
        j["d_max"] = d_max(a, b);
        text << j.dump(2) << "\n";
      } else {
        text << "index\tcosine\tangle\n";
        for (Index k = 0; k < pa.cosines.size(); ++k) {
          text << k << '\t' << format_double(pa.cosines[k]) << '\t' << format_double(pa.angles[k]) << '\n';
        }
        text << "# d_min\t" << format_double(d_min(a, b)) << "\n# d_max\t" << format_double(d_max(a, b)) << '\n';
      }
      emit(s, out, text.str());
      return 0;
    }
    if (cmd == phase) {
      const LabeledData data = read_dataset_csv_file(s.data);
      PhaseConfig cfg;
      cfg.rank = s.rank;
      cfg.mis_rank = s.mis_rank;
      const auto classes = static_cast<std::size_t>(data.num_classes());
      for (Index n : s.n_star) cfg.n_grid.emplace_back(classes, n);
      cfg.runs = s.runs;
      cfg.p_p = s.p_p;
      cfg.sigma2_eval = *s.sigma2_eval;
      cfg.test_per_class = s.test_per_class;
      cfg.seed = s.seed;
      cfg.threads = s.threads;
      cfg.analysis = opts;
      std::ostringstream text;
      write_phase_tsv(text, phase_transition(data, cfg));
      emit(s, out, text.str());
      return 0;
    }
    if (cmd == synth) {
      s.synth.seed = s.seed;
      if (s.synth.spectrum.size() != static_cast<std::size_t>(s.synth.rank)) {
        // A rank override without a spectrum: geometric decay from 1.
        s.synth.spectrum.clear();
        for (Index k = 0; k < s.synth.rank; ++k) s.synth.spectrum.push_back(std::pow(0.6, static_cast<double>(k)));
      }
      std::ostringstream text;
      write_dataset_csv(text, make_synthetic(s.synth));
      emit(s, out, text.str());
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace mismatch::cli
