#include "mismatch/model.hpp"

#include "mismatch/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace mismatch {

Matrix ClassModel::low_rank_covariance() const {
  const Matrix& u = basis.basis();
  return u * eigenvalues.asDiagonal() * u.transpose();
}

namespace {

void check_prior(double prior) {
  if (!(prior > 0.0 && prior <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "prior " + format_double(prior) + " outside (0,1]");
  }
}

}  // namespace

ClassModel from_covariance(double prior, const Matrix& cov, const RankSpec& rank) {
  check_prior(prior);
  const SpectralDecomposition eig = sym_eig(cov);
  const Index n = cov.rows();
  Vector values = eig.eigenvalues;
  const double top = n > 0 ? std::max(values[0], 0.0) : 0.0;
  if (n > 0 && values[n - 1] < -1e-10 * std::max(top, 1e-300)) {
    throw Error(ErrorCode::NotPSD, "covariance eigenvalue " + format_double(values[n - 1]));
  }
  values = values.cwiseMax(0.0);
  const Index numeric_rank = rank_with_tol(values, rank.rel_tol);
  Index r = numeric_rank;
  if (rank.rank) {
    r = *rank.rank;
    if (r < 0 || r > n) {
      throw Error(ErrorCode::RankExceedsAmbient,
                  "rank " + std::to_string(r) + " in ambient dimension " + std::to_string(n));
    }
    if (r > numeric_rank) {
      throw Error(ErrorCode::RankDeficient, "requested rank " + std::to_string(r) +
                                                " but numerical rank is " +
                                                std::to_string(numeric_rank));
    }
  }
  ClassModel m;
  m.prior = prior;
  m.covariance = 0.5 * (cov + cov.transpose());
  m.basis = Subspace(n, eig.eigenvectors.leftCols(r));
  m.eigenvalues = values.head(r);
  return m;
}

ClassModel from_factors(double prior, const Matrix& basis, const Vector& eigenvalues) {
  check_prior(prior);
  if (basis.cols() != eigenvalues.size()) {
    throw Error(ErrorCode::DimensionMismatch, "basis and eigenvalue counts differ");
  }
  if (eigenvalues.size() > 0 && eigenvalues.minCoeff() <= 0.0) {
    throw Error(ErrorCode::InvalidArgument, "eigenvalues must be positive");
  }
  ClassModel m;
  m.prior = prior;
  m.basis = Subspace(basis.rows(), basis);
  // Keep the descending-order convention.
  std::vector<Index> order(static_cast<std::size_t>(eigenvalues.size()));
  for (Index k = 0; k < eigenvalues.size(); ++k) order[static_cast<std::size_t>(k)] = k;
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return eigenvalues[a] > eigenvalues[b]; });
  Matrix u(basis.rows(), basis.cols());
  m.eigenvalues.resize(eigenvalues.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    u.col(static_cast<Index>(k)) = basis.col(order[k]);
    m.eigenvalues[static_cast<Index>(k)] = eigenvalues[order[k]];
  }
  m.basis = Subspace(basis.rows(), u);
  m.covariance = m.low_rank_covariance();
  return m;
}

void ProblemInstance::validate() const {
  if (true_models.size() < 2) {
    throw Error(ErrorCode::InvalidArgument, "need at least two classes");
  }
  if (mismatched_models.size() != true_models.size()) {
    throw Error(ErrorCode::DimensionMismatch, "true and mismatched class counts differ");
  }
  auto check_family = [&](const std::vector<ClassModel>& family, const char* what) {
    double total = 0.0;
    for (const ClassModel& m : family) {
      if (m.ambient_dim() != ambient_dim || m.covariance.rows() != ambient_dim ||
          m.covariance.cols() != ambient_dim) {
        throw Error(ErrorCode::DimensionMismatch,
                    std::string(what) + " model does not match ambient dimension " +
                        std::to_string(ambient_dim));
      }
      total += m.prior;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw Error(ErrorCode::InvalidArgument,
                  std::string(what) + " priors sum to " + format_double(total));
    }
  };
  check_family(true_models, "true");
  check_family(mismatched_models, "mismatched");
}

Sampler::Sampler(const ProblemInstance& instance, double noise_var)
    : noise_sd_(0.0), n_(instance.ambient_dim) {
  if (!(noise_var > 0.0)) {
    throw Error(ErrorCode::NonpositiveNoise, "noise variance must be positive");
  }
  noise_sd_ = std::sqrt(noise_var);
  double acc = 0.0;
  for (const ClassModel& m : instance.true_models) {
    factors_.push_back(m.basis.basis() * m.eigenvalues.cwiseSqrt().asDiagonal());
    acc += m.prior;
    cumulative_.push_back(acc);
  }
}

int Sampler::draw(Rng& rng, Vector& y) const {
  const double u = rng.uniform() * cumulative_.back();
  int label = 0;
  while (label + 1 < static_cast<int>(cumulative_.size()) &&
         u >= cumulative_[static_cast<std::size_t>(label)]) {
    ++label;
  }
  const Matrix& f = factors_[static_cast<std::size_t>(label)];
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(f.cols());
  for (Index k = 0; k < z.size(); ++k) z[k] = normal(rng);
  y.resize(n_);
  for (Index k = 0; k < n_; ++k) y[k] = noise_sd_ * normal(rng);
  if (f.cols() > 0) y.noalias() += f * z;
  return label;
}

Sample sample(const ProblemInstance& instance, double noise_var, Rng& rng) {
  Sampler s(instance, noise_var);
  Sample out;
  out.label = s.draw(rng, out.y);
  return out;
}

ClassModel estimate_from_samples(const Matrix& samples, double prior, Index rank) {
  const Index n = samples.rows();
  if (n == 0) throw Error(ErrorCode::EmptySampleSet, "no samples");
  if (rank < 0 || rank > std::min(n, samples.cols())) {
    throw Error(ErrorCode::RankTooLarge, "rank " + std::to_string(rank) + " with " +
                                             std::to_string(n) + " samples in dimension " +
                                             std::to_string(samples.cols()));
  }
  const Matrix second = (samples.transpose() * samples) / static_cast<double>(n);
  return from_covariance(prior, second, RankSpec::exact(rank));
}

// ---------------------------------------------------------------------------
// Instance JSON

namespace {

using nlohmann::json;

Matrix matrix_from_json(const json& value, const std::string& base_dir) {
  if (value.is_string()) {
    std::filesystem::path p(value.get<std::string>());
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    return read_matrix_csv_file(p.string());
  }
  if (!value.is_array()) {
    throw Error(ErrorCode::ParseError, "covariance must be a CSV path or an array of rows");
  }
  const std::size_t rows = value.size();
  if (rows == 0) return Matrix(0, 0);
  const std::size_t cols = value[0].is_array() ? value[0].size() : 0;
  Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!value[r].is_array() || value[r].size() != cols) {
      throw Error(ErrorCode::ParseError, "covariance rows must have equal length");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (!value[r][c].is_number()) throw Error(ErrorCode::ParseError, "non-numeric entry");
      m(static_cast<Index>(r), static_cast<Index>(c)) = value[r][c].get<double>();
    }
  }
  return m;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const char* where) {
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key())) {
      throw Error(ErrorCode::ParseError,
                  "unknown key '" + item.key() + "' in " + std::string(where));
    }
  }
}

RankSpec rank_from_json(const json& obj, const char* key, double rank_tol) {
  if (!obj.contains(key)) return RankSpec::tolerance(rank_tol);
  const json& v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw Error(ErrorCode::ParseError, std::string(key) + " must be a nonnegative integer");
  }
  return RankSpec::exact(static_cast<Index>(v.get<long long>()));
}

}  // namespace

ProblemInstance parse_instance_json(const std::string& text, const std::string& base_dir,
                                    double rank_tol) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  try {
    if (!doc.is_object()) throw Error(ErrorCode::ParseError, "instance must be a JSON object");
    reject_unknown(doc, {"ambient_dim", "classes"}, "instance");
    ProblemInstance inst;
    inst.ambient_dim = static_cast<Index>(doc.at("ambient_dim").get<long long>());
    const json& classes = doc.at("classes");
    if (!classes.is_array()) throw Error(ErrorCode::ParseError, "classes must be an array");
    for (const json& c : classes) {
      reject_unknown(c,
                     {"prior", "true_cov", "mismatched_cov", "rank", "mismatched_rank",
                      "mismatched_prior"},
                     "class");
      const double prior = c.at("prior").get<double>();
      const double mis_prior = c.contains("mismatched_prior") ? c.at("mismatched_prior").get<double>()
                                                              : prior;
      const Matrix cov = matrix_from_json(c.at("true_cov"), base_dir);
      const Matrix mis_cov =
          c.contains("mismatched_cov") ? matrix_from_json(c.at("mismatched_cov"), base_dir) : cov;
      for (const Matrix* m : {&cov, &mis_cov}) {
        if (m->rows() != inst.ambient_dim || m->cols() != inst.ambient_dim) {
          throw Error(ErrorCode::DimensionMismatch, "covariance is " + std::to_string(m->rows()) +
                                                        "x" + std::to_string(m->cols()) +
                                                        ", expected " +
                                                        std::to_string(inst.ambient_dim));
        }
      }
      inst.true_models.push_back(from_covariance(prior, cov, rank_from_json(c, "rank", rank_tol)));
      inst.mismatched_models.push_back(
          from_covariance(mis_prior, mis_cov, rank_from_json(c, "mismatched_rank", rank_tol)));
    }
    inst.validate();
    return inst;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

ProblemInstance load_instance_json(const std::string& path, double rank_tol) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::filesystem::path p(path);
  const std::string dir = p.has_parent_path() ? p.parent_path().string() : ".";
  return parse_instance_json(buf.str(), dir, rank_tol);
}

std::string instance_to_json(const ProblemInstance& instance) {
  json doc;
  doc["ambient_dim"] = instance.ambient_dim;
  json classes = json::array();
  for (std::size_t i = 0; i < instance.num_classes(); ++i) {
    const ClassModel& t = instance.true_models[i];
    const ClassModel& m = instance.mismatched_models[i];
    json c;
    c["prior"] = t.prior;
    c["mismatched_prior"] = m.prior;
    c["true_cov"] = matrix_to_json(t.covariance);
    c["mismatched_cov"] = matrix_to_json(m.covariance);
    c["rank"] = t.rank();
    c["mismatched_rank"] = m.rank();
    classes.push_back(std::move(c));
  }
  doc["classes"] = std::move(classes);
  return doc.dump(2) + "\n";
}

void save_instance_json(const std::string& path, const ProblemInstance& instance) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << instance_to_json(instance);
}

// ---------------------------------------------------------------------------
// Dataset CSV

int LabeledData::num_classes() const {
  int top = -1;
  for (int l : labels) top = std::max(top, l);
  return top + 1;
}

std::vector<std::vector<Index>> LabeledData::class_rows() const {
  std::vector<std::vector<Index>> rows(static_cast<std::size_t>(num_classes()));
  for (std::size_t k = 0; k < labels.size(); ++k) {
    rows[static_cast<std::size_t>(labels[k])].push_back(static_cast<Index>(k));
  }
  return rows;
}

LabeledData read_dataset_csv(std::istream& in) {
  const Matrix raw = read_matrix_csv(in);
  if (raw.rows() == 0 || raw.cols() < 2) {
    throw Error(ErrorCode::ParseError, "dataset needs a label column and at least one feature");
  }
  LabeledData data;
  data.features = raw.rightCols(raw.cols() - 1);
  data.labels.resize(static_cast<std::size_t>(raw.rows()));
  for (Index r = 0; r < raw.rows(); ++r) {
    const double l = raw(r, 0);
    if (l < 0 || l != std::floor(l) || l > 1e6) {
      throw Error(ErrorCode::ParseError, "label on row " + std::to_string(r + 1) +
                                             " is not a nonnegative integer");
    }
    data.labels[static_cast<std::size_t>(r)] = static_cast<int>(l);
  }
  return data;
}

LabeledData read_dataset_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return read_dataset_csv(in);
}

void write_dataset_csv(std::ostream& out, const LabeledData& data) {
  for (Index r = 0; r < data.features.rows(); ++r) {
    out << data.labels[static_cast<std::size_t>(r)];
    for (Index c = 0; c < data.features.cols(); ++c) out << ',' << format_double(data.features(r, c));
    out << '\n';
  }
}

void write_dataset_csv_file(const std::string& path, const LabeledData& data) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  write_dataset_csv(out, data);
}

}  // namespace mismatch
