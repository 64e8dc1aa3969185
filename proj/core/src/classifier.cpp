#include "mismatch/classifier.hpp"

#include "mismatch/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <thread>

namespace mismatch {

DiscriminantCache::DiscriminantCache(const std::vector<ClassModel>& models, double noise_var)
    : noise_var_(noise_var), n_(models.empty() ? 0 : models.front().ambient_dim()) {
  if (!(noise_var > 0.0)) {
    throw Error(ErrorCode::NonpositiveNoise, "noise variance must be positive");
  }
  const double log_s2 = std::log(noise_var);
  for (const ClassModel& m : models) {
    if (m.ambient_dim() != n_) throw Error(ErrorCode::DimensionMismatch, "mixed ambient dimensions");
    Entry e;
    e.log_prior = std::log(m.prior);
    e.basis = m.basis.basis();
    e.inv_shifted = (m.eigenvalues.array() + noise_var).inverse();
    e.log_det = (m.eigenvalues.array() + noise_var).log().sum() +
                static_cast<double>(n_ - m.rank()) * log_s2;
    entries_.push_back(std::move(e));
  }
}

double DiscriminantCache::quadratic_form(std::size_t c, const Vector& y) const {
  if (y.size() != n_) {
    throw Error(ErrorCode::DimensionMismatch, "observation length " + std::to_string(y.size()) +
                                                  ", expected " + std::to_string(n_));
  }
  const Entry& e = entries_[c];
  if (e.basis.cols() == 0) return y.squaredNorm() / noise_var_;
  // Residual form: exact for rank-r plus isotropic structure, no cancellation.
  const Vector coef = e.basis.transpose() * y;
  const double residual = (y - e.basis * coef).squaredNorm();
  return residual / noise_var_ + coef.cwiseAbs2().dot(e.inv_shifted);
}

double DiscriminantCache::discriminant(std::size_t c, const Vector& y) const {
  const Entry& e = entries_[c];
  return e.log_prior - 0.5 * e.log_det - 0.5 * quadratic_form(c, y);
}

int DiscriminantCache::classify(const Vector& y) const {
  int best = 0;
  double best_value = discriminant(0, y);
  for (std::size_t c = 1; c < entries_.size(); ++c) {
    const double v = discriminant(c, y);
    if (v > best_value) {
      best_value = v;
      best = static_cast<int>(c);
    }
  }
  return best;
}

double discriminant(const Vector& y, const ClassModel& model, double noise_var) {
  return DiscriminantCache({model}, noise_var).discriminant(0, y);
}

int classify(const Vector& y, const std::vector<ClassModel>& models, double noise_var) {
  return DiscriminantCache(models, noise_var).classify(y);
}

std::string ErrorEstimate::to_json() const {
  nlohmann::json j;
  j["trials"] = trials;
  j["overall_error"] = overall_error;
  j["std_error"] = std_error;
  j["per_class_error"] = per_class_error;
  j["confusion"] = confusion;
  return j.dump(2);
}

std::string ErrorEstimate::to_tsv_row() const {
  return format_double(overall_error) + "\t" + format_double(std_error);
}

ErrorEstimate monte_carlo_error(const ProblemInstance& instance, double noise_var,
                                std::uint64_t trials, std::uint64_t seed, unsigned threads,
                                bool matched) {
  if (trials == 0) throw Error(ErrorCode::InvalidArgument, "trials must be at least 1");
  instance.validate();
  const Sampler sampler(instance, noise_var);
  const DiscriminantCache cache(matched ? instance.true_models : instance.mismatched_models,
                                noise_var);
  const std::size_t c = instance.num_classes();
  using Counts = std::vector<std::vector<std::uint64_t>>;

  auto run_range = [&](std::uint64_t begin, std::uint64_t end, Counts& counts) {
    Vector y(instance.ambient_dim);
    for (std::uint64_t t = begin; t < end; ++t) {
      Rng rng(seed, t);
      const int label = sampler.draw(rng, y);
      const int decided = cache.classify(y);
      ++counts[static_cast<std::size_t>(label)][static_cast<std::size_t>(decided)];
    }
  };

  const unsigned workers = static_cast<unsigned>(
      std::max<std::uint64_t>(1, std::min<std::uint64_t>(std::max(1u, threads), trials)));
  std::vector<Counts> partial(workers, Counts(c, std::vector<std::uint64_t>(c, 0)));
  if (workers == 1) {
    run_range(0, trials, partial[0]);
  } else {
    std::vector<std::thread> pool;
    const std::uint64_t chunk = trials / workers;
    const std::uint64_t extra = trials % workers;
    std::uint64_t begin = 0;
    for (unsigned w = 0; w < workers; ++w) {
      const std::uint64_t end = begin + chunk + (w < extra ? 1 : 0);
      pool.emplace_back(run_range, begin, end, std::ref(partial[w]));
      begin = end;
    }
    for (auto& th : pool) th.join();
  }

  ErrorEstimate est;
  est.trials = trials;
  est.confusion.assign(c, std::vector<std::uint64_t>(c, 0));
  for (const Counts& p : partial) {
    for (std::size_t a = 0; a < c; ++a) {
      for (std::size_t b = 0; b < c; ++b) est.confusion[a][b] += p[a][b];
    }
  }
  std::uint64_t wrong = 0;
  est.per_class_error.assign(c, 0.0);
  for (std::size_t a = 0; a < c; ++a) {
    std::uint64_t row = 0;
    for (std::size_t b = 0; b < c; ++b) {
      row += est.confusion[a][b];
      if (a != b) wrong += est.confusion[a][b];
    }
    const std::uint64_t misses = row - est.confusion[a][a];
    est.per_class_error[a] = row > 0 ? static_cast<double>(misses) / static_cast<double>(row) : 0.0;
  }
  const double n = static_cast<double>(trials);
  est.overall_error = static_cast<double>(wrong) / n;
  est.std_error = std::sqrt(est.overall_error * (1.0 - est.overall_error) / n);
  return est;
}

}  // namespace mismatch
