#include <mismatch/error.hpp>
#include <mismatch/model.hpp>

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mismatch;
using namespace testing_support;

namespace {

Matrix diag(std::initializer_list<double> v) {
  Vector d(static_cast<Index>(v.size()));
  Index k = 0;
  for (double x : v) d[k++] = x;
  return d.asDiagonal();
}

double span_gap(const Matrix& a, const Matrix& b) {
  return (a * a.transpose() - b * b.transpose()).cwiseAbs().maxCoeff();
}

ProblemInstance simple_instance() {
  ProblemInstance inst;
  inst.ambient_dim = 3;
  inst.true_models = {from_covariance(0.3, diag({1, 0, 0})), from_covariance(0.7, diag({0, 2, 1}))};
  inst.mismatched_models = inst.true_models;
  return inst;
}

}  // namespace

TEST(FromCovariance, Examples) {
  const ClassModel m = from_covariance(0.5, diag({1, 1, 1, 0}));
  EXPECT_EQ(m.rank(), 3);
  EXPECT_LE(span_gap(m.basis.basis(), Matrix::Identity(4, 3)), 1e-12);

  EXPECT_EQ(from_covariance(0.5, Matrix::Zero(3, 3)).rank(), 0);

  const ClassModel forced = from_covariance(1.0, diag({4, 3, 2, 1}), RankSpec::exact(2));
  EXPECT_EQ(forced.rank(), 2);
  EXPECT_DOUBLE_EQ(forced.eigenvalues[0], 4.0);
  EXPECT_DOUBLE_EQ(forced.eigenvalues[1], 3.0);
}

TEST(FromCovariance, ReconstructsRandomPsd) {
  Rng rng(21);
  const Matrix g = gaussian(rng, 6, 3);
  const Matrix cov = g * g.transpose();
  const ClassModel m = from_covariance(0.4, cov);
  EXPECT_EQ(m.rank(), 3);
  EXPECT_LE(spectral_norm(m.low_rank_covariance() - cov), 1e-8 * m.eigenvalues[0]);
  for (Index k = 1; k < m.eigenvalues.size(); ++k) {
    EXPECT_GE(m.eigenvalues[k - 1], m.eigenvalues[k]);
  }
}

TEST(FromCovariance, Errors) {
  try {
    from_covariance(0.5, diag({1, -1}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotPSD);
  }
  try {
    from_covariance(0.5, Matrix::Identity(2, 2), RankSpec::exact(3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RankExceedsAmbient);
  }
  // Roundoff-negative eigenvalue is clamped rather than rejected.
  EXPECT_EQ(from_covariance(0.5, diag({1, -1e-14})).rank(), 1);
}

TEST(ProblemInstanceValidate, RejectsBadPriors) {
  ProblemInstance inst = simple_instance();
  EXPECT_NO_THROW(inst.validate());
  inst.true_models[0].prior = 0.5;
  EXPECT_THROW(inst.validate(), Error);
  inst = simple_instance();
  inst.mismatched_models.pop_back();
  EXPECT_THROW(inst.validate(), Error);
}

TEST(Sampling, RankZeroIsPureNoise) {
  ProblemInstance inst;
  inst.ambient_dim = 3;
  inst.true_models = {from_covariance(1.0, Matrix::Zero(3, 3)), from_covariance(0.5, Matrix::Zero(3, 3))};
  inst.true_models[0].prior = 1.0;
  inst.true_models[1].prior = 0.0;
  Rng rng(1);
  Vector y;
  const Sampler s(inst, 2.0);
  double acc = 0;
  const int n = 20000;
  for (int t = 0; t < n; ++t) {
    EXPECT_EQ(s.draw(rng, y), 0);
    acc += y.squaredNorm();
  }
  EXPECT_NEAR(acc / n, 6.0, 0.15);
}

TEST(Sampling, SmallNoiseStaysNearLine) {
  ProblemInstance inst;
  inst.ambient_dim = 4;
  const Matrix cov = diag({1, 0, 0, 0});
  inst.true_models = {from_covariance(0.5, cov), from_covariance(0.5, cov)};
  inst.mismatched_models = inst.true_models;
  Rng rng(2);
  const double s2 = 1e-6;
  double resid = 0;
  const int n = 10000;
  for (int t = 0; t < n; ++t) {
    const Sample smp = sample(inst, s2, rng);
    resid += smp.y.tail(3).squaredNorm();
  }
  EXPECT_NEAR(resid / n, 3 * s2, 0.1 * 3 * s2);
}

TEST(Sampling, SecondMomentAndLabelFrequencies) {
  const ProblemInstance inst = simple_instance();
  const double s2 = 0.1;
  const Sampler s(inst, s2);
  Rng rng(3);
  const int n = 100000;
  Matrix m1 = Matrix::Zero(3, 3);
  int count1 = 0;
  Vector y;
  for (int t = 0; t < n; ++t) {
    if (s.draw(rng, y) == 1) {
      m1 += y * y.transpose();
      ++count1;
    }
  }
  m1 /= count1;
  const Matrix expected = inst.true_models[1].low_rank_covariance() + s2 * Matrix::Identity(3, 3);
  EXPECT_LE(spectral_norm(m1 - expected), 0.03 * spectral_norm(expected));
  const double p = 0.7, se = std::sqrt(p * (1 - p) / n);
  EXPECT_NEAR(static_cast<double>(count1) / n, p, 3 * se);
}

TEST(Sampling, Deterministic) {
  const ProblemInstance inst = simple_instance();
  Rng a(99), b(99);
  for (int t = 0; t < 100; ++t) {
    const Sample x = sample(inst, 0.5, a), z = sample(inst, 0.5, b);
    EXPECT_EQ(x.label, z.label);
    EXPECT_EQ(x.y, z.y);
  }
}

TEST(Estimate, SingleSample) {
  Matrix x(1, 3);
  x << 3, 0, 4;
  const ClassModel m = estimate_from_samples(x, 0.5, 1);
  EXPECT_NEAR(m.eigenvalues[0], 25.0, 1e-12);
  EXPECT_LE(span_gap(m.basis.basis(), x.transpose() / 5.0), 1e-12);
}

TEST(Estimate, PlaneSamples) {
  Rng rng(4);
  Matrix x = Matrix::Zero(50, 4);
  x.leftCols(2) = gaussian(rng, 50, 2);
  const ClassModel m = estimate_from_samples(x, 1.0, 2);
  EXPECT_LE(span_gap(m.basis.basis(), Matrix::Identity(4, 2)), 1e-10);
}

TEST(Estimate, ConsistentOnLargeSample) {
  Rng rng(5);
  const int n = 10000;
  Matrix x = Matrix::Zero(n, 3);
  x.col(0) = std::sqrt(2.0) * gaussian(rng, n, 1);
  x.col(1) = gaussian(rng, n, 1);
  const ClassModel m = estimate_from_samples(x, 1.0, 2);
  EXPECT_NEAR(m.eigenvalues[0], 2.0, 0.1);
  EXPECT_NEAR(m.eigenvalues[1], 1.0, 0.05);
}

TEST(Estimate, ScaleEquivariant) {
  Rng rng(6);
  const Matrix x = gaussian(rng, 20, 5);
  const ClassModel a = estimate_from_samples(x, 1.0, 3);
  const ClassModel b = estimate_from_samples(2.5 * x, 1.0, 3);
  EXPECT_LE((b.eigenvalues - 6.25 * a.eigenvalues).cwiseAbs().maxCoeff(), 1e-10 * b.eigenvalues[0]);
  EXPECT_LE(span_gap(a.basis.basis(), b.basis.basis()), 1e-8);
}

TEST(Estimate, Errors) {
  try {
    estimate_from_samples(Matrix(0, 3), 1.0, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptySampleSet);
  }
  try {
    estimate_from_samples(Matrix::Ones(2, 3), 1.0, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RankTooLarge);
  }
}

TEST(InstanceJson, InlineRoundTrip) {
  const ProblemInstance inst = simple_instance();
  const std::string text = instance_to_json(inst);
  const ProblemInstance back = parse_instance_json(text);
  ASSERT_EQ(back.num_classes(), 2u);
  for (std::size_t c = 0; c < 2; ++c) {
    EXPECT_DOUBLE_EQ(back.true_models[c].prior, inst.true_models[c].prior);
    EXPECT_EQ(back.true_models[c].rank(), inst.true_models[c].rank());
    EXPECT_LE((back.mismatched_models[c].covariance - inst.mismatched_models[c].covariance)
                  .cwiseAbs()
                  .maxCoeff(),
              0.0);
  }
}

TEST(InstanceJson, CsvPathsRelativeToFile) {
  const auto dir = std::filesystem::temp_directory_path() / "mismatch_model_json";
  std::filesystem::create_directories(dir);
  write_matrix_csv_file((dir / "a.csv").string(), diag({1, 1, 0}));
  write_matrix_csv_file((dir / "b.csv").string(), diag({0, 1, 1}));
  {
    std::ofstream f(dir / "inst.json");
    f << R"({"ambient_dim": 3, "classes": [
      {"prior": 0.5, "true_cov": "a.csv", "mismatched_cov": "a.csv", "mismatched_rank": 1},
      {"prior": 0.5, "true_cov": "b.csv", "mismatched_cov": [[0,0,0],[0,1,0],[0,0,1]]}]})";
  }
  const ProblemInstance inst = load_instance_json((dir / "inst.json").string());
  EXPECT_EQ(inst.true_models[0].rank(), 2);
  EXPECT_EQ(inst.mismatched_models[0].rank(), 1);
  EXPECT_EQ(inst.mismatched_models[1].rank(), 2);
  EXPECT_DOUBLE_EQ(inst.mismatched_models[1].prior, 0.5);
  std::filesystem::remove_all(dir);
}

TEST(InstanceJson, Rejections) {
  EXPECT_THROW(parse_instance_json("{"), Error);
  EXPECT_THROW(parse_instance_json(R"({"ambient_dim": 1, "classes": [], "extra": 1})"), Error);
  EXPECT_THROW(load_instance_json("/nonexistent/instance.json"), Error);
}

TEST(DatasetCsv, RoundTrip) {
  LabeledData d;
  d.features = Matrix(3, 2);
  d.features << 1, 2, 3, 4, 5.5, -6;
  d.labels = {0, 1, 1};
  std::stringstream ss;
  write_dataset_csv(ss, d);
  const LabeledData back = read_dataset_csv(ss);
  EXPECT_EQ(back.features, d.features);
  EXPECT_EQ(back.labels, d.labels);
  EXPECT_EQ(back.num_classes(), 2);
  const auto rows = back.class_rows();
  EXPECT_EQ(rows[1].size(), 2u);
  std::stringstream bad("0.5,1,2\n");
  EXPECT_THROW(read_dataset_csv(bad), Error);
}
