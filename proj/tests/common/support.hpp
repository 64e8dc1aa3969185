#pragma once

// Independent oracles and random-instance generators shared by the tests.

#include <mismatch/model.hpp>
#include <mismatch/rng.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace testing_support {

using mismatch::Index;
using mismatch::Matrix;
using mismatch::Vector;

using LMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

inline Matrix gaussian(mismatch::Rng& rng, Index rows, Index cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index c = 0; c < cols; ++c) {
    for (Index r = 0; r < rows; ++r) m(r, c) = normal(rng);
  }
  return m;
}

// Orthonormal columns by classical Gram-Schmidt, deliberately not the
// library's QR path.
inline Matrix gram_schmidt(const Matrix& a) {
  Matrix q = a;
  for (Index c = 0; c < q.cols(); ++c) {
    for (int pass = 0; pass < 2; ++pass) {
      for (Index p = 0; p < c; ++p) q.col(c) -= q.col(p).dot(q.col(c)) * q.col(p);
    }
    q.col(c) /= q.col(c).norm();
  }
  return q;
}

inline Matrix random_orthonormal(mismatch::Rng& rng, Index n, Index k) {
  return gram_schmidt(gaussian(rng, n, k));
}

inline Matrix random_spd(mismatch::Rng& rng, Index n) {
  const Matrix g = gaussian(rng, n, n);
  return g * g.transpose() + Matrix::Identity(n, n);
}

inline Matrix random_symmetric(mismatch::Rng& rng, Index n) {
  const Matrix g = gaussian(rng, n, n);
  return 0.5 * (g + g.transpose());
}

// log|det A| by long-double Gaussian elimination with partial pivoting.
inline long double lu_log_abs_det(LMatrix a) {
  const Index n = a.rows();
  long double acc = 0.0L;
  for (Index k = 0; k < n; ++k) {
    Index piv = k;
    for (Index r = k + 1; r < n; ++r) {
      if (std::fabs(a(r, k)) > std::fabs(a(piv, k))) piv = r;
    }
    if (piv != k) a.row(k).swap(a.row(piv));
    const long double d = a(k, k);
    acc += std::log(std::fabs(d));
    for (Index r = k + 1; r < n; ++r) {
      const long double f = a(r, k) / d;
      for (Index c = k; c < n; ++c) a(r, c) -= f * a(k, c);
    }
  }
  return acc;
}

inline LMatrix to_long(const Matrix& m) { return m.cast<long double>(); }

// Gauss-Jordan inverse in long double.
inline LMatrix lu_inverse(LMatrix a) {
  const Index n = a.rows();
  LMatrix inv = LMatrix::Identity(n, n);
  for (Index k = 0; k < n; ++k) {
    Index piv = k;
    for (Index r = k + 1; r < n; ++r) {
      if (std::fabs(a(r, k)) > std::fabs(a(piv, k))) piv = r;
    }
    a.row(k).swap(a.row(piv));
    inv.row(k).swap(inv.row(piv));
    const long double d = a(k, k);
    a.row(k) /= d;
    inv.row(k) /= d;
    for (Index r = 0; r < n; ++r) {
      if (r == k) continue;
      const long double f = a(r, k);
      a.row(r) -= f * a.row(k);
      inv.row(r) -= f * inv.row(k);
    }
  }
  return inv;
}

// (Sigma + s I)^{-1} formed densely from the covariance.
inline LMatrix dense_shifted_inverse(const mismatch::ClassModel& m, long double s) {
  const Index n = m.ambient_dim();
  return lu_inverse(to_long(m.low_rank_covariance()) + s * LMatrix::Identity(n, n));
}

inline LMatrix dense_sigma_ij(const mismatch::ProblemInstance& inst, std::size_t i, std::size_t j,
                              long double alpha, long double s) {
  return dense_shifted_inverse(inst.true_models[i], s) +
         alpha * (dense_shifted_inverse(inst.mismatched_models[j], s) -
                  dense_shifted_inverse(inst.mismatched_models[i], s));
}

// Pairwise bound, natural log, entirely from dense long-double determinants.
inline long double dense_pair_log_bound(const mismatch::ProblemInstance& inst, std::size_t i,
                                        std::size_t j, long double alpha, long double s) {
  const Index n = inst.ambient_dim;
  auto shifted = [&](const mismatch::ClassModel& m) {
    return lu_log_abs_det(to_long(m.low_rank_covariance()) + s * LMatrix::Identity(n, n));
  };
  const auto& mi = inst.mismatched_models[i];
  const auto& mj = inst.mismatched_models[j];
  return alpha * (std::log(static_cast<long double>(mj.prior)) -
                  std::log(static_cast<long double>(mi.prior))) +
         0.5L * alpha * (shifted(mi) - shifted(mj)) - 0.5L * shifted(inst.true_models[i]) -
         0.5L * lu_log_abs_det(dense_sigma_ij(inst, i, j, alpha, s));
}

inline mismatch::ProblemInstance two_class_from_bases(const Matrix& u1, const Matrix& u2,
                                                      const Matrix& m1, const Matrix& m2) {
  mismatch::ProblemInstance inst;
  inst.ambient_dim = u1.rows();
  auto model = [](const Matrix& u) {
    return mismatch::from_factors(0.5, u, Vector::Ones(u.cols()));
  };
  inst.true_models = {model(u1), model(u2)};
  inst.mismatched_models = {model(m1), model(m2)};
  return inst;
}

struct RandomInstance {
  mismatch::ProblemInstance instance;
  bool diagonal = false;
};

// Mixes generic, axis-aligned (diagonal) and perturbed-truth geometries so
// that both passing and failing condition sets occur.
inline RandomInstance random_instance(mismatch::Rng& rng) {
  std::uniform_int_distribution<int> pick_n(2, 8);
  std::uniform_int_distribution<int> pick_c(2, 3);
  std::uniform_int_distribution<int> pick_mode(0, 2);
  std::uniform_real_distribution<double> pick_lambda(0.5, 3.0);
  RandomInstance out;
  const Index n = pick_n(rng);
  const int classes = pick_c(rng);
  const int mode = pick_mode(rng);
  out.diagonal = mode == 1;
  std::uniform_int_distribution<int> pick_rank(1, static_cast<int>(std::min<Index>(3, n)));
  std::vector<double> priors(static_cast<std::size_t>(classes));
  double total = 0.0;
  for (double& p : priors) total += (p = 0.5 + std::uniform_real_distribution<double>(0, 1)(rng));
  for (double& p : priors) p /= total;
  std::uniform_real_distribution<double> pick_eps(0.0, 0.6);

  auto axis_basis = [&](Index r) {
    std::vector<Index> idx(static_cast<std::size_t>(n));
    for (Index k = 0; k < n; ++k) idx[static_cast<std::size_t>(k)] = k;
    std::shuffle(idx.begin(), idx.end(), rng);
    Matrix b = Matrix::Zero(n, r);
    for (Index k = 0; k < r; ++k) b(idx[static_cast<std::size_t>(k)], k) = 1.0;
    return b;
  };
  auto spectrum = [&](Index r) {
    Vector v(r);
    for (Index k = 0; k < r; ++k) v[k] = pick_lambda(rng);
    return v;
  };
  auto model = [&](double prior, const Matrix& b) {
    const Vector lam = spectrum(b.cols());
    if (out.diagonal) {
      // Diagonal covariance so the corollary for diagonal models applies.
      return mismatch::from_covariance(prior, b * lam.asDiagonal() * b.transpose(),
                                       mismatch::RankSpec::exact(b.cols()));
    }
    return mismatch::from_factors(prior, b, lam);
  };

  out.instance.ambient_dim = n;
  for (int c = 0; c < classes; ++c) {
    const Index r = pick_rank(rng);
    const Index rm = pick_rank(rng);
    Matrix u, um;
    if (mode == 1) {
      u = axis_basis(r);
      um = axis_basis(rm);
    } else if (mode == 0) {
      u = random_orthonormal(rng, n, r);
      um = random_orthonormal(rng, n, rm);
    } else {
      // Mismatch as a perturbation of the truth, padded or cut to rank rm.
      u = random_orthonormal(rng, n, r);
      Matrix base(n, rm);
      for (Index k = 0; k < rm; ++k) {
        base.col(k) = k < r ? Vector(u.col(k)) : Vector(gaussian(rng, n, 1).col(0));
      }
      um = gram_schmidt(base + pick_eps(rng) * gaussian(rng, n, rm));
    }
    out.instance.true_models.push_back(model(priors[static_cast<std::size_t>(c)], u));
    out.instance.mismatched_models.push_back(model(priors[static_cast<std::size_t>(c)], um));
  }
  return out;
}

}  // namespace testing_support
