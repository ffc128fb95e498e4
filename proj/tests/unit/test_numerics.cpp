#include "metaqda/error.hpp"
#include "metaqda/numerics.hpp"

#include "fixtures.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

using namespace metaqda;

namespace {

Matrix mat2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected metaqda::Error";
  return ErrorKind::Io;
}

}  // namespace

TEST(Cholesky, KnownFactor) {
  const LowerTriangular l = cholesky(mat2(4, 2, 2, 5));
  EXPECT_DOUBLE_EQ(l(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(l(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(l(1, 1), 2.0);
  EXPECT_EQ(l(0, 1), 0.0);
}

TEST(Cholesky, IdentityFactorsToIdentity) {
  EXPECT_EQ(cholesky(Matrix::Identity(3, 3)), LowerTriangular::identity(3));
}

TEST(Cholesky, IndefiniteMatrixRejected) {
  EXPECT_EQ(kind_of([] { cholesky(mat2(1, 2, 2, 1)); }), ErrorKind::NotPositiveDefinite);
  EXPECT_EQ(kind_of([] { cholesky(Matrix::Zero(2, 2)); }), ErrorKind::NotPositiveDefinite);
}

TEST(Cholesky, NonSquareRejected) {
  EXPECT_EQ(kind_of([] { cholesky(Matrix::Identity(2, 3)); }), ErrorKind::DimensionMismatch);
}

TEST(Cholesky, ReconstructsRandomSpd) {
  std::mt19937_64 rng(11);
  for (Index d = 1; d <= 16; ++d) {
    for (int rep = 0; rep < 5; ++rep) {
      const Matrix a = fixtures::random_spd(d, rng);
      const LowerTriangular l = cholesky(a);
      EXPECT_LE((l.product() - a).cwiseAbs().maxCoeff(), 1e-10) << "d=" << d;
      EXPECT_TRUE((l.dense().diagonal().array() > 0.0).all());
      EXPECT_TRUE(l.dense().isLowerTriangular(0.0));
      const Matrix ref = oracle::cholesky(a);
      EXPECT_LE((l.dense() - ref).cwiseAbs().maxCoeff(), 1e-10);
    }
  }
}

TEST(LowerTriangularOps, PackedRoundTripAndSolves) {
  std::mt19937_64 rng(3);
  const LowerTriangular l = cholesky(fixtures::random_spd(5, rng));
  const auto packed = l.packed();
  ASSERT_EQ(static_cast<Index>(packed.size()), LowerTriangular::packed_size(5));
  EXPECT_EQ(LowerTriangular::from_packed(packed, 5), l);

  const Vector b = fixtures::random_vector(5, rng);
  EXPECT_LE((l.dense() * l.solve(b) - b).norm(), 1e-12);
  EXPECT_LE((l.dense().transpose() * l.solve_transpose(b) - b).norm(), 1e-12);
  EXPECT_LE((l.product() * l.solve_product(b) - b).norm(), 1e-10);
  EXPECT_LE((l.product() * l.inverse_product() - Matrix::Identity(5, 5)).norm(), 1e-10);
  EXPECT_NEAR(2.0 * l.log_det(), std::log(l.product().determinant()), 1e-10);
}

TEST(GaussianLogDensity, StandardNormalValues) {
  const auto id1 = LowerTriangular::identity(1);
  const auto id2 = LowerTriangular::identity(2);
  EXPECT_NEAR(mvn_logpdf(vec({0, 0}), vec({0, 0}), id2), -1.837877, 1e-6);
  EXPECT_NEAR(mvn_logpdf(vec({1}), vec({0}), id1), -1.418939, 1e-6);
  EXPECT_NEAR(mvn_logpdf(vec({0}), vec({0}), cholesky(Matrix::Constant(1, 1, 4.0))),
              -1.612086, 1e-6);
}

TEST(GaussianLogDensity, MatchesExplicitInverseForm) {
  std::mt19937_64 rng(5);
  for (Index d : {1, 2, 5, 12}) {
    const Matrix sigma = fixtures::random_spd(d, rng);
    const Vector mu = fixtures::random_vector(d, rng);
    const Vector x = fixtures::random_vector(d, rng);
    EXPECT_NEAR(mvn_logpdf(x, mu, cholesky(sigma)), oracle::gaussian_logpdf(x, mu, sigma), 1e-9);
  }
}

TEST(GaussianLogDensity, IntegratesToOne) {
  // 1-D and 2-D midpoint rule over +-10 standard deviations.
  {
    const LowerTriangular l = cholesky(Matrix::Constant(1, 1, 2.25));
    const Vector mu = vec({0.3});
    const int n = 20000;
    const double lo = -15.0, h = 30.0 / n;
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += std::exp(mvn_logpdf(vec({lo + (i + 0.5) * h}), mu, l)) * h;
    EXPECT_NEAR(total, 1.0, 1e-6);
  }
  {
    const LowerTriangular l = cholesky(mat2(1.0, 0.4, 0.4, 0.5));
    const Vector mu = vec({0.0, 0.0});
    const int n = 600;
    const double lo = -10.0, h = 20.0 / n;
    double total = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        total += std::exp(mvn_logpdf(vec({lo + (i + 0.5) * h, lo + (j + 0.5) * h}), mu, l)) * h * h;
    EXPECT_NEAR(total, 1.0, 1e-4);
  }
}

TEST(GaussianLogDensity, DimensionMismatch) {
  EXPECT_EQ(kind_of([] { mvn_logpdf(vec({0, 0}), vec({0}), LowerTriangular::identity(1)); }),
            ErrorKind::DimensionMismatch);
}

TEST(StudentTLogDensity, KnownValues) {
  const auto id1 = LowerTriangular::identity(1);
  EXPECT_NEAR(mvt_logpdf(vec({0}), vec({0}), id1, 1.0), -1.144730, 1e-6);
  EXPECT_NEAR(mvt_logpdf(vec({0}), vec({0}), id1, 1e6), -0.918939, 1e-4);
  EXPECT_NEAR(mvt_logpdf(vec({0, 0}), vec({0, 0}), LowerTriangular::identity(2), 3.0), -1.837877,
              1e-6);
}

TEST(StudentTLogDensity, MatchesTermByTermForm) {
  std::mt19937_64 rng(8);
  for (Index d : {1, 3, 6}) {
    for (double dof : {0.7, 2.5, 40.0}) {
      const Matrix scale = fixtures::random_spd(d, rng);
      const Vector loc = fixtures::random_vector(d, rng);
      const Vector x = fixtures::random_vector(d, rng, 2.0);
      EXPECT_NEAR(mvt_logpdf(x, loc, cholesky(scale), dof),
                  oracle::student_t_logpdf(x, loc, scale, dof), 1e-9);
    }
  }
}

TEST(StudentTLogDensity, ApproachesGaussianForLargeDof) {
  std::mt19937_64 rng(9);
  for (Index d = 1; d <= 4; ++d) {
    const Matrix s = fixtures::random_spd(d, rng);
    const Vector mu = fixtures::random_vector(d, rng);
    const Vector x = mu + fixtures::random_vector(d, rng);
    EXPECT_NEAR(mvt_logpdf(x, mu, cholesky(s), 1e6), mvn_logpdf(x, mu, cholesky(s)), 1e-4);
  }
}

TEST(StudentTLogDensity, RejectsNonPositiveDof) {
  const auto id = LowerTriangular::identity(1);
  EXPECT_EQ(kind_of([&] { mvt_logpdf(vec({0}), vec({0}), id, 0.0); }), ErrorKind::NonPositiveDof);
  EXPECT_EQ(kind_of([&] { mvt_logpdf(vec({0}), vec({0}), id, -2.0); }), ErrorKind::NonPositiveDof);
}

TEST(LogSumExp, KnownValues) {
  const std::vector<double> a{0.0, 0.0};
  const std::vector<double> b{1000.0, 1000.0};
  const std::vector<double> c{-1000.0, 0.0};
  const double inf = std::numeric_limits<double>::infinity();
  const std::vector<double> d{-inf, 0.0};
  EXPECT_NEAR(log_sum_exp(a), 0.693147, 1e-6);
  EXPECT_NEAR(log_sum_exp(b), 1000.693147, 1e-6);
  EXPECT_DOUBLE_EQ(log_sum_exp(c), 0.0);
  EXPECT_DOUBLE_EQ(log_sum_exp(d), 0.0);
  const std::vector<double> all_neg{-inf, -inf};
  EXPECT_EQ(log_sum_exp(all_neg), -inf);
}

TEST(LogSumExp, EmptyInputRejected) {
  EXPECT_EQ(kind_of([] { log_sum_exp(std::span<const double>()); }), ErrorKind::EmptyInput);
}

TEST(LogSumExp, ShiftAndPermutationInvariance) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 30.0);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> v(1 + rep % 17);
    for (auto& x : v) x = n(rng);
    const double base = log_sum_exp(v);
    std::vector<double> shifted = v;
    for (auto& x : shifted) x += 123.5;
    EXPECT_NEAR(log_sum_exp(shifted), base + 123.5, 1e-9);
    std::shuffle(v.begin(), v.end(), rng);
    EXPECT_NEAR(log_sum_exp(v), base, 1e-12);
    EXPECT_GE(log_sum_exp(v), *std::max_element(v.begin(), v.end()));
  }
}

TEST(SpecialFunctions, LogGammaAccuracy) {
  EXPECT_NEAR(log_gamma(0.5), 0.5 * std::log(std::numbers::pi), 1e-14);
  EXPECT_NEAR(log_gamma(10.0), std::log(362880.0), 1e-12);
  for (double x = 0.5; x < 1e4; x *= 1.37) {
    EXPECT_NEAR(log_gamma(x), std::lgamma(x), 1e-12 * std::max(1.0, std::abs(std::lgamma(x))));
  }
}

TEST(SpecialFunctions, DigammaIsDerivativeOfLogGamma) {
  for (double x : {0.3, 1.0, 2.5, 7.0, 150.0}) {
    const double h = 1e-5 * x;
    EXPECT_NEAR(digamma(x), (std::lgamma(x + h) - std::lgamma(x - h)) / (2 * h), 1e-6);
  }
  EXPECT_NEAR(digamma(1.0), -0.5772156649015329, 1e-14);
}

TEST(Finite, DetectsNonFinite) {
  Matrix m = Matrix::Identity(2, 2);
  EXPECT_TRUE(all_finite(m));
  m(1, 0) = std::nan("");
  EXPECT_FALSE(all_finite(m));
}
