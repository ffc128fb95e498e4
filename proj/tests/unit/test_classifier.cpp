#include "metaqda/classifier.hpp"
#include "metaqda/error.hpp"

#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace metaqda;

namespace {

Vector v1(double a) { return Vector{{a}}; }
Vector v2(double a, double b) { return Vector{{a, b}}; }

std::vector<Samples> mirrored_support() {
  return {Samples{v2(-1, 0.5), v2(-2, -0.5)}, Samples{v2(1, 0.5), v2(2, -0.5)}};
}

}  // namespace

TEST(Fit, SingleClassGetsAllMass) {
  const QdaModel model = QdaModel::fit(default_prior(2), std::vector<Samples>{{v2(1, 1)}}, Mode::Map);
  EXPECT_DOUBLE_EQ(model.predict(v2(-5, 3)).probs(0), 1.0);
  EXPECT_DOUBLE_EQ(model.predict_fb(v2(4, 0)).probs(0), 1.0);
}

TEST(Fit, FiveWayOneShotPseudoCounts) {
  std::mt19937_64 rng(1);
  std::vector<Samples> support;
  for (int c = 0; c < 5; ++c) support.push_back({fixtures::random_vector(2, rng)});
  const QdaModel model = QdaModel::fit(default_prior(2), support, Mode::FullBayes);
  ASSERT_EQ(model.class_count(), 5u);
  for (std::size_t j = 0; j < 5; ++j) {
    EXPECT_EQ(model.posterior(j).kappa, 2.0);
    EXPECT_EQ(model.posterior(j).nu, 3.0);
  }
}

TEST(Fit, ClassOrderDoesNotChangePosteriors) {
  std::mt19937_64 rng(2);
  const NiwPrior prior = fixtures::random_prior(3, rng);
  std::vector<Samples> support;
  for (int c = 0; c < 4; ++c) support.push_back(fixtures::random_samples(3, 3, rng, Vector::Zero(3)));
  const std::vector<Samples> reversed(support.rbegin(), support.rend());
  const QdaModel a = QdaModel::fit(prior, support, Mode::Map);
  const QdaModel b = QdaModel::fit(prior, reversed, Mode::Map);
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_EQ(a.posterior(j).scale, b.posterior(3 - j).scale);
    EXPECT_EQ(a.posterior(j).mean, b.posterior(3 - j).mean);
  }
}

TEST(Fit, RejectsDuplicateIdsAndEmptySupport) {
  const std::vector<Samples> support{{v2(0, 0)}, {v2(1, 1)}};
  const std::vector<int> ids{4, 4};
  try {
    QdaModel::fit(default_prior(2), ids, support, Mode::Map);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DuplicateClass);
  }
  try {
    QdaModel::fit(default_prior(2), std::vector<Samples>{}, Mode::Map);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptySupport);
  }
}

TEST(Predict, MirrorSymmetryGivesHalf) {
  for (Mode mode : {Mode::Map, Mode::FullBayes, Mode::TiedLda}) {
    const QdaModel model = QdaModel::fit(default_prior(2), mirrored_support(), mode);
    const Prediction p = model.predict(v2(0, 0.3));
    EXPECT_NEAR(p.probs(0), 0.5, 1e-12) << to_string(mode);
    EXPECT_NEAR(p.probs(1), 0.5, 1e-12) << to_string(mode);
  }
}

TEST(Predict, LogisticOfDensityGap) {
  GaussianParams a{v1(0.0), Matrix::Identity(1, 1), LowerTriangular::identity(1)};
  GaussianParams b{v1(2.0), Matrix::Identity(1, 1), LowerTriangular::identity(1)};
  const std::vector<GaussianParams> classes{a, b};
  EXPECT_NEAR(predict_gaussians(classes, v1(0.0)).probs(0), 1.0 / (1.0 + std::exp(-2.0)), 1e-12);
  EXPECT_NEAR(predict_gaussians(classes, v1(0.0)).probs(0), 0.8808, 1e-4);

  // Same thing through the prior: a sample at the prior mean with S = nu + d + 2
  // leaves MAP variance 1; a near-zero kappa puts the second mean at 2.
  NiwPrior prior{v1(0.0), 1e-12, LowerTriangular(Matrix::Constant(1, 1, 2.0)), 1.0};
  const QdaModel model = QdaModel::fit(prior, std::vector<Samples>{{v1(0.0)}, {v1(2.0)}}, Mode::Map);
  EXPECT_NEAR(model.predict(v1(0.0)).probs(0), 0.8808, 1e-4);
}

TEST(Predict, InfiniteTemperatureIsUniform) {
  std::mt19937_64 rng(5);
  std::vector<Samples> support;
  for (int c = 0; c < 4; ++c) support.push_back(fixtures::random_samples(2, 2, rng, fixtures::random_vector(2, rng, 3.0)));
  const QdaModel model = QdaModel::fit(default_prior(2), support, Mode::FullBayes,
                                       std::numeric_limits<double>::infinity());
  const Prediction p = model.predict(v2(0.1, 0.2));
  for (Index j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(p.probs(j), 0.25);
  EXPECT_DOUBLE_EQ(p.confidence(), 0.25);
}

TEST(Predict, ProbabilitiesNormalizedAndTemperatureKeepsOrder) {
  std::mt19937_64 rng(6);
  for (int rep = 0; rep < 20; ++rep) {
    const Index d = 1 + rep % 4;
    const NiwPrior prior = fixtures::random_prior(d, rng);
    std::vector<Samples> support;
    for (int c = 0; c < 3 + rep % 4; ++c) support.push_back(fixtures::random_samples(d, 2, rng, fixtures::random_vector(d, rng, 2.0)));
    for (Mode mode : {Mode::Map, Mode::FullBayes, Mode::TiedLda}) {
      const QdaModel model = QdaModel::fit(prior, support, mode);
      const Vector x = fixtures::random_vector(d, rng, 2.0);
      const Prediction base = model.predict(x);
      EXPECT_NEAR(base.probs.sum(), 1.0, 1e-9);
      for (double t : {0.05, 0.7, 3.0, 20.0}) {
        const Prediction p = model.with_temperature(t).predict(x);
        EXPECT_NEAR(p.probs.sum(), 1.0, 1e-9);
        Index best = 0;
        p.probs.maxCoeff(&best);
        EXPECT_EQ(best, base.argmax());
        EXPECT_EQ(p.log_scores, base.log_scores);
      }
    }
  }
}

TEST(Predict, DimensionMismatch) {
  const QdaModel model = QdaModel::fit(default_prior(2), mirrored_support(), Mode::Map);
  try {
    model.predict(Vector::Zero(3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
  }
}

TEST(Predict, TiedModelHasNoStudentForm) {
  const QdaModel model = QdaModel::fit(default_prior(2), mirrored_support(), Mode::TiedLda);
  EXPECT_THROW(model.predict_fb(v2(0, 0)), std::logic_error);
}

TEST(Predict, TiedCovarianceIsPooledScatter) {
  const std::vector<Samples> support{{v2(0, 0), v2(2, 0)}, {v2(5, 1), v2(5, -1)}};
  const QdaModel model = QdaModel::fit(default_prior(2), support, Mode::TiedLda);
  Matrix expected(2, 2);
  expected << 1 + 2, 0, 0, 1 + 2;
  expected /= 2.0 + 4.0 + 2.0 + 1.0;
  EXPECT_LE((model.tied().sigma - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(AddClass, MatchesBatchFitBitForBit) {
  std::mt19937_64 rng(7);
  const NiwPrior prior = fixtures::random_prior(3, rng);
  std::vector<Samples> support;
  for (int c = 0; c < 3; ++c) support.push_back(fixtures::random_samples(3, 4, rng, fixtures::random_vector(3, rng, 2.0)));
  for (Mode mode : {Mode::Map, Mode::FullBayes, Mode::TiedLda}) {
    const QdaModel batch = QdaModel::fit(prior, support, mode);
    QdaModel grown = QdaModel::fit(prior, std::vector<Samples>(support.begin(), support.begin() + 2), mode);
    const Vector x = fixtures::random_vector(3, rng);
    const Prediction before = grown.predict(x);
    grown = grown.add_class(prior, 2, support[2]);
    ASSERT_EQ(grown.class_count(), 3u);
    const Prediction after = grown.predict(x);
    EXPECT_EQ(after.log_scores, batch.predict(x).log_scores) << to_string(mode);
    EXPECT_NEAR(after.probs.sum(), 1.0, 1e-12);
    if (mode != Mode::TiedLda) {
      // existing classes keep their scores; only normalization moves
      EXPECT_EQ(after.log_scores.head(2), before.log_scores);
    }
  }
}

TEST(AddClass, RejectsDuplicateId) {
  const QdaModel model = QdaModel::fit(default_prior(2), mirrored_support(), Mode::Map);
  try {
    model.add_class(default_prior(2), 1, Samples{v2(0, 0)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DuplicateClass);
  }
}

TEST(AddClass, SixtyToHundredWays) {
  std::mt19937_64 rng(8);
  const NiwPrior prior = default_prior(4);
  std::vector<Samples> base;
  for (int c = 0; c < 60; ++c) base.push_back(fixtures::random_samples(4, 5, rng, fixtures::random_vector(4, rng, 3.0)));
  QdaModel model = QdaModel::fit(prior, base, Mode::FullBayes);
  std::vector<std::size_t> ways{model.class_count()};
  for (int s = 0; s < 8; ++s) {
    for (int c = 0; c < 5; ++c) {
      model = model.add_class(prior, 60 + 5 * s + c, fixtures::random_samples(4, 5, rng, fixtures::random_vector(4, rng, 3.0)));
    }
    ways.push_back(model.class_count());
  }
  ASSERT_EQ(ways.size(), 9u);
  for (std::size_t s = 0; s < ways.size(); ++s) EXPECT_EQ(ways[s], 60 + 5 * s);
}

TEST(FullBayes, ConvergesToMapAsShotsGrow) {
  std::mt19937_64 rng(9);
  const Vector ca = v2(0.0, 0.0);
  const Vector cb = v2(1.0, 0.5);
  Samples a, b;
  for (int i = 0; i < 2000; ++i) {
    a.push_back(ca + fixtures::random_vector(2, rng));
    b.push_back(cb + 0.8 * fixtures::random_vector(2, rng));
  }
  std::vector<Vector> queries;
  for (int i = 0; i < 200; ++i) queries.push_back(fixtures::random_vector(2, rng, 1.5));

  std::vector<double> gaps;
  for (std::ptrdiff_t k : {10, 100, 1000, 2000}) {
    const std::vector<Samples> support{Samples(a.begin(), a.begin() + k), Samples(b.begin(), b.begin() + k)};
    const QdaModel model = QdaModel::fit(default_prior(2), support, Mode::FullBayes);
    double gap = 0.0;
    for (const auto& x : queries) {
      gap = std::max(gap, (model.predict_fb(x).probs - model.predict_map(x).probs).cwiseAbs().maxCoeff());
    }
    gaps.push_back(gap);
  }
  for (std::size_t i = 1; i < gaps.size(); ++i) EXPECT_LT(gaps[i], gaps[i - 1]);
  EXPECT_LT(gaps.back(), 1e-2);
}

TEST(Modes, ParseRoundTrip) {
  for (Mode m : {Mode::Map, Mode::FullBayes, Mode::TiedLda}) EXPECT_EQ(parse_mode(to_string(m)), m);
  EXPECT_THROW(parse_mode("bogus"), std::invalid_argument);
}
