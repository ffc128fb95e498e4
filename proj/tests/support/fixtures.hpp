#pragma once

#include "metaqda/episodes.hpp"
#include "metaqda/niw.hpp"

#include <random>

namespace fixtures {

using metaqda::Index;
using metaqda::Matrix;
using metaqda::Vector;

inline Vector random_vector(Index d, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  Vector v(d);
  for (Index i = 0; i < d; ++i) v(i) = n(rng);
  return v;
}

/// A A^T / d + shift * I for Gaussian A.
inline Matrix random_spd(Index d, std::mt19937_64& rng, double shift = 0.5) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix a(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) a(i, j) = n(rng);
  return a * a.transpose() / static_cast<double>(d) + shift * Matrix::Identity(d, d);
}

inline metaqda::NiwPrior random_prior(Index d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  metaqda::NiwPrior p;
  p.mean = random_vector(d, rng, 0.5);
  p.kappa = 0.5 + u(rng);
  p.chol_scale = metaqda::cholesky(random_spd(d, rng));
  p.nu = static_cast<double>(d) + 1.0 + 2.0 * u(rng);
  return p;
}

inline metaqda::Samples random_samples(Index d, Index k, std::mt19937_64& rng,
                                       const Vector& center) {
  metaqda::Samples out;
  for (Index i = 0; i < k; ++i) out.push_back(center + random_vector(d, rng));
  return out;
}

/// Episode with `ways` classes around well separated random centers.
inline metaqda::Episode random_episode(Index d, int ways, int shots, int queries,
                                       std::mt19937_64& rng) {
  metaqda::Episode ep;
  for (int c = 0; c < ways; ++c) {
    const Vector center = random_vector(d, rng, 1.5);
    ep.support.push_back(random_samples(d, shots, rng, center));
    for (int q = 0; q < queries; ++q) {
      ep.query.push_back(center + random_vector(d, rng));
      ep.query_labels.push_back(c);
    }
    ep.classes.push_back(c);
  }
  return ep;
}

/// Labelled dataset with `classes` Gaussian blobs of `per_class` rows.
inline metaqda::FeatureDataset blob_dataset(Index d, int classes, int per_class,
                                            std::uint64_t seed, double spread = 3.0) {
  std::mt19937_64 rng(seed);
  Matrix x(static_cast<Index>(classes) * per_class, d);
  std::vector<int> labels;
  for (int c = 0; c < classes; ++c) {
    const Vector center = random_vector(d, rng, spread);
    for (int i = 0; i < per_class; ++i) {
      x.row(static_cast<Index>(labels.size())) = (center + random_vector(d, rng)).transpose();
      labels.push_back(c);
    }
  }
  return metaqda::FeatureDataset::from_parts(std::move(x), std::move(labels), classes, "blobs");
}

}  // namespace fixtures
