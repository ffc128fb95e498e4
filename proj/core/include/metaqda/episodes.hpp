#pragma once

#include "metaqda/niw.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace metaqda {

using Rng = std::mt19937_64;

/// Independent stream for item `index` of a run seeded with `seed`. Episode
/// `i` of a run always sees the same stream, whatever the evaluation order.
Rng derive_rng(std::uint64_t seed, std::uint64_t index);

/// n x d features with integer labels in [0, class_count).
struct FeatureDataset {
  Matrix features;
  std::vector<int> labels;
  std::vector<std::vector<Index>> class_index;
  std::string name;

  /// Validates labels and builds the class index. Throws LabelOutOfRange for a
  /// label outside [0, class_count) and InsufficientSamplesPerClass for a class
  /// without rows.
  static FeatureDataset from_parts(Matrix features, std::vector<int> labels, int class_count,
                                   std::string name = {});

  Index size() const { return features.rows(); }
  Index dim() const { return features.cols(); }
  int class_count() const { return static_cast<int>(class_index.size()); }
  Vector row(Index i) const { return features.row(i).transpose(); }
};

/// C-way K-shot support set plus Q queries per class. Labels are remapped to
/// 0..C-1 in the order of `classes`.
struct Episode {
  std::vector<Samples> support;
  std::vector<Vector> query;
  std::vector<int> query_labels;
  std::vector<int> classes;
  std::vector<std::vector<Index>> support_rows;
  std::vector<std::vector<Index>> query_rows;

  Index ways() const { return static_cast<Index>(support.size()); }
  Index dim() const { return support.front().front().size(); }
};

Episode sample_episode(const FeatureDataset& dataset, int ways, int shots, int queries, Rng& rng);

/// Per-feature mean over all rows.
Vector feature_mean(const FeatureDataset& dataset);

/// Centers each row by `reference_mean` and scales it to unit L2 norm. Rows
/// equal to the mean become zero.
FeatureDataset normalize_cl2n(const FeatureDataset& dataset, const Vector& reference_mean);

/// Ground-truth generative process: each class draws (mu, Sigma) from
/// NIW(mean, kappa, scale, nu), then samples x ~ N(mu, Sigma) plus optional
/// isotropic noise with standard deviation `noise`.
struct SyntheticTaskSpec {
  Index dim = 0;
  Index class_pool = 0;
  Vector mean;
  double kappa = 1.0;
  Matrix scale;
  double nu = 0.0;
  double noise = 0.0;

  bool valid() const;
};

struct GaussianDraw {
  Vector mu;
  Matrix sigma;
};

/// Sigma ~ InverseWishart(scale, nu) via the Bartlett decomposition, then
/// mu | Sigma ~ N(mean, Sigma / kappa).
GaussianDraw sample_niw(const Vector& mean, double kappa, const Matrix& scale, double nu,
                        Rng& rng);

FeatureDataset generate_synthetic(const SyntheticTaskSpec& spec, Index classes,
                                  Index samples_per_class, Rng& rng);

/// Ground-truth mean-confidence pseudo-count of the synthetic benchmark.
inline constexpr double kBenchmarkKappa = 6.0;

/// Anisotropic benchmark task: expected class covariance R diag(lambda) R^T
/// with lambda log-spaced over [0.2, 5] and R a seeded random rotation, an
/// offset ground-truth mean, and nu* = d + nu_offset.
SyntheticTaskSpec make_benchmark_spec(Index dim, Index class_pool, double nu_offset,
                                      double kappa, std::uint64_t seed);

}  // namespace metaqda
