#include "metaqda/episodes.hpp"

#include "metaqda/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace metaqda {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Moves a uniformly chosen subset of size `count` to the front of `items`.
template <typename T>
void partial_shuffle(std::vector<T>& items, std::size_t count, Rng& rng) {
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, items.size() - 1);
    std::swap(items[i], items[pick(rng)]);
  }
}

Vector standard_normal(Index dim, Rng& rng) {
  std::normal_distribution<double> normal;
  Vector z(dim);
  for (Index i = 0; i < dim; ++i) z(i) = normal(rng);
  return z;
}

}  // namespace

Rng derive_rng(std::uint64_t seed, std::uint64_t index) {
  const std::uint64_t a = splitmix64(seed);
  const std::uint64_t b = splitmix64(a ^ splitmix64(index + 0x632be59bd9b4e019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return Rng(seq);
}

FeatureDataset FeatureDataset::from_parts(Matrix features, std::vector<int> labels,
                                          int class_count, std::string name) {
  if (static_cast<Index>(labels.size()) != features.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "label count differs from feature row count");
  }
  FeatureDataset ds;
  ds.class_index.assign(static_cast<std::size_t>(std::max(class_count, 0)), {});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int label = labels[i];
    if (label < 0 || label >= class_count) {
      throw Error(ErrorKind::LabelOutOfRange, "row " + std::to_string(i) + " has label " +
                                                  std::to_string(label) + " with " +
                                                  std::to_string(class_count) + " classes");
    }
    ds.class_index[static_cast<std::size_t>(label)].push_back(static_cast<Index>(i));
  }
  for (std::size_t c = 0; c < ds.class_index.size(); ++c) {
    if (ds.class_index[c].empty()) {
      throw Error(ErrorKind::InsufficientSamplesPerClass, "class " + std::to_string(c) + " is empty");
    }
  }
  ds.features = std::move(features);
  ds.labels = std::move(labels);
  ds.name = std::move(name);
  return ds;
}

Episode sample_episode(const FeatureDataset& dataset, int ways, int shots, int queries, Rng& rng) {
  if (ways < 1 || shots < 1 || queries < 0) {
    throw std::invalid_argument("episode needs ways >= 1, shots >= 1, queries >= 0");
  }
  if (dataset.class_count() < ways) {
    throw Error(ErrorKind::InsufficientClasses, std::to_string(ways) + "-way episode from " +
                                                    std::to_string(dataset.class_count()) +
                                                    " classes");
  }
  const std::size_t needed = static_cast<std::size_t>(shots + queries);
  for (int c = 0; c < dataset.class_count(); ++c) {
    if (dataset.class_index[static_cast<std::size_t>(c)].size() < needed) {
      throw Error(ErrorKind::InsufficientSamplesPerClass,
                  "class " + std::to_string(c) + " has " +
                      std::to_string(dataset.class_index[static_cast<std::size_t>(c)].size()) +
                      " rows, episode needs " + std::to_string(needed));
    }
  }

  std::vector<int> pool(static_cast<std::size_t>(dataset.class_count()));
  std::iota(pool.begin(), pool.end(), 0);
  partial_shuffle(pool, static_cast<std::size_t>(ways), rng);

  Episode ep;
  ep.classes.assign(pool.begin(), pool.begin() + ways);
  ep.support.resize(static_cast<std::size_t>(ways));
  ep.support_rows.resize(static_cast<std::size_t>(ways));
  ep.query_rows.resize(static_cast<std::size_t>(ways));
  for (int j = 0; j < ways; ++j) {
    std::vector<Index> rows = dataset.class_index[static_cast<std::size_t>(ep.classes[j])];
    partial_shuffle(rows, needed, rng);
    auto& srows = ep.support_rows[static_cast<std::size_t>(j)];
    auto& qrows = ep.query_rows[static_cast<std::size_t>(j)];
    srows.assign(rows.begin(), rows.begin() + shots);
    qrows.assign(rows.begin() + shots, rows.begin() + static_cast<std::ptrdiff_t>(needed));
    for (Index r : srows) ep.support[static_cast<std::size_t>(j)].push_back(dataset.row(r));
    for (Index r : qrows) {
      ep.query.push_back(dataset.row(r));
      ep.query_labels.push_back(j);
    }
  }
  return ep;
}

Vector feature_mean(const FeatureDataset& dataset) {
  return dataset.features.colwise().mean().transpose();
}

FeatureDataset normalize_cl2n(const FeatureDataset& dataset, const Vector& reference_mean) {
  if (reference_mean.size() != dataset.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "reference mean dimension differs from features");
  }
  FeatureDataset out = dataset;
  for (Index i = 0; i < out.features.rows(); ++i) {
    auto row = out.features.row(i);
    row -= reference_mean.transpose();
    const double norm = row.norm();
    if (norm > 0.0) row /= norm;
  }
  return out;
}

bool SyntheticTaskSpec::valid() const {
  if (dim < 1 || mean.size() != dim || scale.rows() != dim || scale.cols() != dim) return false;
  if (!(kappa > 0.0) || !(nu > static_cast<double>(dim) - 1.0) || !(noise >= 0.0)) return false;
  Eigen::LLT<Matrix> llt(scale);
  return llt.info() == Eigen::Success;
}

GaussianDraw sample_niw(const Vector& mean, double kappa, const Matrix& scale, double nu,
                        Rng& rng) {
  const Index d = mean.size();
  const LowerTriangular chol_s = cholesky(scale);

  // Bartlett factor A of a standard Wishart(I, nu) draw W = A A^T.
  Matrix bartlett = Matrix::Zero(d, d);
  std::normal_distribution<double> normal;
  for (Index i = 0; i < d; ++i) {
    std::chi_squared_distribution<double> chi2(nu - static_cast<double>(i));
    bartlett(i, i) = std::sqrt(chi2(rng));
    for (Index j = 0; j < i; ++j) bartlett(i, j) = normal(rng);
  }
  // Sigma = L_S (A A^T)^{-1} L_S^T = G G^T with G = L_S A^{-T}.
  const Matrix a_inv =
      bartlett.triangularView<Eigen::Lower>().solve(Matrix::Identity(d, d));
  const Matrix g = chol_s.dense() * a_inv.transpose();

  GaussianDraw draw;
  draw.sigma = g * g.transpose();
  draw.mu = mean + g * standard_normal(d, rng) / std::sqrt(kappa);
  return draw;
}

FeatureDataset generate_synthetic(const SyntheticTaskSpec& spec, Index classes,
                                  Index samples_per_class, Rng& rng) {
  if (!spec.valid()) throw std::invalid_argument("invalid synthetic task spec");
  const Index d = spec.dim;
  Matrix features(classes * samples_per_class, d);
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(classes * samples_per_class));
  Index row = 0;
  for (Index c = 0; c < classes; ++c) {
    const GaussianDraw draw = sample_niw(spec.mean, spec.kappa, spec.scale, spec.nu, rng);
    const LowerTriangular chol = cholesky(draw.sigma);
    for (Index s = 0; s < samples_per_class; ++s) {
      Vector x = draw.mu + chol.dense() * standard_normal(d, rng);
      if (spec.noise > 0.0) x += spec.noise * standard_normal(d, rng);
      features.row(row++) = x.transpose();
      labels.push_back(static_cast<int>(c));
    }
  }
  return FeatureDataset::from_parts(std::move(features), std::move(labels),
                                    static_cast<int>(classes), "synthetic");
}

SyntheticTaskSpec make_benchmark_spec(Index dim, Index class_pool, double nu_offset, double kappa,
                                      std::uint64_t seed) {
  Rng rng = derive_rng(seed, 0xbe9c);
  Matrix gauss(dim, dim);
  std::normal_distribution<double> normal;
  for (Index i = 0; i < dim; ++i) {
    for (Index j = 0; j < dim; ++j) gauss(i, j) = normal(rng);
  }
  const Matrix rotation = Eigen::HouseholderQR<Matrix>(gauss).householderQ();

  Vector lambda(dim);
  for (Index i = 0; i < dim; ++i) {
    const double t = dim > 1 ? static_cast<double>(i) / static_cast<double>(dim - 1) : 0.5;
    lambda(i) = 0.2 * std::pow(25.0, t);
  }

  SyntheticTaskSpec spec;
  spec.dim = dim;
  spec.class_pool = class_pool;
  spec.nu = static_cast<double>(dim) + nu_offset;
  spec.kappa = kappa;
  // E[Sigma] = S / (nu - d - 1) for the inverse Wishart.
  const double mean_scale = std::max(spec.nu - static_cast<double>(dim) - 1.0, 1.0);
  spec.scale = mean_scale * rotation * lambda.asDiagonal() * rotation.transpose();
  spec.scale = 0.5 * (spec.scale + spec.scale.transpose());
  spec.mean = Vector::Constant(dim, 1.0);
  return spec;
}

}  // namespace metaqda
