#include "metaqda/niw.hpp"

#include "metaqda/error.hpp"

#include <string>

namespace metaqda {

namespace {

void check_samples(std::span<const Vector> samples, Index dim) {
  if (samples.empty()) throw Error(ErrorKind::EmptySupport, "class has no support samples");
  for (const auto& x : samples) {
    if (x.size() != dim) {
      throw Error(ErrorKind::DimensionMismatch, "support sample of dimension " +
                                                    std::to_string(x.size()) + ", expected " +
                                                    std::to_string(dim));
    }
  }
}

Vector sample_mean(std::span<const Vector> samples) {
  Vector mean = Vector::Zero(samples.front().size());
  for (const auto& x : samples) mean += x;
  return mean / static_cast<double>(samples.size());
}

Matrix scatter_about(std::span<const Vector> samples, const Vector& center) {
  const Index d = center.size();
  Matrix scatter = Matrix::Zero(d, d);
  for (const auto& x : samples) {
    const Vector r = x - center;
    scatter.selfadjointView<Eigen::Lower>().rankUpdate(r);
  }
  return scatter.selfadjointView<Eigen::Lower>();
}

}  // namespace

bool NiwPrior::valid() const {
  const Index d = dim();
  if (chol_scale.dim() != d || d == 0) return false;
  if (!mean.allFinite() || !chol_scale.dense().allFinite()) return false;
  if (!(kappa > 0.0) || !(nu > static_cast<double>(d) - 1.0)) return false;
  return (chol_scale.dense().diagonal().array() > 0.0).all();
}

NiwPrior default_prior(Index dim) {
  return NiwPrior{Vector::Zero(dim), 1.0, LowerTriangular::identity(dim),
                  static_cast<double>(dim)};
}

ClassPosterior niw_posterior(const NiwPrior& prior, std::span<const Vector> samples) {
  const Index d = prior.dim();
  check_samples(samples, d);
  const double k = static_cast<double>(samples.size());
  const Vector xbar = sample_mean(samples);
  const Vector offset = xbar - prior.mean;

  ClassPosterior post;
  post.count = static_cast<Index>(samples.size());
  post.kappa = prior.kappa + k;
  post.nu = prior.nu + k;
  post.mean = (prior.kappa * prior.mean + k * xbar) / post.kappa;
  post.scale = prior.scale() + scatter_about(samples, xbar) +
               (prior.kappa * k / post.kappa) * offset * offset.transpose();
  post.chol_scale = cholesky(post.scale);
  return post;
}

NiwPrior as_prior(const ClassPosterior& posterior) {
  return NiwPrior{posterior.mean, posterior.kappa, posterior.chol_scale, posterior.nu};
}

GaussianParams map_estimate(const ClassPosterior& posterior) {
  const double denom = posterior.nu + static_cast<double>(posterior.dim()) + 1.0;
  GaussianParams params;
  params.mu = posterior.mean;
  params.sigma = posterior.scale / denom;
  params.chol_sigma = cholesky(params.sigma);
  return params;
}

double default_ridge(const Matrix& cov) {
  const double trace = cov.trace();
  if (!(trace > 0.0)) return 1e-6;
  return 1e-6 * trace / static_cast<double>(cov.rows());
}

GaussianParams mle_gaussian(std::span<const Vector> samples, std::optional<double> ridge) {
  if (samples.empty()) throw Error(ErrorKind::EmptySupport, "class has no support samples");
  const Index d = samples.front().size();
  check_samples(samples, d);
  GaussianParams params;
  params.mu = sample_mean(samples);
  params.sigma = scatter_about(samples, params.mu) / static_cast<double>(samples.size());
  const double r = ridge.value_or(default_ridge(params.sigma));
  params.sigma.diagonal().array() += r;
  params.chol_sigma = cholesky(params.sigma);
  return params;
}

std::vector<GaussianParams> mle_qda(std::span<const Samples> per_class,
                                    std::optional<double> ridge) {
  std::vector<GaussianParams> out;
  out.reserve(per_class.size());
  for (const auto& samples : per_class) out.push_back(mle_gaussian(samples, ridge));
  return out;
}

}  // namespace metaqda
