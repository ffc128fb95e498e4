#pragma once

#include "metaqda/numerics.hpp"

#include <optional>
#include <span>
#include <vector>

namespace metaqda {

using Samples = std::vector<Vector>;

/// Normal-Inverse-Wishart prior over a Gaussian's (mean, covariance) with the
/// scale matrix held through its Cholesky factor, S = L L^T.
struct NiwPrior {
  Vector mean;
  double kappa = 1.0;
  LowerTriangular chol_scale;
  double nu = 1.0;

  Index dim() const { return mean.size(); }
  Matrix scale() const { return chol_scale.product(); }

  /// kappa > 0, nu > d - 1, L finite with positive diagonal.
  bool valid() const;
};

/// Conjugate posterior for one class after observing `count` support points.
struct ClassPosterior {
  Vector mean;
  double kappa = 0.0;
  Matrix scale;
  double nu = 0.0;
  LowerTriangular chol_scale;
  Index count = 0;

  Index dim() const { return mean.size(); }
};

struct GaussianParams {
  Vector mu;
  Matrix sigma;
  LowerTriangular chol_sigma;
};

/// m = 0, S = I, kappa = 1, nu = d.
NiwPrior default_prior(Index dim);

ClassPosterior niw_posterior(const NiwPrior& prior, std::span<const Vector> samples);

/// Re-expresses a posterior as a prior so further evidence can be folded in.
NiwPrior as_prior(const ClassPosterior& posterior);

/// Posterior mode: mu = m_j, Sigma = S_j / (nu_j + d + 1).
GaussianParams map_estimate(const ClassPosterior& posterior);

/// 1e-6 * trace(cov) / d, falling back to 1e-6 for a zero-trace covariance.
double default_ridge(const Matrix& cov);

/// Sample mean and maximum-likelihood covariance (divide by K) plus ridge * I.
/// Without an explicit ridge, default_ridge of the sample covariance is used.
GaussianParams mle_gaussian(std::span<const Vector> samples,
                            std::optional<double> ridge = std::nullopt);

std::vector<GaussianParams> mle_qda(std::span<const Samples> per_class,
                                    std::optional<double> ridge = std::nullopt);

}  // namespace metaqda
