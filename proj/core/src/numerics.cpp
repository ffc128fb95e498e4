#include "metaqda/numerics.hpp"

#include "metaqda/error.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace metaqda {

namespace {

void require_dim(Index got, Index want, const char* what) {
  if (got != want) {
    throw Error(ErrorKind::DimensionMismatch, std::string(what) + " has dimension " +
                                                  std::to_string(got) + ", expected " +
                                                  std::to_string(want));
  }
}

}  // namespace

LowerTriangular::LowerTriangular(const Matrix& dense) {
  if (dense.rows() != dense.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "lower-triangular factor must be square");
  }
  dense_ = dense.triangularView<Eigen::Lower>();
}

LowerTriangular LowerTriangular::identity(Index dim) {
  return LowerTriangular(Matrix::Identity(dim, dim));
}

LowerTriangular LowerTriangular::from_packed(std::span<const double> packed, Index dim) {
  if (static_cast<Index>(packed.size()) != packed_size(dim)) {
    throw Error(ErrorKind::DimensionMismatch,
                "packed factor has " + std::to_string(packed.size()) + " entries, expected " +
                    std::to_string(packed_size(dim)));
  }
  Matrix dense = Matrix::Zero(dim, dim);
  std::size_t k = 0;
  for (Index i = 0; i < dim; ++i) {
    for (Index j = 0; j <= i; ++j) dense(i, j) = packed[k++];
  }
  return LowerTriangular(dense);
}

std::vector<double> LowerTriangular::packed() const {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(packed_size(dim())));
  for (Index i = 0; i < dim(); ++i) {
    for (Index j = 0; j <= i; ++j) out.push_back(dense_(i, j));
  }
  return out;
}

Matrix LowerTriangular::product() const { return dense_ * dense_.transpose(); }

double LowerTriangular::log_det() const { return dense_.diagonal().array().log().sum(); }

Vector LowerTriangular::solve(const Vector& b) const {
  return dense_.triangularView<Eigen::Lower>().solve(b);
}

Vector LowerTriangular::solve_transpose(const Vector& b) const {
  return dense_.transpose().triangularView<Eigen::Upper>().solve(b);
}

Vector LowerTriangular::solve_product(const Vector& b) const { return solve_transpose(solve(b)); }

Matrix LowerTriangular::inverse_product() const {
  Matrix inv = dense_.triangularView<Eigen::Lower>().solve(Matrix::Identity(dim(), dim()));
  return inv.transpose() * inv;
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

LowerTriangular cholesky(const Matrix& a) {
  if (a.rows() != a.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "cholesky requires a square matrix");
  }
  if (!a.allFinite()) {
    throw Error(ErrorKind::NotPositiveDefinite, "matrix has non-finite entries");
  }
  Eigen::LLT<Matrix, Eigen::Lower> llt(a);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::NotPositiveDefinite, "non-positive pivot in Cholesky factorization");
  }
  return LowerTriangular(Matrix(llt.matrixL()));
}

double mahalanobis_sq(const Vector& x, const Vector& mu, const LowerTriangular& chol) {
  require_dim(x.size(), chol.dim(), "query");
  require_dim(mu.size(), chol.dim(), "mean");
  return chol.solve(x - mu).squaredNorm();
}

double mvn_logpdf(const Vector& x, const Vector& mu, const LowerTriangular& chol_sigma) {
  const double d = static_cast<double>(chol_sigma.dim());
  const double q = mahalanobis_sq(x, mu, chol_sigma);
  return -0.5 * d * std::log(2.0 * std::numbers::pi) - chol_sigma.log_det() - 0.5 * q;
}

double mvt_logpdf(const Vector& x, const Vector& loc, const LowerTriangular& chol_scale,
                  double dof) {
  if (!(dof > 0.0)) {
    throw Error(ErrorKind::NonPositiveDof, "degrees of freedom " + std::to_string(dof));
  }
  const double d = static_cast<double>(chol_scale.dim());
  const double q = mahalanobis_sq(x, loc, chol_scale);
  return log_gamma(0.5 * (dof + d)) - log_gamma(0.5 * dof) -
         0.5 * d * std::log(dof * std::numbers::pi) - chol_scale.log_det() -
         0.5 * (dof + d) * std::log1p(q / dof);
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::EmptyInput, "log_sum_exp of an empty list");
  const double peak = *std::max_element(values.begin(), values.end());
  if (peak == -std::numeric_limits<double>::infinity()) return peak;
  if (peak == std::numeric_limits<double>::infinity()) return peak;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - peak);
  return peak + std::log(acc);
}

double log_gamma(double x) { return boost::math::lgamma(x); }

double digamma(double x) { return boost::math::digamma(x); }

}  // namespace metaqda
