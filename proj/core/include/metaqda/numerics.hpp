#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace metaqda {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Dense lower-triangular factor. Entries above the diagonal are held at
/// exactly zero; the packed form lists the lower triangle row by row:
/// (0,0), (1,0), (1,1), (2,0), ...
class LowerTriangular {
 public:
  LowerTriangular() = default;

  /// Takes the lower triangle of `dense`; anything above the diagonal is dropped.
  explicit LowerTriangular(const Matrix& dense);

  static LowerTriangular identity(Index dim);
  static LowerTriangular from_packed(std::span<const double> packed, Index dim);
  static Index packed_size(Index dim) { return dim * (dim + 1) / 2; }

  Index dim() const { return dense_.rows(); }
  double operator()(Index row, Index col) const { return dense_(row, col); }
  const Matrix& dense() const { return dense_; }
  std::vector<double> packed() const;

  /// L * L^T
  Matrix product() const;
  /// Sum of log diagonal entries, i.e. half of log det(L L^T).
  double log_det() const;
  /// L^{-1} b
  Vector solve(const Vector& b) const;
  /// L^{-T} b
  Vector solve_transpose(const Vector& b) const;
  /// (L L^T)^{-1} b
  Vector solve_product(const Vector& b) const;
  /// (L L^T)^{-1}
  Matrix inverse_product() const;

  friend bool operator==(const LowerTriangular& a, const LowerTriangular& b) {
    return a.dense_ == b.dense_;
  }

 private:
  Matrix dense_;
};

/// Factorizes a symmetric positive definite matrix. Only the lower triangle of
/// `a` is read. Throws NotPositiveDefinite on a non-positive pivot.
LowerTriangular cholesky(const Matrix& a);

/// Squared Mahalanobis distance (x - mu)^T (L L^T)^{-1} (x - mu).
double mahalanobis_sq(const Vector& x, const Vector& mu, const LowerTriangular& chol);

double mvn_logpdf(const Vector& x, const Vector& mu, const LowerTriangular& chol_sigma);

/// Multivariate Student-t log-density with location `loc`, scale matrix
/// chol_scale * chol_scale^T and `dof` degrees of freedom.
double mvt_logpdf(const Vector& x, const Vector& loc, const LowerTriangular& chol_scale,
                  double dof);

double log_sum_exp(std::span<const double> values);

double log_gamma(double x);
double digamma(double x);

bool all_finite(const Matrix& m);

}  // namespace metaqda
