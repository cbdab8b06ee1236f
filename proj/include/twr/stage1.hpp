#pragma once

#include "twr/model_io.hpp"

namespace twr {

/// X = U diag(d) V^T for a wide n x p operator (n <= p).
struct ThinSvd {
  Matrix U;  // n x n
  Vector d;  // n, descending
  Matrix V;  // p x n
};

struct RawEstimate {
  Matrix B_hat;  // p x s
  Eigen::Index effective_rank = 0;
  double rank_tol = 0.0;
};

inline constexpr double kDefaultRankTol = 1e-12;

ThinSvd thin_svd(const Matrix& X);

/// Minimum-norm solution of Y = X B. Singular values at or below
/// rank_tol * d_max are treated as zero.
RawEstimate raw_estimate(const Matrix& X, const Matrix& Y, double rank_tol = kDefaultRankTol);
RawEstimate raw_estimate(const ThinSvd& svd, const Matrix& Y, double rank_tol = kDefaultRankTol);

/// Ridge-regularized minimum norm, X^T (X X^T + lambda I)^{-1} Y.
/// lambda == 0 is identical to raw_estimate.
RawEstimate raw_estimate_ridge(const Matrix& X, const Matrix& Y, double lambda, double rank_tol = kDefaultRankTol);

}  // namespace twr
