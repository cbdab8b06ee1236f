#include "twr/stage1.hpp"

#include <cmath>

namespace twr {

namespace {

void check_inputs(const Matrix& X, const Matrix& Y, double rank_tol) {
  if (X.rows() != Y.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "X has " + std::to_string(X.rows()) + " rows, Y has " +
                                                  std::to_string(Y.rows()));
  }
  if (!(rank_tol >= 0.0 && rank_tol < 1.0)) throw Error(ErrorCode::InvalidArgument, "rank_tol must lie in [0, 1)");
  require_finite(Y, "Y");
}

// Shared by the exact and ridge paths: B = V diag(f(d)) U^T Y.
template <typename Filter>
RawEstimate filtered_estimate(const ThinSvd& svd, const Matrix& Y, double rank_tol, Filter filter) {
  if (svd.U.rows() != Y.rows()) throw Error(ErrorCode::DimensionMismatch, "SVD and Y row counts differ");
  const double d_max = svd.d.size() > 0 ? svd.d(0) : 0.0;
  const double cutoff = rank_tol * d_max;

  Matrix C = svd.U.transpose() * Y;  // Y tilde, then C hat in place
  Eigen::Index kept = 0;
  for (Eigen::Index i = 0; i < svd.d.size(); ++i) {
    if (svd.d(i) > cutoff && svd.d(i) > 0.0) {
      C.row(i) *= filter(svd.d(i));
      ++kept;
    } else {
      C.row(i).setZero();
    }
  }
  if (kept == 0) throw Error(ErrorCode::DegenerateOperator, "all singular values of X are below threshold");
  return {svd.V * C, kept, rank_tol};
}

}  // namespace

ThinSvd thin_svd(const Matrix& X) {
  if (X.rows() > X.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "forward operator must be wide (n <= p), got " +
                                                  std::to_string(X.rows()) + "x" + std::to_string(X.cols()));
  }
  require_finite(X, "X");
  Eigen::BDCSVD<Matrix> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw Error(ErrorCode::ConvergenceFailure, "SVD of X failed");
  ThinSvd out{svd.matrixU(), svd.singularValues(), svd.matrixV()};
  if (!out.U.allFinite() || !out.V.allFinite() || !out.d.allFinite()) {
    throw Error(ErrorCode::ConvergenceFailure, "SVD of X produced non-finite factors");
  }
  return out;
}

RawEstimate raw_estimate(const ThinSvd& svd, const Matrix& Y, double rank_tol) {
  check_inputs(svd.U, Y, rank_tol);
  return filtered_estimate(svd, Y, rank_tol, [](double d) { return 1.0 / d; });
}

RawEstimate raw_estimate(const Matrix& X, const Matrix& Y, double rank_tol) {
  check_inputs(X, Y, rank_tol);
  return raw_estimate(thin_svd(X), Y, rank_tol);
}

RawEstimate raw_estimate_ridge(const Matrix& X, const Matrix& Y, double lambda, double rank_tol) {
  check_inputs(X, Y, rank_tol);
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error(ErrorCode::InvalidArgument, "ridge lambda must be >= 0");
  if (lambda == 0.0) return raw_estimate(X, Y, rank_tol);
  return filtered_estimate(thin_svd(X), Y, rank_tol, [lambda](double d) { return d / (d * d + lambda); });
}

}  // namespace twr
