#pragma once

#include <vector>

#include "twr/penalty.hpp"

namespace twr {

/// Which penalties the alternating decomposition applies.
enum class Regularization {
  TwoWay,       // L1 on A and roughness on G
  TemporalOnly, // roughness on G; A is the least-squares fit B_hat G
  SpatialOnly,  // L1 on A; G is the QR of B_hat^T A
};

struct SolverOptions {
  double mu1 = 0.0;        // sparsity (L1) weight on A
  double mu2 = 0.0;        // roughness weight on G
  Eigen::Index q = 0;      // decomposition rank; 0 means full rank (q = s)
  int max_iter = 15;
  double rel_tol = 1e-6;

  /// Throws InvalidArgument if any field is out of range for a problem with s time points.
  void validate(Eigen::Index s) const;
  Eigen::Index rank_for(Eigen::Index s) const { return q == 0 ? s : q; }
};

struct DecompositionState {
  Matrix A;  // p x q spatial coefficients
  Matrix G;  // s x q orthonormal temporal basis
  int iterations_run = 0;
  bool converged = false;
  std::vector<double> objective_trace;
  std::vector<double> sparsity_trace;        // sparsity level of A G^T per iteration
  std::vector<double> relative_change_trace;  // ||B_i - B_{i-1}||_F / ||B_i||_F
  std::vector<double> orthonormality_trace;   // max |G^T G - I| per iteration

  Matrix reconstruction() const { return A * G.transpose(); }
};

/// How update_A / update_G treat a column whose divisor is zero.
enum class ZeroColumnPolicy { Throw, ZeroFill };

/// sign(r) * max(|r| - lam, 0)
inline double soft_threshold(double r, double lam) {
  const double mag = (r < 0.0 ? -r : r) - lam;
  if (mag <= 0.0) return 0.0;
  return r < 0.0 ? -mag : mag;
}

/// Sequential rank-one L1 updates of the columns of A with G fixed.
Matrix update_A(const Matrix& B_hat, const Matrix& G, double mu1,
                ZeroColumnPolicy policy = ZeroColumnPolicy::Throw);

/// Sequential ridge updates g_j = P (|a_j|^2 I + mu2 Lambda)^{-1} P^T B_res^T a_j.
/// The result is not orthonormalized.
Matrix update_G(const Matrix& B_hat, const Matrix& A, const PenaltyOperator& penalty, double mu2,
                ZeroColumnPolicy policy = ZeroColumnPolicy::Throw);

/// Thin-QR Q factor with each column's largest-magnitude entry made positive.
Matrix orthonormalize(const Matrix& G);

/// Flips column signs so the largest-magnitude entry of each column is positive.
void apply_sign_convention(Matrix& Q);

/// ||B_hat - A G^T||_F^2 + mu1 |A|_1 + mu2 tr(G^T Omega G)
double objective(const Matrix& B_hat, const Matrix& A, const Matrix& G, const PenaltyOperator& penalty, double mu1,
                 double mu2);

/// Alternating decomposition B_hat ~ A G^T. `penalty` may be null only for SpatialOnly.
DecompositionState solve(const Matrix& B_hat, const PenaltyOperator* penalty, const SolverOptions& opts,
                         Regularization mode);

DecompositionState twr_solve(const Matrix& B_hat, const PenaltyOperator& penalty, const SolverOptions& opts);
/// mu1 is forced to zero.
DecompositionState towr_solve(const Matrix& B_hat, const PenaltyOperator& penalty, SolverOptions opts);
/// mu2 is forced to zero.
DecompositionState sowr_solve(const Matrix& B_hat, SolverOptions opts);

}  // namespace twr
