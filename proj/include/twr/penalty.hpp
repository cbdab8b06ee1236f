#pragma once

#include "twr/model_io.hpp"

namespace twr {

/// Roughness penalty g^T Omega g with a cached eigendecomposition
/// Omega = P diag(lambda) P^T, eigenvalues descending and clamped at zero.
class PenaltyOperator {
 public:
  PenaltyOperator(Matrix omega, Matrix P, Vector lambda);

  Eigen::Index size() const noexcept { return omega_.rows(); }
  const Matrix& omega() const noexcept { return omega_; }
  const Matrix& P() const noexcept { return P_; }
  const Vector& lambda() const noexcept { return lambda_; }

 private:
  Matrix omega_;
  Matrix P_;
  Vector lambda_;
};

inline constexpr double kEigenClamp = 1e-12;

/// Omega = D^T D for the (s-2) x s second-difference stencil (1, -2, 1).
PenaltyOperator second_diff_penalty(Eigen::Index s);

/// tr(G^T Omega G), the summed roughness of the columns of G.
double quad_form(const PenaltyOperator& op, const Matrix& G);

}  // namespace twr
