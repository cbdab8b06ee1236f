#include "twr/penalty.hpp"

namespace twr {

PenaltyOperator::PenaltyOperator(Matrix omega, Matrix P, Vector lambda)
    : omega_(std::move(omega)), P_(std::move(P)), lambda_(std::move(lambda)) {
  const auto s = omega_.rows();
  require_shape(omega_, s, s, "Omega");
  require_shape(P_, s, s, "P");
  if (lambda_.size() != s) throw Error(ErrorCode::DimensionMismatch, "eigenvalue count differs from Omega size");
}

PenaltyOperator second_diff_penalty(Eigen::Index s) {
  if (s < 3) throw Error(ErrorCode::InvalidLength, "second-difference penalty needs s >= 3, got " + std::to_string(s));

  Matrix D = Matrix::Zero(s - 2, s);
  for (Eigen::Index l = 0; l < s - 2; ++l) {
    D(l, l) = 1.0;
    D(l, l + 1) = -2.0;
    D(l, l + 2) = 1.0;
  }
  Matrix omega = D.transpose() * D;

  Eigen::SelfAdjointEigenSolver<Matrix> eig(omega);
  if (eig.info() != Eigen::Success) throw Error(ErrorCode::ConvergenceFailure, "eigendecomposition of Omega failed");

  // Eigen returns ascending order; store descending.
  Vector lambda = eig.eigenvalues().reverse();
  Matrix P = eig.eigenvectors().rowwise().reverse();
  for (Eigen::Index l = 0; l < s; ++l) {
    if (lambda(l) < kEigenClamp) lambda(l) = 0.0;
  }
  return PenaltyOperator(std::move(omega), std::move(P), std::move(lambda));
}

double quad_form(const PenaltyOperator& op, const Matrix& G) {
  if (G.rows() != op.size()) {
    throw Error(ErrorCode::DimensionMismatch, "G has " + std::to_string(G.rows()) + " rows, penalty expects " +
                                                  std::to_string(op.size()));
  }
  return (G.transpose() * op.omega() * G).trace();
}

}  // namespace twr
