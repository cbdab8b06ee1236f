#include "twr/solver.hpp"

#include <cmath>
#include <limits>

#include "twr/metrics.hpp"

namespace twr {

namespace {

// Columns of A whose norm falls below this fraction of ||B_hat||_F are
// numerically zero (they arise when rank(B_hat) < q).
constexpr double kNumericalZero = 1e-12;
// Relative residual below which a column is treated as linearly dependent.
constexpr double kDependenceTol = 1e-8;

std::string col_msg(Eigen::Index j) { return "column " + std::to_string(j); }

Matrix initial_basis(const Matrix& B_hat) {
  Eigen::BDCSVD<Matrix> svd(B_hat, Eigen::ComputeFullV);
  if (svd.info() != Eigen::Success) throw Error(ErrorCode::ConvergenceFailure, "SVD of raw estimate failed");
  Matrix R = svd.matrixV();
  apply_sign_convention(R);
  return R;
}

// Replaces zero or dependent columns of G and returns an orthonormal set
// (Gram-Schmidt, kept columns first in slot order). A replaced slot first
// tries the same column of `previous`, then the next unused column of
// `fallback`. Returning the orthogonalized vectors rather than the raw
// candidates keeps the later QR well conditioned when kept columns are
// themselves close to dependent.
Matrix complete_basis(const Matrix& G, const Matrix& previous, const Matrix& fallback) {
  const auto s = G.rows();
  const auto q = G.cols();
  Matrix basis(s, q);  // orthonormal vectors accepted so far
  Eigen::Index n_basis = 0;
  Matrix out(s, q);
  std::vector<Eigen::Index> dependent;

  auto residual = [&](const Vector& v) {
    Vector r = v;
    for (int pass = 0; pass < 2; ++pass) {
      if (n_basis > 0) r -= basis.leftCols(n_basis) * (basis.leftCols(n_basis).transpose() * r);
    }
    return r;
  };

  for (Eigen::Index j = 0; j < q; ++j) {
    const double norm = G.col(j).norm();
    if (norm == 0.0 || !std::isfinite(norm)) {
      dependent.push_back(j);
      continue;
    }
    Vector unit = G.col(j) / norm;
    Vector r = residual(unit);
    const double rn = r.norm();
    if (rn <= kDependenceTol) {
      dependent.push_back(j);
      continue;
    }
    basis.col(n_basis++) = r / rn;
    out.col(j) = r / rn;
  }

  Eigen::Index cursor = 0;
  for (auto slot : dependent) {
    bool filled = false;
    {
      Vector candidate = previous.col(slot);
      Vector r = residual(candidate);
      const double rn = r.norm();
      if (rn > kDependenceTol) {
        basis.col(n_basis++) = r / rn;
        out.col(slot) = r / rn;
        continue;
      }
    }
    while (cursor < fallback.cols()) {
      Vector candidate = fallback.col(cursor++);
      Vector r = residual(candidate);
      const double rn = r.norm();
      if (rn > kDependenceTol) {
        basis.col(n_basis++) = r / rn;
        out.col(slot) = r / rn;
        filled = true;
        break;
      }
    }
    if (!filled) throw Error(ErrorCode::RankDeficient, "no fallback direction left for " + col_msg(slot));
  }
  return out;
}

double max_orthonormality_error(const Matrix& G) {
  return (G.transpose() * G - Matrix::Identity(G.cols(), G.cols())).cwiseAbs().maxCoeff();
}

}  // namespace

void SolverOptions::validate(Eigen::Index s) const {
  if (!(mu1 >= 0.0) || !std::isfinite(mu1)) throw Error(ErrorCode::InvalidArgument, "mu1 must be finite and >= 0");
  if (!(mu2 >= 0.0) || !std::isfinite(mu2)) throw Error(ErrorCode::InvalidArgument, "mu2 must be finite and >= 0");
  if (q < 0 || q > s) {
    throw Error(ErrorCode::InvalidArgument, "rank q must lie in [1, " + std::to_string(s) + "], got " +
                                                std::to_string(q));
  }
  if (max_iter < 1) throw Error(ErrorCode::InvalidArgument, "max_iter must be >= 1");
  if (!(rel_tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "rel_tol must be > 0");
}

void apply_sign_convention(Matrix& Q) {
  for (Eigen::Index j = 0; j < Q.cols(); ++j) {
    Eigen::Index arg = 0;
    Q.col(j).cwiseAbs().maxCoeff(&arg);
    if (Q(arg, j) < 0.0) Q.col(j) = -Q.col(j);
  }
}

Matrix update_A(const Matrix& B_hat, const Matrix& G, double mu1, ZeroColumnPolicy policy) {
  if (G.rows() != B_hat.cols()) throw Error(ErrorCode::DimensionMismatch, "G rows must equal B_hat columns");
  if (!(mu1 >= 0.0)) throw Error(ErrorCode::InvalidArgument, "mu1 must be >= 0");

  // B_res,j g_j = B_hat g_j - sum_{l<j} a_l (g_l^T g_j), so the deflated
  // residual never needs to be formed explicitly.
  const Matrix BG = B_hat * G;
  const Matrix GtG = G.transpose() * G;
  Matrix A = Matrix::Zero(B_hat.rows(), G.cols());

  for (Eigen::Index j = 0; j < G.cols(); ++j) {
    const double g_norm2 = GtG(j, j);
    if (g_norm2 == 0.0) {
      if (policy == ZeroColumnPolicy::Throw) throw Error(ErrorCode::ZeroColumn, "G " + col_msg(j) + " is zero");
      continue;
    }
    Vector r = BG.col(j);
    if (j > 0) r.noalias() -= A.leftCols(j) * GtG.col(j).head(j);
    r /= g_norm2;
    const double lam = mu1 / (2.0 * g_norm2);
    for (Eigen::Index i = 0; i < r.size(); ++i) A(i, j) = soft_threshold(r(i), lam);
  }
  return A;
}

Matrix update_G(const Matrix& B_hat, const Matrix& A, const PenaltyOperator& penalty, double mu2,
                ZeroColumnPolicy policy) {
  if (A.rows() != B_hat.rows()) throw Error(ErrorCode::DimensionMismatch, "A rows must equal B_hat rows");
  if (penalty.size() != B_hat.cols()) throw Error(ErrorCode::DimensionMismatch, "penalty size must equal B_hat columns");
  if (!(mu2 >= 0.0)) throw Error(ErrorCode::InvalidArgument, "mu2 must be >= 0");

  const Matrix BtA = B_hat.transpose() * A;
  const Matrix AtA = A.transpose() * A;
  const Matrix& P = penalty.P();
  const Vector& lambda = penalty.lambda();
  Matrix G = Matrix::Zero(B_hat.cols(), A.cols());

  for (Eigen::Index j = 0; j < A.cols(); ++j) {
    const double a_norm2 = AtA(j, j);
    // lambda always has a zero eigenvalue, so the system is singular iff a_j = 0.
    if (a_norm2 == 0.0) {
      if (policy == ZeroColumnPolicy::Throw) {
        throw Error(ErrorCode::SingularUpdate, "A " + col_msg(j) + " is zero");
      }
      continue;
    }
    Vector z = BtA.col(j);
    if (j > 0) z.noalias() -= G.leftCols(j) * AtA.col(j).head(j);
    Vector coeffs = P.transpose() * z;
    coeffs.array() /= a_norm2 + mu2 * lambda.array();
    G.col(j).noalias() = P * coeffs;
  }
  return G;
}

Matrix orthonormalize(const Matrix& G) {
  const auto s = G.rows();
  const auto q = G.cols();
  if (q > s || q == 0) throw Error(ErrorCode::RankDeficient, "cannot orthonormalize " + std::to_string(q) + " columns in R^" + std::to_string(s));
  Eigen::HouseholderQR<Matrix> qr(G);
  const Vector diag = qr.matrixQR().diagonal().head(q).cwiseAbs();
  const double largest = diag.maxCoeff();
  if (!(largest > 0.0) || diag.minCoeff() <= 1e-12 * largest) {
    throw Error(ErrorCode::RankDeficient, "G is numerically rank deficient");
  }
  Matrix Q = qr.householderQ() * Matrix::Identity(s, q);
  apply_sign_convention(Q);
  return Q;
}

double objective(const Matrix& B_hat, const Matrix& A, const Matrix& G, const PenaltyOperator& penalty, double mu1,
                 double mu2) {
  if (A.rows() != B_hat.rows() || G.rows() != B_hat.cols() || A.cols() != G.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "objective: A, G and B_hat shapes are inconsistent");
  }
  const double fit = (B_hat - A * G.transpose()).squaredNorm();
  const double l1 = mu1 == 0.0 ? 0.0 : mu1 * A.cwiseAbs().sum();
  const double rough = mu2 == 0.0 ? 0.0 : mu2 * quad_form(penalty, G);
  return fit + l1 + rough;
}

DecompositionState solve(const Matrix& B_hat, const PenaltyOperator* penalty, const SolverOptions& opts,
                         Regularization mode) {
  const auto s = B_hat.cols();
  opts.validate(s);
  require_finite(B_hat, "B_hat");
  if (mode != Regularization::SpatialOnly) {
    if (penalty == nullptr) throw Error(ErrorCode::InvalidArgument, "roughness penalty required");
    if (penalty->size() != s) throw Error(ErrorCode::DimensionMismatch, "penalty size must equal B_hat columns");
  }
  const auto q = opts.rank_for(s);
  const double mu1 = mode == Regularization::TemporalOnly ? 0.0 : opts.mu1;
  const double mu2 = mode == Regularization::SpatialOnly ? 0.0 : opts.mu2;

  const Matrix R = initial_basis(B_hat);
  const double zero_cut = kNumericalZero * B_hat.norm();

  DecompositionState state;
  state.G = R.leftCols(q);
  Matrix previous = (B_hat * state.G) * state.G.transpose();

  for (int iter = 1; iter <= opts.max_iter; ++iter) {
    if (mode == Regularization::TemporalOnly) {
      state.A = B_hat * state.G;
    } else {
      state.A = update_A(B_hat, state.G, mu1, ZeroColumnPolicy::ZeroFill);
    }
    for (Eigen::Index j = 0; j < q; ++j) {
      if (state.A.col(j).norm() <= zero_cut) state.A.col(j).setZero();
    }

    Matrix G_raw = mode == Regularization::SpatialOnly
                       ? Matrix(B_hat.transpose() * state.A)
                       : update_G(B_hat, state.A, *penalty, mu2, ZeroColumnPolicy::ZeroFill);
    Matrix G_next = orthonormalize(complete_basis(G_raw, state.G, R));
    // B_i = A G^T pairs the A fitted to the previous G with the new G, so
    // each column keeps the orientation of its predecessor.
    for (Eigen::Index j = 0; j < q; ++j) {
      if (G_next.col(j).dot(state.G.col(j)) < 0.0) G_next.col(j) = -G_next.col(j);
    }
    state.G = std::move(G_next);

    Matrix current = state.A * state.G.transpose();
    const double obj = penalty != nullptr ? objective(B_hat, state.A, state.G, *penalty, mu1, mu2)
                                          : (B_hat - current).squaredNorm() + mu1 * state.A.cwiseAbs().sum();
    if (!std::isfinite(obj)) throw Error(ErrorCode::NonFinite, "objective diverged at iteration " + std::to_string(iter));

    const double diff = (current - previous).norm();
    const double scale = current.norm();
    const double rel = scale > 0.0 ? diff / scale : (diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());

    state.iterations_run = iter;
    state.objective_trace.push_back(obj);
    state.sparsity_trace.push_back(sparsity_level(current));
    state.relative_change_trace.push_back(rel);
    state.orthonormality_trace.push_back(max_orthonormality_error(state.G));

    if (rel <= opts.rel_tol) {
      state.converged = true;
      break;
    }
    previous = std::move(current);
  }
  return state;
}

DecompositionState twr_solve(const Matrix& B_hat, const PenaltyOperator& penalty, const SolverOptions& opts) {
  return solve(B_hat, &penalty, opts, Regularization::TwoWay);
}

DecompositionState towr_solve(const Matrix& B_hat, const PenaltyOperator& penalty, SolverOptions opts) {
  opts.mu1 = 0.0;
  return solve(B_hat, &penalty, opts, Regularization::TemporalOnly);
}

DecompositionState sowr_solve(const Matrix& B_hat, SolverOptions opts) {
  opts.mu2 = 0.0;
  return solve(B_hat, nullptr, opts, Regularization::SpatialOnly);
}

}  // namespace twr
