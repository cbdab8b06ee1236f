#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "twr/model_io.hpp"
#include "twr/penalty.hpp"
#include "twr/solver.hpp"

namespace twr {

struct CvSpec {
  int K = 5;
  std::vector<double> mu1_grid = default_mu1_grid();
  std::uint64_t fold_seed = 0;

  /// 10 evenly spaced values in [0, 1].
  static std::vector<double> default_mu1_grid();
  void validate(Eigen::Index n_rows) const;
};

/// Which trace expression the GCV denominator uses.
enum class GcvTrace {
  /// Degrees of freedom of the smoother acting on the rescaled response
  /// B_res^T a / |a|^2: sum_l |a|^2 / (|a|^2 + mu2 lambda_l). Scale free.
  Normalized,
  /// Trace of P (|a|^2 I + mu2 Lambda)^{-1} P^T against the unscaled input.
  HatMatrix,
  /// Literal per-entry variant sum_l 1 / (a_lj^2 + mu2 lambda_l), l < min(p, s).
  PerEntry,
};

struct GcvSpec {
  double mu2_lo = 1e-6;
  double mu2_hi = 1e4;
  double tol = 1e-3;
  int max_evals = 100;
  int scan_points = 21;  // log-spaced samples taken before the Brent refinement
  GcvTrace trace = GcvTrace::Normalized;

  void validate() const;
};

/// Row-index partition into K near-equal folds from a seeded permutation.
std::vector<std::vector<Eigen::Index>> make_folds(Eigen::Index n, int K, std::uint64_t seed);

struct CvResult {
  double mu1_star = 0.0;
  std::size_t best_index = 0;
  std::vector<double> scores;  // mean over folds, one per grid value
  Matrix cells;                // K x |grid| held-out squared errors
};

/// K-fold CV over sensor rows: for each fold and grid value, refit the
/// raw estimate and the decomposition on the retained rows and score the
/// held-out rows. Ties go to the smaller mu1.
CvResult kfold_cv_mu1(const Matrix& X, const Matrix& Y, const CvSpec& spec, double mu2, const SolverOptions& opts,
                      const PenaltyOperator& penalty, Regularization mode = Regularization::TwoWay);
CvResult kfold_cv_mu1(const ProblemInstance& instance, const CvSpec& spec, double mu2, const SolverOptions& opts);

/// Closed-form trace of P (a_norm2 I + mu2 Lambda)^{-1} P^T.
double hat_trace(double a_norm2, double mu2, const Vector& lambda);

struct GcvEvaluation {
  double value = 0.0;
  int components_used = 0;
};

/// GCV(mu2) given A, with the G columns refit sequentially at this mu2.
/// `skip` marks components excluded from the average (may be empty).
GcvEvaluation gcv_score(const Matrix& B_hat, const Matrix& A, const PenaltyOperator& penalty, double mu2,
                        GcvTrace trace = GcvTrace::Normalized, const std::vector<bool>& skip = {});

struct GcvResult {
  double mu2_star = 0.0;
  double gcv_star = 0.0;
  std::vector<std::pair<double, double>> samples;  // (mu2, GCV), sorted by mu2
  std::vector<std::string> warnings;
  int skipped_components = 0;
};

/// Minimizes GCV over [mu2_lo, mu2_hi]: a log-spaced scan brackets the
/// minimum, then Brent's method refines it in log10(mu2).
GcvResult gcv_mu2(const Matrix& B_hat, const Matrix& A, const PenaltyOperator& penalty, const GcvSpec& spec);

struct TuneResult {
  double mu1_star = 0.0;
  double mu2_star = 0.0;
  CvResult cv;
  GcvResult gcv;
  nlohmann::json report;
};

/// Alternates GCV for mu2 (conditional on the current A) and K-fold CV for
/// mu1. TemporalOnly skips the CV step; SpatialOnly skips GCV.
TuneResult auto_tune(const ProblemInstance& instance, const CvSpec& cv_spec, const GcvSpec& gcv_spec,
                     const SolverOptions& opts, int passes = 2, Regularization mode = Regularization::TwoWay);

}  // namespace twr
