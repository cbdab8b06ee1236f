#include "twr/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "twr/minimize.hpp"
#include "twr/stage1.hpp"

namespace twr {

namespace {

Matrix take_rows(const Matrix& m, const std::vector<Eigen::Index>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

std::vector<Eigen::Index> complement(Eigen::Index n, const std::vector<Eigen::Index>& rows) {
  std::vector<bool> held(static_cast<std::size_t>(n), false);
  for (auto r : rows) held[static_cast<std::size_t>(r)] = true;
  std::vector<Eigen::Index> out;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!held[static_cast<std::size_t>(i)]) out.push_back(i);
  }
  return out;
}

// Per-component GCV numerator and denominator for one refit column.
struct GcvTerm {
  double numerator;
  double denominator;
};

GcvTerm gcv_term(GcvTrace trace, const Vector& coeffs, double a_norm2, double mu2, const Vector& lambda,
                 const Matrix& A, Eigen::Index j) {
  const auto s = static_cast<double>(lambda.size());
  switch (trace) {
    case GcvTrace::Normalized: {
      // With x_l = mu2 lambda_l / |a|^2, 1 - 1/(1 + x_l) = x_l / (1 + x_l);
      // both terms are formed without cancellation.
      double num = 0.0, df_gap = 0.0;
      for (Eigen::Index l = 0; l < lambda.size(); ++l) {
        const double x = mu2 * lambda(l) / a_norm2;
        const double shrink = x / (1.0 + x);
        const double resid = coeffs(l) / a_norm2 * shrink;
        num += resid * resid;
        df_gap += shrink;
      }
      const double gap = df_gap / s;
      return {num, gap * gap};
    }
    case GcvTrace::HatMatrix:
    case GcvTrace::PerEntry: {
      double num = 0.0;
      for (Eigen::Index l = 0; l < lambda.size(); ++l) {
        const double resid = coeffs(l) * (1.0 - 1.0 / (a_norm2 + mu2 * lambda(l)));
        num += resid * resid;
      }
      double tr = 0.0;
      if (trace == GcvTrace::HatMatrix) {
        tr = hat_trace(a_norm2, mu2, lambda);
      } else {
        const auto m = std::min(A.rows(), lambda.size());
        for (Eigen::Index l = 0; l < m; ++l) tr += 1.0 / (A(l, j) * A(l, j) + mu2 * lambda(l));
      }
      const double gap = 1.0 - tr / s;
      return {num, gap > 0.0 ? gap * gap : -1.0};
    }
  }
  return {0.0, -1.0};
}

// Refits the G columns at mu2 and calls visit(j, coeffs, a_norm2) for each
// nonzero column of A; coeffs = P^T B_res^T a_j.
template <typename Visit>
void refit_columns(const Matrix& B_hat, const Matrix& A, const PenaltyOperator& penalty, double mu2, Visit visit) {
  const Matrix BtA = B_hat.transpose() * A;
  const Matrix AtA = A.transpose() * A;
  const Matrix& P = penalty.P();
  const Vector& lambda = penalty.lambda();
  Matrix G = Matrix::Zero(B_hat.cols(), A.cols());
  for (Eigen::Index j = 0; j < A.cols(); ++j) {
    const double a_norm2 = AtA(j, j);
    if (a_norm2 == 0.0) continue;
    Vector z = BtA.col(j);
    if (j > 0) z.noalias() -= G.leftCols(j) * AtA.col(j).head(j);
    const Vector coeffs = P.transpose() * z;
    Vector g_coeffs = coeffs;
    g_coeffs.array() /= a_norm2 + mu2 * lambda.array();
    G.col(j).noalias() = P * g_coeffs;
    visit(j, coeffs, a_norm2);
  }
}

nlohmann::json samples_json(const std::vector<std::pair<double, double>>& samples) {
  auto arr = nlohmann::json::array();
  for (const auto& [x, f] : samples) arr.push_back({x, std::isfinite(f) ? nlohmann::json(f) : nlohmann::json(nullptr)});
  return arr;
}

nlohmann::json matrix_json(const Matrix& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

std::vector<double> CvSpec::default_mu1_grid() {
  std::vector<double> grid(10);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = static_cast<double>(i) / 9.0;
  return grid;
}

void CvSpec::validate(Eigen::Index n_rows) const {
  if (K < 2) throw Error(ErrorCode::InvalidArgument, "K must be >= 2");
  if (K > n_rows) {
    throw Error(ErrorCode::FoldTooSmall, "K = " + std::to_string(K) + " exceeds the " + std::to_string(n_rows) +
                                             " available rows");
  }
  if (mu1_grid.empty()) throw Error(ErrorCode::InvalidArgument, "mu1 grid is empty");
  for (std::size_t i = 0; i < mu1_grid.size(); ++i) {
    if (!(mu1_grid[i] >= 0.0) || !std::isfinite(mu1_grid[i])) {
      throw Error(ErrorCode::InvalidArgument, "mu1 grid values must be finite and >= 0");
    }
    if (i > 0 && !(mu1_grid[i] > mu1_grid[i - 1])) {
      throw Error(ErrorCode::InvalidArgument, "mu1 grid must be strictly increasing");
    }
  }
}

void GcvSpec::validate() const {
  if (!(mu2_lo >= 0.0) || !(mu2_hi > mu2_lo) || !std::isfinite(mu2_hi)) {
    throw Error(ErrorCode::InvalidArgument, "GCV interval must satisfy 0 <= mu2_lo < mu2_hi");
  }
  if (!(tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "GCV tol must be > 0");
  if (scan_points < 3) throw Error(ErrorCode::InvalidArgument, "GCV scan needs at least 3 points");
  if (max_evals <= scan_points) throw Error(ErrorCode::InvalidArgument, "max_evals must exceed scan_points");
}

std::vector<std::vector<Eigen::Index>> make_folds(Eigen::Index n, int K, std::uint64_t seed) {
  if (K < 1) throw Error(ErrorCode::InvalidArgument, "K must be positive");
  if (K > n) throw Error(ErrorCode::FoldTooSmall, "more folds than rows");
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  std::vector<std::vector<Eigen::Index>> folds(static_cast<std::size_t>(K));
  const auto base = n / K;
  const auto extra = n % K;
  std::size_t pos = 0;
  for (Eigen::Index k = 0; k < K; ++k) {
    const auto size = static_cast<std::size_t>(base + (k < extra ? 1 : 0));
    auto& fold = folds[static_cast<std::size_t>(k)];
    fold.assign(perm.begin() + static_cast<std::ptrdiff_t>(pos), perm.begin() + static_cast<std::ptrdiff_t>(pos + size));
    std::sort(fold.begin(), fold.end());
    pos += size;
  }
  return folds;
}

CvResult kfold_cv_mu1(const Matrix& X, const Matrix& Y, const CvSpec& spec, double mu2, const SolverOptions& opts,
                      const PenaltyOperator& penalty, Regularization mode) {
  if (X.rows() != Y.rows()) throw Error(ErrorCode::DimensionMismatch, "X and Y row counts differ");
  spec.validate(X.rows());
  const auto folds = make_folds(X.rows(), spec.K, spec.fold_seed);
  const auto n_grid = static_cast<Eigen::Index>(spec.mu1_grid.size());

  CvResult result;
  result.cells = Matrix::Zero(spec.K, n_grid);
  for (int k = 0; k < spec.K; ++k) {
    const auto& held = folds[static_cast<std::size_t>(k)];
    if (held.empty()) throw Error(ErrorCode::FoldTooSmall, "fold " + std::to_string(k) + " is empty");
    const auto kept = complement(X.rows(), held);
    const Matrix X_test = take_rows(X, held);
    const Matrix Y_test = take_rows(Y, held);
    const RawEstimate raw = raw_estimate(take_rows(X, kept), take_rows(Y, kept));

    for (Eigen::Index g = 0; g < n_grid; ++g) {
      SolverOptions o = opts;
      o.mu1 = spec.mu1_grid[static_cast<std::size_t>(g)];
      o.mu2 = mu2;
      try {
        const auto state = solve(raw.B_hat, &penalty, o, mode);
        result.cells(k, g) = (Y_test - X_test * state.reconstruction()).squaredNorm();
      } catch (const Error& e) {
        throw Error(e.code(), std::string(e.what()) + " [fold " + std::to_string(k) + ", grid index " +
                                  std::to_string(g) + "]");
      }
    }
  }

  result.scores.resize(static_cast<std::size_t>(n_grid));
  for (Eigen::Index g = 0; g < n_grid; ++g) result.scores[static_cast<std::size_t>(g)] = result.cells.col(g).mean();
  // strict < keeps the first (smallest) mu1 among ties
  for (std::size_t g = 1; g < result.scores.size(); ++g) {
    if (result.scores[g] < result.scores[result.best_index]) result.best_index = g;
  }
  result.mu1_star = spec.mu1_grid[result.best_index];
  return result;
}

CvResult kfold_cv_mu1(const ProblemInstance& instance, const CvSpec& spec, double mu2, const SolverOptions& opts) {
  const auto penalty = second_diff_penalty(instance.n_timepoints());
  return kfold_cv_mu1(instance.X, instance.Y, spec, mu2, opts, penalty, Regularization::TwoWay);
}

double hat_trace(double a_norm2, double mu2, const Vector& lambda) {
  return (1.0 / (a_norm2 + mu2 * lambda.array())).sum();
}

GcvEvaluation gcv_score(const Matrix& B_hat, const Matrix& A, const PenaltyOperator& penalty, double mu2,
                        GcvTrace trace, const std::vector<bool>& skip) {
  if (A.rows() != B_hat.rows() || penalty.size() != B_hat.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "GCV: A, B_hat and penalty shapes are inconsistent");
  }
  if (!skip.empty() && static_cast<Eigen::Index>(skip.size()) != A.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "GCV: skip mask length must equal the rank");
  }
  GcvEvaluation out;
  double sum = 0.0;
  refit_columns(B_hat, A, penalty, mu2, [&](Eigen::Index j, const Vector& coeffs, double a_norm2) {
    if (!skip.empty() && skip[static_cast<std::size_t>(j)]) return;
    const auto term = gcv_term(trace, coeffs, a_norm2, mu2, penalty.lambda(), A, j);
    if (!(term.denominator > 0.0) || !std::isfinite(term.denominator)) return;
    sum += term.numerator / term.denominator;
    ++out.components_used;
  });
  out.value = out.components_used > 0 ? sum / out.components_used : std::numeric_limits<double>::quiet_NaN();
  return out;
}

GcvResult gcv_mu2(const Matrix& B_hat, const Matrix& A, const PenaltyOperator& penalty, const GcvSpec& spec) {
  spec.validate();
  GcvResult result;

  // log-space search needs a positive lower bound
  const double lo = spec.mu2_lo > 0.0 ? spec.mu2_lo : spec.mu2_hi * 1e-12;
  const double hi = spec.mu2_hi;

  // Components whose denominator is not positive at the low end (where the
  // trace is largest) are excluded for the whole search.
  std::vector<bool> skip(static_cast<std::size_t>(A.cols()), true);
  int active = 0;
  refit_columns(B_hat, A, penalty, lo, [&](Eigen::Index j, const Vector& coeffs, double a_norm2) {
    const auto term = gcv_term(spec.trace, coeffs, a_norm2, lo, penalty.lambda(), A, j);
    if (term.denominator > 0.0 && std::isfinite(term.denominator)) {
      skip[static_cast<std::size_t>(j)] = false;
      ++active;
    } else {
      ++result.skipped_components;
    }
  });
  if (result.skipped_components > 0) {
    result.warnings.push_back(std::to_string(result.skipped_components) +
                              " component(s) skipped: GCV denominator not positive");
  }
  if (active == 0) throw Error(ErrorCode::NoValidComponent, "no component of A is usable for GCV");

  auto f = [&](double log_mu2) {
    const double v = gcv_score(B_hat, A, penalty, std::pow(10.0, log_mu2), spec.trace, skip).value;
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  const double t_lo = std::log10(lo);
  const double t_hi = std::log10(hi);
  std::vector<std::pair<double, double>> scan;
  for (int i = 0; i < spec.scan_points; ++i) {
    const double t = t_lo + (t_hi - t_lo) * i / (spec.scan_points - 1);
    scan.emplace_back(t, f(t));
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < scan.size(); ++i) {
    if (scan[i].second < scan[best].second) best = i;
  }

  int local_minima = 0;
  for (std::size_t i = 0; i < scan.size(); ++i) {
    const bool left = i == 0 || scan[i].second < scan[i - 1].second;
    const bool right = i + 1 == scan.size() || scan[i].second < scan[i + 1].second;
    if (left && right) ++local_minima;
  }
  if (local_minima > 1) result.warnings.push_back("NonUnimodal: GCV scan has " + std::to_string(local_minima) + " local minima");
  if (best == 0 || best + 1 == scan.size()) result.warnings.push_back("GCV minimum lies on the search boundary");

  std::vector<std::pair<double, double>> all = scan;
  double best_t = scan[best].first;
  double best_f = scan[best].second;
  if (std::isfinite(best_f)) {
    const double a = scan[best == 0 ? 0 : best - 1].first;
    const double b = scan[std::min(best + 1, scan.size() - 1)].first;
    // abs tolerance in log10 units equals a relative tolerance on mu2
    const auto refined = brent_minimize(f, a, b, 1e-12, spec.tol / std::log(10.0), spec.max_evals - spec.scan_points);
    all.insert(all.end(), refined.samples.begin(), refined.samples.end());
    if (refined.fx < best_f) {
      best_t = refined.x;
      best_f = refined.fx;
    }
  } else {
    throw Error(ErrorCode::NoValidComponent, "GCV is undefined over the whole search interval");
  }

  std::sort(all.begin(), all.end());
  for (const auto& [t, v] : all) result.samples.emplace_back(std::pow(10.0, t), v);
  result.mu2_star = std::pow(10.0, best_t);
  result.gcv_star = best_f;
  return result;
}

TuneResult auto_tune(const ProblemInstance& instance, const CvSpec& cv_spec, const GcvSpec& gcv_spec,
                     const SolverOptions& opts, int passes, Regularization mode) {
  if (passes < 1) throw Error(ErrorCode::InvalidArgument, "auto_tune needs at least one pass");
  cv_spec.validate(instance.n_sensors());
  gcv_spec.validate();
  opts.validate(instance.n_timepoints());

  const auto penalty = second_diff_penalty(instance.n_timepoints());
  const RawEstimate raw = raw_estimate(instance.X, instance.Y);

  TuneResult result;
  double mu1 = mode == Regularization::TemporalOnly ? 0.0 : cv_spec.mu1_grid[cv_spec.mu1_grid.size() / 2];
  double mu2 = mode == Regularization::SpatialOnly ? 0.0 : 1.0;

  auto pass_log = nlohmann::json::array();
  std::vector<std::string> warnings;
  for (int pass = 0; pass < passes; ++pass) {
    nlohmann::json entry = {{"pass", pass}};
    if (mode != Regularization::SpatialOnly) {
      SolverOptions o = opts;
      o.mu1 = mu1;
      o.mu2 = mu2;
      const auto state = solve(raw.B_hat, &penalty, o, mode);
      result.gcv = gcv_mu2(raw.B_hat, state.A, penalty, gcv_spec);
      mu2 = result.gcv.mu2_star;
      for (const auto& w : result.gcv.warnings) warnings.push_back("pass " + std::to_string(pass) + ": " + w);
      entry["mu2"] = mu2;
    }
    if (mode != Regularization::TemporalOnly) {
      result.cv = kfold_cv_mu1(instance.X, instance.Y, cv_spec, mu2, opts, penalty, mode);
      mu1 = result.cv.mu1_star;
      entry["mu1"] = mu1;
      entry["cv_scores"] = result.cv.scores;
    }
    pass_log.push_back(entry);
  }
  result.mu1_star = mu1;
  result.mu2_star = mu2;

  auto& r = result.report;
  r["mu1_grid"] = mode == Regularization::TemporalOnly ? std::vector<double>{} : cv_spec.mu1_grid;
  r["cv_scores"] = matrix_json(result.cv.cells);
  r["cv_mean_scores"] = result.cv.scores;
  r["mu1_star"] = mu1;
  r["gcv_samples"] = samples_json(result.gcv.samples);
  r["mu2_star"] = mu2;
  r["warnings"] = warnings;
  r["passes"] = pass_log;
  r["K"] = cv_spec.K;
  r["fold_seed"] = cv_spec.fold_seed;
  return result;
}

}  // namespace twr
