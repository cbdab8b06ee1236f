#include "twr/metrics.hpp"

#include <cmath>

namespace twr {

namespace {

void check_geometry(const Matrix& B, const DipoleGeometry& geometry) {
  if (static_cast<std::size_t>(B.rows()) != geometry.n_rows()) {
    throw Error(ErrorCode::DimensionMismatch, "source matrix has " + std::to_string(B.rows()) +
                                                  " rows, geometry expects " + std::to_string(geometry.n_rows()));
  }
}

void check_time(const Matrix& B, Eigen::Index k) {
  if (k < 0 || k >= B.cols()) {
    throw Error(ErrorCode::IndexOutOfRange, "time index " + std::to_string(k) + " outside [0, " +
                                                std::to_string(B.cols()) + ")");
  }
}

}  // namespace

double mse(const Matrix& B_true, const Matrix& B_est) {
  if (B_true.rows() != B_est.rows() || B_true.cols() != B_est.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "mse needs matrices of equal shape");
  }
  return (B_true - B_est).squaredNorm() / static_cast<double>(B_true.rows());
}

Vector energy(const Matrix& B, const DipoleGeometry& geometry, Eigen::Index k) {
  check_geometry(B, geometry);
  check_time(B, k);
  const auto n = static_cast<Eigen::Index>(geometry.n_dipoles());
  Vector e(n);
  for (Eigen::Index d = 0; d < n; ++d) e(d) = B.col(k).segment(3 * d, 3).norm();
  return e;
}

Matrix energy_table(const Matrix& B, const DipoleGeometry& geometry) {
  Matrix table(static_cast<Eigen::Index>(geometry.n_dipoles()), B.cols());
  for (Eigen::Index k = 0; k < B.cols(); ++k) table.col(k) = energy(B, geometry, k);
  return table;
}

std::size_t peak_dipole(const Matrix& B, const DipoleGeometry& geometry, Eigen::Index k) {
  const Vector e = energy(B, geometry, k);
  Eigen::Index best = 0;
  for (Eigen::Index d = 1; d < e.size(); ++d) {
    if (e(d) > e(best)) best = d;
  }
  if (e(best) == 0.0) throw Error(ErrorCode::NoEnergy, "all dipoles are silent at time " + std::to_string(k));
  return static_cast<std::size_t>(best);
}

double peak_distance(const Matrix& B_true, const Matrix& B_est, const DipoleGeometry& geometry, Eigen::Index k) {
  const auto& a = geometry.coord(peak_dipole(B_true, geometry, k));
  const auto& b = geometry.coord(peak_dipole(B_est, geometry, k));
  const double dist = std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) +
                                (a[2] - b[2]) * (a[2] - b[2]));
  return dist / static_cast<double>(geometry.n_dipoles());
}

double sparsity_level(const Matrix& B, double zero_tol) {
  if (!(zero_tol >= 0.0)) throw Error(ErrorCode::InvalidArgument, "zero_tol must be >= 0");
  if (B.size() == 0) return 1.0;
  return static_cast<double>((B.array().abs() <= zero_tol).count()) / static_cast<double>(B.size());
}

EvaluationReport evaluate(const Matrix& B_true, const Matrix& B_est, const DipoleGeometry& geometry,
                          const std::vector<Eigen::Index>& peak_times, double zero_tol, double runtime_s) {
  EvaluationReport report;
  report.mse = mse(B_true, B_est);
  for (auto k : peak_times) {
    report.peak_distances[static_cast<std::size_t>(k)] = peak_distance(B_true, B_est, geometry, k);
  }
  report.sparsity = sparsity_level(B_est, zero_tol);
  report.runtime_s = runtime_s;
  return report;
}

void to_json(nlohmann::json& j, const EvaluationReport& r) {
  nlohmann::json d = nlohmann::json::object();
  for (const auto& [k, v] : r.peak_distances) d[std::to_string(k)] = v;
  j = {{"mse", r.mse}, {"peak_distances", d}, {"sparsity", r.sparsity}, {"runtime_s", r.runtime_s}};
}

}  // namespace twr
