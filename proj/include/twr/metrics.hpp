#pragma once

#include <map>

#include "json.hpp"
#include "twr/model_io.hpp"

namespace twr {

struct EvaluationReport {
  double mse = 0.0;
  std::map<std::size_t, double> peak_distances;  // time index -> d_k
  double sparsity = 0.0;
  double runtime_s = 0.0;
};

/// (1/p) ||B_true - B_est||_F^2
double mse(const Matrix& B_true, const Matrix& B_est);

/// Per-dipole amplitude sqrt(bx^2 + by^2 + bz^2) at time index k.
Vector energy(const Matrix& B, const DipoleGeometry& geometry, Eigen::Index k);

/// n_dipoles x s table of energy(B, geometry, k) for every k.
Matrix energy_table(const Matrix& B, const DipoleGeometry& geometry);

/// Index of the highest-energy dipole at time k (lowest index on ties).
std::size_t peak_dipole(const Matrix& B, const DipoleGeometry& geometry, Eigen::Index k);

/// Euclidean distance between the truth and estimate peak dipoles at time k,
/// divided by the number of dipoles.
double peak_distance(const Matrix& B_true, const Matrix& B_est, const DipoleGeometry& geometry, Eigen::Index k);

/// Fraction of entries with |b| <= zero_tol.
double sparsity_level(const Matrix& B, double zero_tol = 0.0);

EvaluationReport evaluate(const Matrix& B_true, const Matrix& B_est, const DipoleGeometry& geometry,
                          const std::vector<Eigen::Index>& peak_times, double zero_tol = 0.0, double runtime_s = 0.0);

void to_json(nlohmann::json& j, const EvaluationReport& r);

}  // namespace twr
