#pragma once

#include <functional>
#include <utility>
#include <vector>

namespace twr {

struct MinimizeResult {
  double x = 0.0;
  double fx = 0.0;
  int evaluations = 0;
  bool converged = false;
  std::vector<std::pair<double, double>> samples;  // every (x, f(x)) evaluated
};

/// Golden-section search with successive parabolic interpolation (Brent)
/// on [lo, hi]. Stops once the bracket half-width around the current best
/// point is below rel_tol * |x| + abs_tol, or after max_evals evaluations.
MinimizeResult brent_minimize(const std::function<double(double)>& f, double lo, double hi, double rel_tol,
                              double abs_tol = 1e-10, int max_evals = 100);

}  // namespace twr
