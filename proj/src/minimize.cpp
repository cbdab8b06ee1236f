#include "twr/minimize.hpp"

#include <cmath>

#include "twr/error.hpp"

namespace twr {

MinimizeResult brent_minimize(const std::function<double(double)>& f, double lo, double hi, double rel_tol,
                              double abs_tol, int max_evals) {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw Error(ErrorCode::InvalidArgument, "brent_minimize needs a finite interval lo < hi");
  }
  if (!(rel_tol > 0.0) || abs_tol < 0.0 || max_evals < 1) {
    throw Error(ErrorCode::InvalidArgument, "brent_minimize tolerances must be positive");
  }
  constexpr double kGolden = 0.3819660112501051;  // (3 - sqrt 5) / 2

  MinimizeResult out;
  auto eval = [&](double x) {
    const double fx = f(x);
    ++out.evaluations;
    out.samples.emplace_back(x, fx);
    return fx;
  };

  double a = lo, b = hi;
  double x = a + kGolden * (b - a);
  double w = x, v = x;
  double fx = eval(x);
  double fw = fx, fv = fx;
  double d = 0.0, e = 0.0;

  while (out.evaluations < max_evals) {
    const double xm = 0.5 * (a + b);
    const double tol1 = rel_tol * std::abs(x) + abs_tol;
    const double tol2 = 2.0 * tol1;
    if (std::abs(x - xm) <= tol2 - 0.5 * (b - a)) {
      out.converged = true;
      break;
    }

    bool golden = true;
    if (std::abs(e) > tol1) {
      // parabola through (v, fv), (w, fw), (x, fx)
      double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      const double e_prev = e;
      e = d;
      if (std::abs(p) < std::abs(0.5 * q * e_prev) && p > q * (a - x) && p < q * (b - x)) {
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = xm >= x ? tol1 : -tol1;
        golden = false;
      }
    }
    if (golden) {
      e = (x >= xm ? a : b) - x;
      d = kGolden * e;
    }

    const double u = std::abs(d) >= tol1 ? x + d : x + (d > 0.0 ? tol1 : -tol1);
    const double fu = eval(u);
    if (fu <= fx) {
      (u >= x ? a : b) = x;
      v = w, fv = fw;
      w = x, fw = fx;
      x = u, fx = fu;
    } else {
      (u < x ? a : b) = u;
      if (fu <= fw || w == x) {
        v = w, fv = fw;
        w = u, fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u, fv = fu;
      }
    }
  }
  out.x = x;
  out.fx = fx;
  return out;
}

}  // namespace twr
