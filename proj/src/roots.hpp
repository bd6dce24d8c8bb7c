#pragma once

#include <cmath>
#include <utility>

#include "regionboot/error.hpp"

namespace regionboot::detail {

/// Root of a continuous f on [lo, hi] with f(lo), f(hi) of opposite sign.
/// Takes a secant step when it lands inside the bracket and halves the
/// bracket otherwise; every iteration keeps a sign change.
template <class F>
double find_root(F&& f, double lo, double hi, double f_tol, double x_tol = 1e-14,
                 int max_iter = 300) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0)) {
    throw NumericalError("find_root: bracket does not contain a sign change");
  }
  bool last_was_secant = false;
  for (int iter = 0; iter < max_iter; ++iter) {
    double x = 0.5 * (lo + hi);
    // Alternate secant and bisection so a stagnating secant endpoint cannot
    // stall convergence.
    if (!last_was_secant) {
      const double s = hi - fhi * (hi - lo) / (fhi - flo);
      if (s > lo && s < hi) {
        x = s;
        last_was_secant = true;
      }
    } else {
      last_was_secant = false;
    }
    const double fx = f(x);
    if (std::abs(fx) <= f_tol || (hi - lo) <= x_tol * (1.0 + std::abs(x))) return x;
    if ((fx > 0.0) == (flo > 0.0)) {
      lo = x;
      flo = fx;
    } else {
      hi = x;
      fhi = fx;
    }
  }
  throw NumericalError("find_root: no convergence");
}

}  // namespace regionboot::detail
