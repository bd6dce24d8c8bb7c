#pragma once

#include <functional>
#include <span>
#include <vector>

namespace regionboot {

struct NelderMeadOptions {
  double initial_step = 0.5;
  // Stop once max - min over the simplex falls below f_tol or the simplex
  // diameter below x_tol.
  double f_tol = 1e-9;
  double x_tol = 1e-7;
  int max_evals = 4000;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  int evals = 0;
  bool converged = false;
};

/// Minimizes f with the adaptive-coefficient simplex method (Gao and Han,
/// 2012). Non-finite values are treated as +infinity, so infeasible points
/// are simply never accepted.
NelderMeadResult nelder_mead_minimize(const std::function<double(std::span<const double>)>& f,
                                      std::vector<double> x0, const NelderMeadOptions& options = {});

}  // namespace regionboot
