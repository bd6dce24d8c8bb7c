#pragma once

// Monte Carlo oracles shared by the unit tests and the acceptance binary.

#include <cstdint>

namespace regionboot::testing {

// Empirical P(X <= a, Y <= b) for a standard bivariate normal with correlation rho.
double mc_bivariate_cdf(double a, double b, double rho, std::int64_t n, std::uint64_t seed);

// Empirical P(|N(mu, I_df)|^2 <= x) with |mu|^2 = ncp.
double mc_noncentral_chisq_cdf(double x, int df, double ncp, std::int64_t n, std::uint64_t seed);

// Quadratic boundary surface in R^(m+1): H0' = {(u, v) : v <= -(curvature/m) |u|^2},
// observed at y = (0, ..., 0, v).
struct QuadraticSurface {
  int m = 20;
  double curvature = 1.0;
  double v = 0.0;
};

// Exact bootstrap probability of H0' at scale sigma2, by quadrature over the
// chi-square law of |U*|^2.
double quadratic_surface_bp(const QuadraticSurface& s, double sigma2);

struct JointCheck {
  double monte_carlo = 0.0;  // empirical P(Y* in H0', Y** in H0')
  double se = 0.0;
  double plain = 0.0;        // Phi_rho(z1, w1), rho = sigma / tau
  double corrected = 0.0;    // Phi_{rho + drho}(z1, w1)
  double drho = 0.0;
};

// z1 and w1 come from the exact bootstrap probabilities; the joint probability
// is simulated from `pairs` independent (Y*, Y**) draws.
JointCheck quadratic_surface_joint(const QuadraticSurface& s, double sigma2, double tau2,
                                   std::int64_t pairs, std::uint64_t seed);

}  // namespace regionboot::testing
