#pragma once

// Scalar and bivariate normal distribution functions and the noncentral
// chi-square CDF. Everything here is pure and safe to call concurrently.

#include <cstdint>

namespace regionboot::dist {

double std_normal_pdf(double z);

// Phi(z), absolute error below 1e-15 across the real line.
double std_normal_cdf(double z);

// Inverse of Phi. Throws ConfigError unless 0 < p < 1.
double std_normal_quantile(double p);

// Largest |rho| accepted by the bivariate routines.
inline constexpr double kMaxAbsCorrelation = 1.0 - 1e-9;

// Clamps rho into [-kMaxAbsCorrelation, kMaxAbsCorrelation]. Each clamp that
// actually fires bumps a process-wide counter readable below.
double clamp_correlation(double rho);
std::uint64_t correlation_clamp_events();

/// Phi_rho(a, b) = P(X' <= a, X'' <= b) for a standard bivariate normal with
/// correlation rho. Infinite arguments are allowed.
///
/// Uses Genz's Gauss-Legendre evaluation of the Drezner-Wesolowsky
/// integral (absolute error ~1e-15). The adaptive-quadrature version below
/// is the slow reference the tests compare against.
double bivariate_normal_cdf(double a, double b, double rho);

/// Same quantity by adaptive Gauss-Kronrod quadrature of
///   int_{-inf}^{a} phi(t) Phi((b - rho t) / sqrt(1 - rho^2)) dt.
double bivariate_normal_cdf_quadrature(double a, double b, double rho);

// Joint density phi_rho(a, b).
double bivariate_normal_pdf(double a, double b, double rho);

struct BivariateArgs {
  double a1;  // upper bound on X'
  double b1;  // upper bound on X''
  double a2;  // lower bound on X'
  double b2;  // lower bound on X''
  double rho;
};

/// P(a2 <= X' <= a1, b2 <= X'' <= b1) by four-term inclusion-exclusion,
/// clamped to [0, 1]. Throws OrderingError if a2 > a1 or b2 > b1.
double bivariate_rectangle_prob(const BivariateArgs& args);

double chisq_cdf(double x, double df);

/// P(chi2_df(ncp) <= x). Poisson mixture of central CDFs summed outward
/// from the Poisson mode; absolute error below 1e-12.
double noncentral_chisq_cdf(double x, int df, double ncp);

// Upper tail P(chi2_df(ncp) > x), summed directly rather than as 1 - cdf.
double noncentral_chisq_sf(double x, int df, double ncp);

}  // namespace regionboot::dist
