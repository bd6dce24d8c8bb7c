#include <cmath>

#include <boost/math/special_functions/gamma.hpp>

#include "regionboot/dist.hpp"
#include "regionboot/error.hpp"

namespace regionboot::dist {

namespace {

constexpr double kTermTol = 1e-14;
constexpr double kTailTol = 1e-12;
constexpr long kMaxTerms = 100000;

// Sums sum_j Pois(j; lambda) * central(j), walking down from the Poisson mode
// to 0 and then up until both the term and the remaining-mass bound are
// negligible. `decreasing_in_j` says whether central(j) shrinks with j (CDF)
// or grows (survival); it controls the upward tail bound.
template <class Central>
double poisson_mixture(double lambda, Central central, bool decreasing_in_j) {
  const long mode = static_cast<long>(std::floor(lambda));
  const double log_w_mode =
      -lambda + static_cast<double>(mode) * std::log(lambda) - std::lgamma(mode + 1.0);
  const double w_mode = std::exp(log_w_mode);

  double sum = 0.0;
  double mass = 0.0;

  // Downward: weights shrink geometrically below the mode.
  double w = w_mode;
  for (long j = mode - 1; j >= 0; --j) {
    w *= static_cast<double>(j + 1) / lambda;
    mass += w;
    sum += w * central(j);
    if (w < 1e-17 * (mass + w_mode)) break;
  }

  // Upward from the mode.
  w = w_mode;
  for (long j = mode; j < mode + kMaxTerms; ++j) {
    if (j > mode) w *= lambda / static_cast<double>(j);
    mass += w;
    const double c = central(j);
    const double term = w * c;
    sum += term;
    const double remaining = std::max(0.0, 1.0 - mass);
    const double tail_bound = decreasing_in_j ? remaining * c : remaining;
    if (j > mode && term < kTermTol && tail_bound < kTailTol) return sum;
  }
  throw NumericalError("noncentral chi-square series did not converge");
}

void check_args(double x, int df, double ncp) {
  if (std::isnan(x) || df <= 0 || !(ncp >= 0.0) || !std::isfinite(ncp)) {
    throw ConfigError("noncentral chi-square: need df > 0, ncp >= 0");
  }
}

}  // namespace

double chisq_cdf(double x, double df) {
  if (!(x > 0.0)) return 0.0;
  if (std::isinf(x)) return 1.0;
  return boost::math::gamma_p(df / 2.0, x / 2.0);
}

double noncentral_chisq_cdf(double x, int df, double ncp) {
  check_args(x, df, ncp);
  if (!(x > 0.0)) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (ncp == 0.0) return chisq_cdf(x, df);
  const double half_df = df / 2.0;
  const double half_x = x / 2.0;
  return poisson_mixture(
      ncp / 2.0,
      [&](long j) { return boost::math::gamma_p(half_df + static_cast<double>(j), half_x); },
      true);
}

double noncentral_chisq_sf(double x, int df, double ncp) {
  check_args(x, df, ncp);
  if (!(x > 0.0)) return 1.0;
  if (std::isinf(x)) return 0.0;
  const double half_df = df / 2.0;
  const double half_x = x / 2.0;
  if (ncp == 0.0) return boost::math::gamma_q(half_df, half_x);
  return poisson_mixture(
      ncp / 2.0,
      [&](long j) { return boost::math::gamma_q(half_df + static_cast<double>(j), half_x); },
      false);
}

}  // namespace regionboot::dist
