// Reference bivariate normal CDF by adaptive quadrature of the conditional
// decomposition. Slow; kept so the fast kernel has an independent check.

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "regionboot/dist.hpp"
#include "regionboot/error.hpp"

namespace regionboot::dist {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double integrate(double lo, double hi, double b, double rho, double scale) {
  if (!(hi > lo)) return 0.0;
  auto f = [&](double t) {
    return std_normal_pdf(t) * std_normal_cdf((b - rho * t) * scale);
  };
  using Rule = boost::math::quadrature::gauss_kronrod<double, 61>;
  return Rule::integrate(f, lo, hi, 20, 1e-14);
}

}  // namespace

double bivariate_normal_cdf_quadrature(double a, double b, double rho) {
  if (std::isnan(a) || std::isnan(b) || !(std::abs(rho) < 1.0)) {
    throw ConfigError("bivariate_normal_cdf_quadrature: need |rho| < 1");
  }
  if (a == -kInf || b == -kInf) return 0.0;
  if (a == kInf) return std_normal_cdf(b);
  if (b == kInf) return std_normal_cdf(a);
  // Integrate over the variable with the smaller upper limit; the integrand
  // mass is then concentrated on a shorter stretch.
  if (b < a) std::swap(a, b);
  const double scale = 1.0 / std::sqrt((1.0 - rho) * (1.0 + rho));

  // Truncate at -40: phi(t) is below 1e-300 there.
  const double lo = -40.0;
  const double hi = std::min(a, 40.0);
  if (hi <= lo) return 0.0;
  double total = 0.0;
  // The conditional factor jumps near t* = b / rho when |rho| is close to 1;
  // split there so the adaptive rule sees a smooth integrand on each piece.
  if (rho != 0.0) {
    const double kink = b / rho;
    if (kink > lo && kink < hi) {
      total += integrate(lo, kink, b, rho, scale);
      total += integrate(kink, hi, b, rho, scale);
      return std::clamp(total, 0.0, 1.0);
    }
  }
  total = integrate(lo, hi, b, rho, scale);
  return std::clamp(total, 0.0, 1.0);
}

}  // namespace regionboot::dist
