#include "support.hpp"

#include <cmath>
#include <limits>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "regionboot/dist.hpp"
#include "regionboot/rng.hpp"
#include "regionboot/scaling.hpp"

namespace regionboot::testing {

double mc_bivariate_cdf(double a, double b, double rho, std::int64_t n, std::uint64_t seed) {
  const double c = std::sqrt(1.0 - rho * rho);
  std::int64_t hits = 0;
#pragma omp parallel for reduction(+ : hits)
  for (std::int64_t i = 0; i < n; ++i) {
    rng::NormalStream z(seed, 0, static_cast<std::uint64_t>(i));
    const double x = z.next();
    const double y = rho * x + c * z.next();
    hits += (x <= a && y <= b);
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

double mc_noncentral_chisq_cdf(double x, int df, double ncp, std::int64_t n, std::uint64_t seed) {
  const double shift = std::sqrt(ncp);
  std::int64_t hits = 0;
#pragma omp parallel for reduction(+ : hits)
  for (std::int64_t i = 0; i < n; ++i) {
    rng::NormalStream z(seed, 1, static_cast<std::uint64_t>(i));
    double s = 0.0;
    for (int k = 0; k < df; ++k) {
      const double v = z.next() + (k == 0 ? shift : 0.0);
      s += v * v;
    }
    hits += (s <= x);
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

double quadratic_surface_bp(const QuadraticSurface& s, double sigma2) {
  const double sigma = std::sqrt(sigma2);
  const boost::math::chi_squared_distribution<double> chi(s.m);
  const double k = s.curvature / s.m * sigma2;
  auto integrand = [&](double x) {
    return boost::math::pdf(chi, x) * dist::std_normal_cdf((-s.v - k * x) / sigma);
  };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      integrand, 0.0, std::numeric_limits<double>::infinity(), 15, 1e-13);
}

JointCheck quadratic_surface_joint(const QuadraticSurface& s, double sigma2, double tau2,
                                   std::int64_t pairs, std::uint64_t seed) {
  const double sigma = std::sqrt(sigma2);
  const double tau = std::sqrt(tau2);
  const double extra = std::sqrt(tau2 - sigma2);
  const double k = s.curvature / s.m;
  const int m = s.m;

  std::int64_t both = 0;
#pragma omp parallel for reduction(+ : both)
  for (std::int64_t i = 0; i < pairs; ++i) {
    rng::NormalStream z(seed, 2, static_cast<std::uint64_t>(i));
    double u1 = 0.0, u2 = 0.0;
    for (int j = 0; j < m; ++j) {
      const double a = sigma * z.next();
      const double b = a + extra * z.next();
      u1 += a * a;
      u2 += b * b;
    }
    const double v1 = s.v + sigma * z.next();
    const double v2 = v1 + extra * z.next();
    both += (v1 <= -k * u1 && v2 <= -k * u2);
  }

  JointCheck out;
  const double n = static_cast<double>(pairs);
  out.monte_carlo = static_cast<double>(both) / n;
  out.se = std::sqrt(out.monte_carlo * (1.0 - out.monte_carlo) / n);
  const double z1 = dist::std_normal_quantile(quadratic_surface_bp(s, sigma2));
  const double w1 = dist::std_normal_quantile(quadratic_surface_bp(s, tau2));
  const double rho = sigma / tau;
  out.drho = delta_rho(RhoCorrection{0.0, s.curvature, static_cast<double>(m)}, sigma, tau);
  out.plain = dist::bivariate_normal_cdf(z1, w1, rho);
  out.corrected = dist::bivariate_normal_cdf(z1, w1, dist::clamp_correlation(rho + out.drho));
  return out;
}

}  // namespace regionboot::testing
