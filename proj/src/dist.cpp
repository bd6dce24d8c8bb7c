#include "regionboot/dist.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

#include "regionboot/error.hpp"

namespace regionboot::dist {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::atomic<std::uint64_t> g_clamp_events{0};

// Gauss-Legendre nodes (negative half) and weights for 6, 12 and 20 points.
struct GaussTable {
  int half;
  std::array<double, 10> x;
  std::array<double, 10> w;
};

constexpr GaussTable kGauss6{
    3,
    {-0.9324695142031521, -0.6612093864662645, -0.2386191860831969},
    {0.1713244923791697, 0.3607615730481389, 0.4679139345726914}};

constexpr GaussTable kGauss12{
    6,
    {-0.9815606342467192, -0.9041172563704748, -0.7699026741943047,
     -0.5873179542866175, -0.3678314989981802, -0.1252334085114689},
    {0.04717533638651202, 0.1069393259953189, 0.1600783285433461,
     0.2031674267230656, 0.2334925365383546, 0.2491470458134027}};

constexpr GaussTable kGauss20{
    10,
    {-0.9931285991850949, -0.9639719272779138, -0.9122344282513258,
     -0.8391169718222188, -0.7463319064601508, -0.636053680726515,
     -0.5108670019508271, -0.3737060887154195, -0.2277858511416451,
     -0.07652652113349734},
    {0.01761400713915327, 0.04060142980038622, 0.06267204833410944,
     0.08327674157670467, 0.1019301198172403, 0.1181945319615182,
     0.1316886384491765, 0.1420961093183819, 0.1491729864726037,
     0.1527533871307258}};

// Upper orthant P(X > h, Y > k) with correlation r (Genz, BVND).
double upper_orthant(double h, double k, double r) {
  const double abs_r = std::abs(r);
  const GaussTable& g = abs_r < 0.3 ? kGauss6 : (abs_r < 0.75 ? kGauss12 : kGauss20);
  double hk = h * k;
  double bvn = 0.0;

  if (abs_r < 0.925) {
    const double hs = (h * h + k * k) / 2.0;
    const double asr = std::asin(r);
    for (int i = 0; i < g.half; ++i) {
      double sn = std::sin(asr * (g.x[i] + 1.0) / 2.0);
      bvn += g.w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
      sn = std::sin(asr * (-g.x[i] + 1.0) / 2.0);
      bvn += g.w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
    }
    return bvn * asr / (2.0 * kTwoPi) + std_normal_cdf(-h) * std_normal_cdf(-k);
  }

  if (r < 0.0) {
    k = -k;
    hk = -hk;
  }
  if (abs_r < 1.0) {
    const double as = (1.0 - r) * (1.0 + r);
    double a = std::sqrt(as);
    const double bs = (h - k) * (h - k);
    const double c = (4.0 - hk) / 8.0;
    const double d = (12.0 - hk) / 16.0;
    bvn = a * std::exp(-(bs / as + hk) / 2.0) *
          (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
    if (hk > -160.0) {
      const double b = std::sqrt(bs);
      bvn -= std::exp(-hk / 2.0) * std::sqrt(kTwoPi) * std_normal_cdf(-b / a) * b *
             (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
    }
    a /= 2.0;
    for (int i = 0; i < g.half; ++i) {
      double xs = (a * (g.x[i] + 1.0)) * (a * (g.x[i] + 1.0));
      double rs = std::sqrt(1.0 - xs);
      bvn += a * g.w[i] *
             (std::exp(-bs / (2.0 * xs) - hk / (1.0 + rs)) / rs -
              std::exp(-(bs / xs + hk) / 2.0) * (1.0 + c * xs * (1.0 + d * xs)));
      xs = as * (-g.x[i] + 1.0) * (-g.x[i] + 1.0) / 4.0;
      rs = std::sqrt(1.0 - xs);
      bvn += a * g.w[i] * std::exp(-(bs / xs + hk) / 2.0) *
             (std::exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs -
              (1.0 + c * xs * (1.0 + d * xs)));
    }
    bvn = -bvn / kTwoPi;
  }
  if (r > 0.0) {
    bvn += std_normal_cdf(-std::max(h, k));
  } else {
    bvn = -bvn + std::max(0.0, std_normal_cdf(-h) - std_normal_cdf(-k));
  }
  return bvn;
}

}  // namespace

double std_normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(kTwoPi);
}

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw InvalidParameter("std_normal_quantile: p must lie in (0, 1)");
  }
  // erfc_inv keeps full relative accuracy in the lower tail; reflect the
  // upper half so both tails are handled there.
  if (p > 0.5) return -std_normal_quantile(1.0 - p);
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double clamp_correlation(double rho) {
  if (rho > kMaxAbsCorrelation) {
    g_clamp_events.fetch_add(1, std::memory_order_relaxed);
    return kMaxAbsCorrelation;
  }
  if (rho < -kMaxAbsCorrelation) {
    g_clamp_events.fetch_add(1, std::memory_order_relaxed);
    return -kMaxAbsCorrelation;
  }
  return rho;
}

std::uint64_t correlation_clamp_events() {
  return g_clamp_events.load(std::memory_order_relaxed);
}

double bivariate_normal_cdf(double a, double b, double rho) {
  if (std::isnan(a) || std::isnan(b) || !(std::abs(rho) <= 1.0)) {
    throw ConfigError("bivariate_normal_cdf: need finite-or-infinite bounds and |rho| <= 1");
  }
  if (a == -std::numeric_limits<double>::infinity() ||
      b == -std::numeric_limits<double>::infinity()) {
    return 0.0;
  }
  if (a == std::numeric_limits<double>::infinity()) return std_normal_cdf(b);
  if (b == std::numeric_limits<double>::infinity()) return std_normal_cdf(a);
  const double p = upper_orthant(-a, -b, rho);
  return std::clamp(p, 0.0, 1.0);
}

double bivariate_normal_pdf(double a, double b, double rho) {
  const double s = 1.0 / std::sqrt((1.0 - rho) * (1.0 + rho));
  return s * std_normal_pdf(s * (b - rho * a)) * std_normal_pdf(a);
}

double bivariate_rectangle_prob(const BivariateArgs& args) {
  double a1 = args.a1, a2 = args.a2, b1 = args.b1, b2 = args.b2, rho = args.rho;
  if (!(a2 <= a1) || !(b2 <= b1)) {
    throw OrderingError("bivariate_rectangle_prob: require a2 <= a1 and b2 <= b1");
  }
  if (a1 == a2 || b1 == b2) return 0.0;
  // Reflect each axis so the rectangle sits mostly on the negative side,
  // where the corner CDF values are small and the differences lose less.
  if (a1 + a2 > 0.0) {
    std::swap(a1, a2);
    a1 = -a1;
    a2 = -a2;
    rho = -rho;
  }
  if (b1 + b2 > 0.0) {
    std::swap(b1, b2);
    b1 = -b1;
    b2 = -b2;
    rho = -rho;
  }
  const double p = bivariate_normal_cdf(a1, b1, rho) - bivariate_normal_cdf(a2, b1, rho) -
                   bivariate_normal_cdf(a1, b2, rho) + bivariate_normal_cdf(a2, b2, rho);
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace regionboot::dist
