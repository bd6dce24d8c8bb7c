#include "regionboot/regions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "regionboot/dist.hpp"
#include "regionboot/error.hpp"
#include "roots.hpp"

namespace regionboot {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

double squared_norm(std::span<const double> y) {
  double s = 0.0;
  for (double v : y) s += v * v;
  return s;
}

}  // namespace

std::string to_string(Label label) {
  switch (label) {
    case Label::H0: return "H0";
    case Label::H1: return "H1";
    case Label::H2: return "H2";
  }
  return "?";
}

std::string to_string(Target target) {
  switch (target) {
    case Target::H0: return "h0";
    case Target::H1: return "h1";
    case Target::H2: return "h2";
    case Target::H0Prime: return "h0p";
  }
  return "?";
}

Target target_from_string(const std::string& name) {
  if (name == "h0" || name == "H0") return Target::H0;
  if (name == "h1" || name == "H1") return Target::H1;
  if (name == "h2" || name == "H2") return Target::H2;
  if (name == "h0p" || name == "H0p" || name == "H0'") return Target::H0Prime;
  throw ConfigError("unknown target '" + name + "' (expected h0, h1, h2 or h0p)");
}

void validate(const Region& region) {
  std::visit(Overloaded{
                 [](const HalfSpace& r) {
                   if (r.m < 0) throw ConfigError("halfspace: m must be >= 0");
                   if (!std::isfinite(r.offset)) throw ConfigError("halfspace: offset must be finite");
                 },
                 [](const Slab& r) {
                   if (r.m < 0) throw ConfigError("slab: m must be >= 0");
                   if (!(r.d > 0.0) || !std::isfinite(r.d)) throw ConfigError("slab: d must be > 0");
                 },
                 [](const SphericalShell& r) {
                   if (r.m < 0) throw ConfigError("shell: m must be >= 0");
                   if (!(r.a2 > 0.0 && r.a1 > r.a2) || !std::isfinite(r.a1)) {
                     throw ConfigError("shell: need a1 > a2 > 0");
                   }
                 },
                 [](const Cone2D& r) {
                   if (!(r.half_angle > 0.0 && r.half_angle < std::numbers::pi / 2)) {
                     throw ConfigError("cone2d: half_angle must lie in (0, pi/2)");
                   }
                   if (!std::isfinite(r.orientation)) throw ConfigError("cone2d: orientation must be finite");
                 },
             },
             region);
}

std::size_t ambient_dim(const Region& region) {
  return std::visit(Overloaded{
                        [](const HalfSpace& r) { return static_cast<std::size_t>(r.m + 1); },
                        [](const Slab& r) { return static_cast<std::size_t>(r.m + 1); },
                        [](const SphericalShell& r) { return static_cast<std::size_t>(r.m + 1); },
                        [](const Cone2D&) { return std::size_t{2}; },
                    },
                    region);
}

std::string region_kind(const Region& region) {
  return std::visit(Overloaded{
                        [](const HalfSpace&) { return std::string("halfspace"); },
                        [](const Slab&) { return std::string("slab"); },
                        [](const SphericalShell&) { return std::string("shell"); },
                        [](const Cone2D&) { return std::string("cone2d"); },
                    },
                    region);
}

Label classify_unchecked(const HalfSpace& r, const double* x, std::size_t n) {
  return x[n - 1] <= r.offset ? Label::H0 : Label::H1;
}

Label classify_unchecked(const Slab& r, const double* x, std::size_t n) {
  const double v = x[n - 1];
  if (v > 0.0) return Label::H1;
  if (v < -r.d) return Label::H2;
  return Label::H0;
}

Label classify_unchecked(const SphericalShell& r, const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * x[i];
  if (s > r.a1 * r.a1) return Label::H1;
  if (s < r.a2 * r.a2) return Label::H2;
  return Label::H0;
}

Label classify_unchecked(const Cone2D& r, const double* x, std::size_t /*n*/) {
  // Cross products against the two edge directions; the cone is convex
  // (opening < pi), so H0 is the intersection of two half-planes.
  const double lo = r.orientation - r.half_angle;
  const double hi = r.orientation + r.half_angle;
  const double past_lo = std::cos(lo) * x[1] - std::sin(lo) * x[0];  // >= 0: ccw of lower edge
  const double before_hi = std::sin(hi) * x[0] - std::cos(hi) * x[1];  // >= 0: cw of upper edge
  if (past_lo >= 0.0 && before_hi >= 0.0) return Label::H0;
  if (past_lo < 0.0 && before_hi >= 0.0) return Label::H1;
  if (before_hi < 0.0 && past_lo >= 0.0) return Label::H2;
  // Behind the vertex: split along the reversed axis.
  const double side = std::cos(r.orientation) * x[1] - std::sin(r.orientation) * x[0];
  return side < 0.0 ? Label::H1 : Label::H2;
}

Label classify(const Region& region, std::span<const double> point) {
  const std::size_t n = ambient_dim(region);
  if (point.size() != n) {
    std::ostringstream msg;
    msg << "classify: point has dimension " << point.size() << ", region expects " << n;
    throw ConfigError(msg.str());
  }
  return std::visit([&](const auto& r) { return classify_unchecked(r, point.data(), n); }, region);
}

double exact_bootstrap_prob(const Region& region, std::span<const double> y, double sigma2,
                            Target target) {
  if (!(sigma2 > 0.0)) throw ConfigError("exact_bootstrap_prob: sigma2 must be > 0");
  if (y.size() != ambient_dim(region)) {
    throw ConfigError("exact_bootstrap_prob: dimension mismatch");
  }
  const double sigma = std::sqrt(sigma2);
  using dist::std_normal_cdf;

  // Probabilities of H0, H1, H2 in that order.
  struct Parts {
    double h0, h1, h2;
  };
  const Parts parts = std::visit(
      Overloaded{
          [&](const HalfSpace& r) -> Parts {
            const double v = y.back() - r.offset;
            return {std_normal_cdf(-v / sigma), std_normal_cdf(v / sigma), 0.0};
          },
          [&](const Slab& r) -> Parts {
            const double v = y.back();
            const double h1 = std_normal_cdf(v / sigma);
            const double h2 = std_normal_cdf(-(r.d + v) / sigma);
            return {std_normal_cdf(-v / sigma) - h2, h1, h2};
          },
          [&](const SphericalShell& r) -> Parts {
            const int df = r.m + 1;
            const double ncp = squared_norm(y) / sigma2;
            const double hi = r.a1 * r.a1 / sigma2;
            const double lo = r.a2 * r.a2 / sigma2;
            const double below_lo = dist::noncentral_chisq_cdf(lo, df, ncp);
            const double above_hi = dist::noncentral_chisq_sf(hi, df, ncp);
            return {1.0 - below_lo - above_hi, above_hi, below_lo};
          },
          [&](const Cone2D&) -> Parts {
            throw UnsupportedOracle("exact_bootstrap_prob: no closed form for cone2d");
          },
      },
      region);

  switch (target) {
    case Target::H0: return parts.h0;
    case Target::H1: return parts.h1;
    case Target::H2: return parts.h2;
    case Target::H0Prime: return parts.h0 + parts.h2;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double slab_critical_constant(double alpha, double d) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("slab_critical_constant: alpha in (0,1)");
  if (!(d > 0.0)) throw ConfigError("slab_critical_constant: d must be > 0");
  using dist::std_normal_cdf;
  // LHS is strictly decreasing in c; at c = -d/2 it equals 2 Phi(d/2) > 1,
  // and 2 Phi(-c) bounds it from above.
  auto f = [&](double c) { return std_normal_cdf(-c) + std_normal_cdf(-d - c) - alpha; };
  const double lo = -d / 2.0;
  const double hi = -dist::std_normal_quantile(alpha / 2.0) + 1.0;
  return detail::find_root(f, lo, hi, 1e-13 * alpha);
}

double exact_p_slab(double y_last, double d) {
  if (!(d > 0.0)) throw ConfigError("exact_p_slab: d must be > 0");
  using dist::std_normal_cdf;
  if (y_last >= -d / 2.0) return std_normal_cdf(-y_last) + std_normal_cdf(-d - y_last);
  return std_normal_cdf(y_last) + std_normal_cdf(d + y_last);
}

namespace {

struct ShellModel {
  double a1, a2;
  int df;

  // Rejection probability at |mu| = a for inner radius r_in = a2 - c1 and
  // outer radius r_out = a1 + c2.
  double rejection(double a, double c1, double c2) const {
    const double r_in = a2 - c1;
    const double r_out = a1 + c2;
    const double inner = r_in > 0.0 ? dist::noncentral_chisq_cdf(r_in * r_in, df, a * a) : 0.0;
    const double outer = r_out > 0.0 ? dist::noncentral_chisq_sf(r_out * r_out, df, a * a) : 1.0;
    return inner + outer;
  }
};

constexpr double kShellTol = 1e-10;

}  // namespace

ShellConstants shell_critical_constants(double alpha, double a1, double a2, int df) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("shell_critical_constants: alpha in (0,1)");
  if (!(a1 > a2 && a2 > 0.0)) throw ConfigError("shell_critical_constants: need a1 > a2 > 0");
  if (df <= 0) throw ConfigError("shell_critical_constants: df must be > 0");
  const ShellModel model{a1, a2, df};
  // c1 in [a2 - span, a2] (inner region from everything to empty),
  // c2 in [-a1, span] (outer region from everything to empty).
  const double span = a1 + 40.0;
  double c1 = 1.0;
  double c2 = 1.0;

  // The constraint at |mu| = a2 is driven mostly by the inner region and the
  // one at |mu| = a1 by the outer region, so solve each for its own constant.
  auto solve_c1 = [&](double fixed_c2) {
    auto f = [&](double c) { return model.rejection(a2, c, fixed_c2) - alpha; };
    if (f(a2) >= 0.0) return a2;  // outer region alone already exceeds alpha
    return detail::find_root(f, a2 - span, a2, 1e-14);
  };
  auto solve_c2 = [&](double fixed_c1) {
    auto f = [&](double c) { return model.rejection(a1, fixed_c1, c) - alpha; };
    if (f(span) >= 0.0) return span;
    if (f(-a1) <= 0.0) return -a1;
    return detail::find_root(f, -a1, span, 1e-14);
  };

  double residual = std::numeric_limits<double>::infinity();
  for (int sweep = 1; sweep <= 500; ++sweep) {
    c1 = solve_c1(c2);
    c2 = solve_c2(c1);
    residual = std::max(std::abs(model.rejection(a1, c1, c2) - alpha),
                        std::abs(model.rejection(a2, c1, c2) - alpha));
    if (residual < kShellTol) return {c1, c2, residual, sweep};
  }
  std::ostringstream msg;
  msg << "shell_critical_constants: alternating solve stalled at alpha=" << alpha
      << " (c1=" << c1 << ", c2=" << c2 << ", residual=" << residual << ")";
  throw NumericalError(msg.str());
}

double exact_p_shell(double norm_y, double a1, double a2, int df) {
  if (!(a1 > a2 && a2 > 0.0)) throw ConfigError("exact_p_shell: need a1 > a2 > 0");
  if (!(norm_y >= 0.0)) throw ConfigError("exact_p_shell: norm_y must be >= 0");

  // Signed distance of |y| into the rejection region at level alpha; positive
  // once y is rejected. Both regions grow with alpha.
  auto depth = [&](double alpha) {
    const ShellConstants c = shell_critical_constants(alpha, a1, a2, df);
    const double inner = (a2 - c.c1) - norm_y;
    const double outer = norm_y - (a1 + c.c2);
    return std::max(inner, outer);
  };

  // The p-value is the infimum alpha with depth >= 0. Step up in alpha to
  // the first sign change, then refine. Near alpha = 1 the alternating solve
  // can become ill-posed; a failed step is retried with half the step size.
  constexpr double kAlphaTol = 1e-8;
  double prev_alpha = 1e-9;
  if (depth(prev_alpha) >= 0.0) return prev_alpha;
  double step = 0.1;
  while (step > 1e-4) {
    const double alpha = std::min(prev_alpha + step, 1.0 - 1e-9);
    double current = 0.0;
    try {
      current = depth(alpha);
    } catch (const NumericalError&) {
      step /= 2.0;
      continue;
    }
    if (current >= 0.0) {
      return detail::find_root(depth, prev_alpha, alpha, 1e-10, kAlphaTol);
    }
    if (alpha >= 1.0 - 1e-9) break;
    prev_alpha = alpha;
  }
  return 1.0;
}

double exact_one_sided_shell(double norm_y, double a, int df, ShellSide side) {
  if (!(a > 0.0)) throw ConfigError("exact_one_sided_shell: a must be > 0");
  const double x = norm_y * norm_y;
  return side == ShellSide::Outer ? dist::noncentral_chisq_cdf(x, df, a * a)
                                  : dist::noncentral_chisq_sf(x, df, a * a);
}

nlohmann::json region_to_json(const Region& region) {
  return std::visit(
      Overloaded{
          [](const HalfSpace& r) {
            return nlohmann::json{{"kind", "halfspace"}, {"m", r.m}, {"offset", r.offset}};
          },
          [](const Slab& r) { return nlohmann::json{{"kind", "slab"}, {"m", r.m}, {"d", r.d}}; },
          [](const SphericalShell& r) {
            return nlohmann::json{{"kind", "shell"}, {"m", r.m}, {"a1", r.a1}, {"a2", r.a2}};
          },
          [](const Cone2D& r) {
            return nlohmann::json{{"kind", "cone2d"},
                                  {"half_angle", r.half_angle},
                                  {"orientation", r.orientation}};
          },
      },
      region);
}

Region region_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind")) {
    throw ConfigError("region JSON must be an object with a \"kind\" field");
  }
  Region region;
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "halfspace") {
      region = HalfSpace{j.value("m", 0), j.value("offset", 0.0)};
    } else if (kind == "slab") {
      region = Slab{j.value("m", 0), j.at("d").get<double>()};
    } else if (kind == "shell") {
      region = SphericalShell{j.value("m", 3), j.at("a1").get<double>(), j.at("a2").get<double>()};
    } else if (kind == "cone2d") {
      double half = 0.0;
      if (j.contains("half_angle")) {
        half = j.at("half_angle").get<double>();
      } else if (j.contains("angle")) {
        half = j.at("angle").get<double>() / 2.0;  // full opening at the vertex
      } else {
        throw ConfigError("cone2d needs \"half_angle\" or \"angle\"");
      }
      // Default orientation puts one edge on the positive x-axis.
      region = Cone2D{half, j.value("orientation", half)};
    } else {
      throw ConfigError("unknown region kind '" + kind + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("region JSON: ") + e.what());
  }
  validate(region);
  return region;
}

}  // namespace regionboot
