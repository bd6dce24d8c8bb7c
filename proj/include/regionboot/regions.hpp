#pragma once

// Concrete hypothesis regions, their membership predicates, and the
// closed-form oracles available for the flat and spherical cases.
//
// A region partitions space into H0 (closed), H1 and, for three-region
// geometries, H2. Conventions per variant:
//   HalfSpace       H0: x_last <= offset           H1: x_last > offset
//   Slab            H0: -d <= x_last <= 0          H1: x_last > 0        H2: x_last < -d
//   SphericalShell  H0: a2 <= |x| <= a1            H1: |x| > a1          H2: |x| < a2
//   Cone2D          H0: |angle(x) - orientation| <= half_angle
//                   H1: beyond the edge at orientation - half_angle
//                   H2: beyond the edge at orientation + half_angle

#include <cstdint>
#include <span>
#include <string>
#include <variant>

#include <nlohmann/json.hpp>

namespace regionboot {

enum class Label : std::uint8_t { H0, H1, H2 };

// What a bootstrap replicate is counted against. H0Prime is H0 ∪ H2, the
// two-region view of a three-region geometry.
enum class Target : std::uint8_t { H0, H1, H2, H0Prime };

constexpr bool in_target(Label label, Target target) {
  switch (target) {
    case Target::H0: return label == Label::H0;
    case Target::H1: return label == Label::H1;
    case Target::H2: return label == Label::H2;
    case Target::H0Prime: return label != Label::H1;
  }
  return false;
}

std::string to_string(Label label);
std::string to_string(Target target);
Target target_from_string(const std::string& name);

struct HalfSpace {
  int m = 0;  // points live in R^(m+1)
  double offset = 0.0;
};

struct Slab {
  int m = 0;
  double d = 1.0;
};

struct SphericalShell {
  int m = 3;
  double a1 = 6.0;  // outer radius
  double a2 = 5.0;  // inner radius
};

struct Cone2D {
  double half_angle = 0.1 * 3.14159265358979323846;
  double orientation = 0.1 * 3.14159265358979323846;  // axis angle
};

using Region = std::variant<HalfSpace, Slab, SphericalShell, Cone2D>;

// Throws ConfigError if the region's parameters violate its invariants.
void validate(const Region& region);

std::size_t ambient_dim(const Region& region);

std::string region_kind(const Region& region);

// Throws ConfigError when point.size() != ambient_dim(region).
Label classify(const Region& region, std::span<const double> point);

// Per-variant classification without the dimension check, for hot loops.
Label classify_unchecked(const HalfSpace& r, const double* x, std::size_t n);
Label classify_unchecked(const Slab& r, const double* x, std::size_t n);
Label classify_unchecked(const SphericalShell& r, const double* x, std::size_t n);
Label classify_unchecked(const Cone2D& r, const double* x, std::size_t n);

/// P(Y* ∈ target | y) for Y* ~ N(y, sigma2 I). Closed forms exist for
/// HalfSpace, Slab and SphericalShell; Cone2D throws UnsupportedOracle.
double exact_bootstrap_prob(const Region& region, std::span<const double> y, double sigma2,
                            Target target = Target::H0);

/// Critical constant c with Phi(-c) + Phi(-d-c) = alpha.
double slab_critical_constant(double alpha, double d);

// Exact two-sided p-value for the slab -d <= mu_last <= 0.
double exact_p_slab(double y_last, double d);

struct ShellConstants {
  double c1;  // inner rejection region |y| < a2 - c1
  double c2;  // outer rejection region |y| > a1 + c2
  double residual;
  int sweeps;
};

/// Solves P(chi2(a_i^2) < (a2-c1)^2) + P(chi2(a_i^2) > (a1+c2)^2) = alpha for
/// i = 1, 2 by alternating one-dimensional solves. Throws NumericalError if
/// the residual does not fall below 1e-10.
ShellConstants shell_critical_constants(double alpha, double a1, double a2, int df);

/// Exact p-value for H0: a2 <= |mu| <= a1, the smallest alpha whose
/// rejection region contains |y|.
double exact_p_shell(double norm_y, double a1, double a2, int df);

enum class ShellSide { Inner, Outer };

// Outer: P(chi2_df(a^2) <= |y|^2), the p-value of |mu| >= a.
// Inner: P(chi2_df(a^2) >= |y|^2), the p-value of |mu| <= a.
double exact_one_sided_shell(double norm_y, double a, int df, ShellSide side);

nlohmann::json region_to_json(const Region& region);
Region region_from_json(const nlohmann::json& j);

}  // namespace regionboot
