#pragma once

// Parametric scaling laws for bootstrap probabilities. A model maps a scale
// sigma2 to the marginal probability f(sigma2) of the counted event and a
// pair (sigma2, tau2) to the joint probability g of the two-step event.
//
//   two-region    f = Phi(-psi(s)/sigma)
//   three-region  f = 1 - Phi(-psi1(s)/sigma) - Phi(-psi2(s)/sigma)
//
// psi families:
//   poly<q>  psi(s) = b0 + b1 s + ... + bq s^q
//   sing     psi(s) = b0 + b1 s / (1 + b2 (sqrt(s) - 1))

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace regionboot {

enum class PsiKind { Poly, Singular };

inline constexpr int kMaxPsiDerivative = 6;

struct PsiFamily {
  PsiKind kind = PsiKind::Poly;
  std::vector<double> beta;  // poly: b0..bq, sing: b0, b1, b2

  static PsiFamily poly(std::vector<double> coefficients);
  static PsiFamily singular(double b0, double b1, double b2);

  // Throws InvalidParameter when sigma2 is outside the family's domain
  // (sing needs sigma2 > 0 and a positive denominator).
  double value(double sigma2) const;
};

/// d^order psi / d(sigma2)^order at sigma2, for order <= 6.
double psi_derivative(const PsiFamily& psi, int order, double at_sigma2);

/// Coefficients of the correlation correction; m is the effective dimension.
struct RhoCorrection {
  double A = 0.0;
  double B = 0.0;
  double m = 1.0;
};

// poly: A = 0, B = b1. sing: A = b1 b2 (3 - 2 b2), B = b1 (b2 - 1)^2.
RhoCorrection rho_correction(const PsiFamily& psi, double m);

/// -(1/2m) (A^2 rho (1-rho) + 2 B^2 rho (tau^2 - sigma^2) + 2 A B sigma (1 - rho^2)), rho = sigma/tau.
double delta_rho(const RhoCorrection& corr, double sigma, double tau);

enum class Shape { TwoRegion, ThreeSameDir, ThreeOppDir };

/// A named model template. Grammar:
///   [3same.|3opp.] (poly<q> | sing) [ "[" name=value, ... "]" ] [+drho]
/// Parameters, in order: b0..bq (or b0 b1 b2), then d for three-region
/// shapes, then m when +drho is present.
struct ModelSpec {
  std::string name;
  Shape shape = Shape::TwoRegion;
  PsiKind kind = PsiKind::Poly;
  int degree = 1;  // poly only
  bool drho = false;
  std::vector<std::pair<std::string, double>> fixed;

  // Throws ConfigError on malformed names or unknown parameters.
  static ModelSpec parse(const std::string& text);

  bool three_region() const { return shape != Shape::TwoRegion; }
  std::vector<std::string> param_names() const;
  std::vector<std::string> free_param_names() const;
  std::size_t free_count() const;
  std::optional<double> fixed_value(const std::string& param) const;
};

// Named candidate sets: "shell-h1", "shell-h0", "cone", "cone-two", "halfspace".
std::vector<ModelSpec> model_set(const std::string& name);

// Comma-separated mix of set names and model names, in order.
std::vector<ModelSpec> parse_model_list(const std::string& text);

struct ScalingModel {
  ModelSpec spec;
  std::vector<double> params;  // aligned with spec.param_names()

  // Builds a model from values for the free parameters only.
  static ScalingModel from_free(const ModelSpec& spec, std::span<const double> free_values);

  double param(const std::string& name) const;
  PsiFamily psi() const;   // psi1 for three-region shapes
  PsiFamily psi2() const;  // three-region only
  std::optional<RhoCorrection> correction() const;

  // Throws InvalidParameter if d <= 0, b0 <= -d/2, m <= 0 or a value is
  // not finite.
  void check() const;
};

/// Marginal probability f(sigma2), clamped to [1e-12, 1 - 1e-12].
double marginal_prob(const ScalingModel& model, double sigma2);

/// Joint probability g(sigma2, tau2) for tau2 > sigma2.
double joint_prob(const ScalingModel& model, double sigma2, double tau2);

nlohmann::json model_to_json(const ScalingModel& model);

namespace detail {

inline constexpr double kProbFloor = 1e-12;

// Evaluation without exceptions for the optimizer: NaN signals an infeasible
// point. The marginal is unclamped.
double marginal_raw(const ScalingModel& model, double sigma2);
double joint_raw(const ScalingModel& model, double sigma2, double tau2);

}  // namespace detail

}  // namespace regionboot
