#pragma once

// Confidence measures from fitted scaling laws: extrapolation of psi to
// sigma2 = -1, its truncated Taylor form, the two-sided combination, the
// Bayesian measure and the p^(s) family between them.

#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "regionboot/fit.hpp"
#include "regionboot/scaling.hpp"

namespace regionboot {

inline constexpr int kDefaultTaylorOrder = 3;
inline constexpr double kDefaultSigma0Sq = 1.0;

struct ConfidenceReport {
  std::optional<double> p_one_sided;
  std::optional<double> p1;  // p-value of H1
  std::optional<double> p2;  // p-value of H2
  std::optional<double> p_two_sided;
  std::optional<double> pi_bayes;     // clamped to [0, 1]
  std::optional<double> pi_unclamped; // 1 - (p1 + p2)
  bool pi_clamped = false;
  int k = kDefaultTaylorOrder;
  double sigma0_sq = kDefaultSigma0Sq;
  std::string model;  // chosen model, or "exact"

  bool has_tails() const { return p1.has_value() && p2.has_value(); }

  nlohmann::json to_json() const;
};

/// Phi(-psi(-1)). Throws UnsupportedOracle for the singular family, which
/// has no value at sigma2 = -1.
double p_extrapolate_exact(const PsiFamily& psi);

/// Phi(-sum_{j<k} (-1 - sigma0_sq)^j / j! psi^(j)(sigma0_sq)), 1 <= k <= 7.
double p_taylor(const PsiFamily& psi, int k, double sigma0_sq);

// Exact extrapolation for polynomial psi, Taylor form otherwise.
double p_from_psi(const PsiFamily& psi, int k, double sigma0_sq);

/// Report with p1, p2, p_two_sided = 1 - |p1 - p2| and pi_bayes = 1 - (p1 + p2).
ConfidenceReport combine_tails(double p1, double p2);

/// Tails p1 = Phi(-psi1(-1)), p2 = Phi(-psi2(-1)) of a three-region model,
/// then combine_tails. Throws ConfigError for two-region models.
ConfidenceReport combine_three_region(const ScalingModel& model, int k = kDefaultTaylorOrder,
                                      double sigma0_sq = kDefaultSigma0Sq);

/// pi + s min(p1, p2), written as the affine interpolation between
/// pi (s = 0) and p_two_sided (s = 2) and clamped to [0, 1]. Throws
/// ConfigError when the report has no tails.
double p_sided(const ConfidenceReport& report, double s);

/// Closed-form tails for the slab -d <= mu_last <= 0: p1 = Phi(y_last),
/// p2 = Phi(-d - y_last); p_one_sided is the H0' value Phi(-y_last).
ConfidenceReport exact_slab_p_values(double y_last, double d);

/// Report for the chosen model of a selection: two-region models give
/// p_one_sided, three-region models give the tails and their combinations.
ConfidenceReport report_from_model(const ScalingModel& model, int k = kDefaultTaylorOrder,
                                   double sigma0_sq = kDefaultSigma0Sq);

}  // namespace regionboot
