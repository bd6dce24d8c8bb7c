#pragma once

// Maximum-likelihood fitting of scaling models to multiscale counts and
// AIC-based model selection.

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "regionboot/sampler.hpp"
#include "regionboot/scaling.hpp"

namespace regionboot {

/// sum_i C_i log f_i + (B_i - C_i) log(1 - f_i). Uses C and B only, so
/// two-step counts are accepted as well. Returns -inf at infeasible points.
double loglik_one_step(const ScalingModel& model, const MultiscaleCounts& counts);

/// Four-category likelihood over (in, in), (in, out), (out, in), (out, out)
/// with probabilities g, f(s) - g, f(t) - g, 1 - f(s) - f(t) + g, each floored
/// at 1e-12. Throws ConfigError for one-step counts.
double loglik_two_step(const ScalingModel& model, const MultiscaleCounts& counts);

// Two-step likelihood for two-step counts, one-step otherwise.
double loglik(const ScalingModel& model, const MultiscaleCounts& counts);

/// Smooth map from R^k onto the free parameters of a model:
///   d = exp(u), b0 = -d/2 + exp(u) for three-region shapes,
///   m = exp of a logistic onto [log 0.5, log 1e6],
///   sing b2 = logistic onto the interval keeping 1 + b2 (sigma - 1) >= 0.05
///   for every sigma in [min_scale, max_scale].
/// Everything else passes through unchanged.
class Reparameterization {
 public:
  Reparameterization(const ModelSpec& spec, double min_scale, double max_scale);

  std::size_t size() const { return roles_.size(); }

  // Writes the full parameter vector (fixed values included) for u.
  void to_params(std::span<const double> u, std::vector<double>& params) const;
  std::vector<double> to_free(std::span<const double> u) const;

  // Inverse map from free natural values. Values on or beyond a bound map to
  // large finite u.
  std::vector<double> to_unconstrained(std::span<const double> free_values) const;

  double b2_lower() const { return b2_lo_; }
  double b2_upper() const { return b2_hi_; }

  static constexpr double kMinM = 0.5;
  static constexpr double kMaxM = 1e6;
  static constexpr double kSingularMargin = 0.05;

 private:
  enum class Role { Identity, LogD, Beta0AboveHalfD, LogisticM, LogisticB2 };
  ModelSpec spec_;
  std::vector<Role> roles_;          // per free parameter
  std::vector<std::size_t> slots_;   // index into the full parameter vector
  std::vector<double> fixed_params_; // full vector with fixed values filled in
  std::size_t b0_slot_ = 0;
  std::size_t d_slot_ = 0;
  double b2_lo_ = 0.0;
  double b2_hi_ = 0.0;
};

struct FitOptions {
  bool allow_one_step_three_region = false;
  bool standard_errors = true;
  int starts = 5;
};

struct FitResult {
  ScalingModel model;
  double loglik = 0.0;
  double aic = 0.0;
  bool converged = false;
  double gradient_norm = 0.0;  // max |d loglik / du| in the unconstrained space
  std::vector<double> se;      // per free parameter, natural scale; NaN if unavailable
  std::vector<std::string> at_bound;
  int evals = 0;
  std::size_t free_count = 0;

  nlohmann::json to_json() const;
};

/// Maximizes the likelihood over the constraint set with a coarse-grid
/// multi-start, simplex refinement and a Newton polish. Deterministic.
/// Three-region models need two-step counts unless the override is set.
FitResult fit(const ModelSpec& spec, const MultiscaleCounts& counts, const FitOptions& options = {});

struct ModelSelection {
  std::vector<FitResult> candidates;
  std::size_t chosen = 0;

  const FitResult& best() const { return candidates.at(chosen); }
  nlohmann::json to_json() const;
};

/// Fits every candidate and picks the minimum AIC among converged fits; ties
/// go to fewer free parameters, then to the earlier candidate. Throws
/// SelectionError when no candidate converged.
ModelSelection select(const std::vector<ModelSpec>& specs, const MultiscaleCounts& counts,
                      const FitOptions& options = {});

}  // namespace regionboot
