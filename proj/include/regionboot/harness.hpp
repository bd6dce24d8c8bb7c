#pragma once

// End-to-end drivers: the closed-form report, the sample/fit/select
// pipeline for one observation, and the contour and rejection sweeps.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "regionboot/confidence.hpp"
#include "regionboot/fit.hpp"
#include "regionboot/regions.hpp"
#include "regionboot/sampler.hpp"

namespace regionboot {

extern const char* const kVersion;

/// Closed-form values for slab, shell and half-space regions. Throws
/// UnsupportedOracle for the cone.
nlohmann::json exact_report(const Region& region, std::span<const double> y, double alpha = 0.05);

// Candidate models suited to a region and target when none are given.
std::vector<ModelSpec> default_models(const Region& region, Target target);

struct PipelineConfig {
  ScaleGrid grid = default_scale_grid(true);
  std::uint64_t seed = 0;
  Target target = Target::H0;
  std::vector<ModelSpec> models;  // empty: default_models()
  int k = kDefaultTaylorOrder;
  double sigma0_sq = kDefaultSigma0Sq;
  FitOptions fit;
};

struct PipelineResult {
  MultiscaleCounts counts;
  ModelSelection selection;
  ConfidenceReport report;

  nlohmann::json to_json() const;
};

/// Samples counts, fits every candidate, selects by AIC and reports the
/// confidence measures of the chosen model.
PipelineResult run_pipeline(const Region& region, std::span<const double> y,
                            const PipelineConfig& config);

enum class Measure { Bp1, OneSided, TwoSidedSelect, Bayes };

std::string to_string(Measure measure);
Measure measure_from_string(const std::string& name);
std::vector<Measure> parse_measures(const std::string& text);  // comma list or "all"

struct SweepConfig {
  Region region = Cone2D{};
  std::vector<Measure> measures{Measure::TwoSidedSelect};
  ScaleGrid grid = default_scale_grid(true);
  std::int64_t bp_replicates = 10000;  // B for the bp1 measure
  std::vector<ModelSpec> models = model_set("cone");
  std::uint64_t seed = 0;
  int k = kDefaultTaylorOrder;
  double sigma0_sq = kDefaultSigma0Sq;
  double alpha_low = 0.05;
  double alpha_high = 0.95;
  bool timing = false;

  // Contour grid: x0 + i step, y0 + j step.
  double x0 = -4.0;
  double y0 = -3.75;
  double step = 0.25;
  int nx = 60;
  int ny = 36;

  // Rejection sweep: mu = r e along the cone's first edge, r in mu_norms.
  std::vector<double> mu_norms{0.0, 2.0, 4.0, 8.0, 16.0};
  int replicates = 1000;

  void validate() const;
  nlohmann::json to_json() const;
};

struct PointResult {
  std::vector<double> values;  // per measure; NaN when that measure failed
  std::string model;           // chosen model of the full selection, if fitted
  bool three_region = false;
  bool failed = false;
  std::string error;
  double seconds = 0.0;
};

/// Every configured measure at one observation y.
PointResult evaluate_point(const SweepConfig& config, std::span<const double> y, std::uint64_t seed);

struct SweepOutput {
  std::string csv;
  std::size_t rows = 0;
  std::size_t flagged_rows = 0;
  nlohmann::json sidecar;
};

/// One row per grid point, in row-major grid order.
SweepOutput sweep_contour(const SweepConfig& config);

/// One row per mu with the rates p < alpha_low and p > alpha_high over
/// `replicates` observations y ~ N(mu, I), and their binomial standard errors.
SweepOutput sweep_rejection(const SweepConfig& config);

}  // namespace regionboot
