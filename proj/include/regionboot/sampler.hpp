#pragma once

// One-step and two-step multiscale bootstrap under the parametric normal
// model. For scale i, Y* ~ N(y, sigma2_i I) and, in two-step mode,
// Y** = Y* + sqrt(tau2_i - sigma2_i) Z. Counts are tallied against a
// Target of the region's partition.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "regionboot/regions.hpp"

namespace regionboot {

struct ScaleGrid {
  std::vector<double> sigma2;
  std::vector<double> tau2;  // empty for a one-step grid
  std::vector<std::int64_t> replicates;

  std::size_t size() const { return sigma2.size(); }
  bool two_step() const { return !tau2.empty(); }

  // Throws ConfigError unless M >= 1, sigma2 is positive and strictly
  // increasing, tau2 (if present) exceeds sigma2, and every B_i >= 1.
  // Fitting additionally needs M >= 2; see require_fit_ready().
  void validate() const;
  void require_fit_ready() const;

  // Smallest and largest sigma (not sigma2) touched by the grid, including
  // tau when present.
  double min_scale() const;
  double max_scale() const;
};

/// 13 sigmas log-spaced on [1/3, 3]; two-step grids use tau2 = sigma2 + 1.
ScaleGrid default_scale_grid(bool two_step, std::int64_t replicates = 10000);

/// A single scale sigma2 = 1 (the plain bootstrap probability).
ScaleGrid unit_scale_grid(std::int64_t replicates);

// Reads a CSV with a header naming `sigma2` and optionally `tau2` and `B`.
// Missing B defaults to `default_replicates`.
ScaleGrid read_scale_grid_csv(std::istream& in, std::int64_t default_replicates = 10000);
void write_scale_grid_csv(std::ostream& out, const ScaleGrid& grid);

enum class CountMode { OneStep, TwoStep };

struct ScaleCounts {
  double sigma2 = 0.0;
  double tau2 = 0.0;  // 0 in one-step mode
  std::int64_t B = 0;
  std::int64_t C = 0;  // Y* in target
  std::int64_t D = 0;  // Y** in target
  std::int64_t E = 0;  // both
};

struct MultiscaleCounts {
  CountMode mode = CountMode::OneStep;
  std::uint64_t seed = 0;
  Target target = Target::H0;
  std::vector<ScaleCounts> scales;

  // Throws ConfigError when a count invariant is violated.
  void validate() const;

  // Counts of the complementary event: Y* outside the target, and so on.
  MultiscaleCounts complement() const;
};

/// Draws the counts in parallel over replicates. Bit-identical to
/// sample_counts_serial for every thread count.
MultiscaleCounts sample_counts(const Region& region, std::span<const double> y,
                               const ScaleGrid& grid, std::uint64_t seed,
                               Target target = Target::H0);

// Straightforward single-threaded loop; kept as the reference for tests and
// benchmarks.
MultiscaleCounts sample_counts_serial(const Region& region, std::span<const double> y,
                                      const ScaleGrid& grid, std::uint64_t seed,
                                      Target target = Target::H0);

/// Per-scale counts of each label {H0, H1, H2} from the same Y* draws as
/// sample_counts with the same seed.
std::vector<std::array<std::int64_t, 3>> sample_label_counts(const Region& region,
                                                             std::span<const double> y,
                                                             const ScaleGrid& grid,
                                                             std::uint64_t seed);

void write_counts_csv(std::ostream& out, const MultiscaleCounts& counts);
MultiscaleCounts read_counts_csv(std::istream& in);

}  // namespace regionboot
