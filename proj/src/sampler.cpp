#include "regionboot/sampler.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "regionboot/error.hpp"
#include "regionboot/rng.hpp"
#include "csv.hpp"

namespace regionboot {

void ScaleGrid::validate() const {
  if (sigma2.empty()) throw ConfigError("scale grid: no scales");
  if (replicates.size() != sigma2.size()) throw ConfigError("scale grid: replicates size mismatch");
  if (!tau2.empty() && tau2.size() != sigma2.size()) {
    throw ConfigError("scale grid: tau2 size mismatch");
  }
  for (std::size_t i = 0; i < sigma2.size(); ++i) {
    if (!(sigma2[i] > 0.0) || !std::isfinite(sigma2[i])) {
      throw ConfigError("scale grid: sigma2 must be positive and finite");
    }
    if (i > 0 && !(sigma2[i] > sigma2[i - 1])) {
      throw ConfigError("scale grid: sigma2 must be strictly increasing");
    }
    if (!tau2.empty() && !(tau2[i] > sigma2[i] && std::isfinite(tau2[i]))) {
      throw ConfigError("scale grid: tau2 must exceed sigma2");
    }
    if (replicates[i] < 1) throw ConfigError("scale grid: replicates must be >= 1");
  }
}

void ScaleGrid::require_fit_ready() const {
  validate();
  if (sigma2.size() < 2) throw ConfigError("scale grid: fitting needs at least 2 scales");
}

double ScaleGrid::min_scale() const {
  return std::sqrt(sigma2.front());
}

double ScaleGrid::max_scale() const {
  double s2 = sigma2.back();
  for (double t : tau2) s2 = std::max(s2, t);
  return std::sqrt(s2);
}

ScaleGrid default_scale_grid(bool two_step, std::int64_t replicates) {
  constexpr int kScales = 13;
  ScaleGrid grid;
  for (int i = 0; i < kScales; ++i) {
    const double sigma = std::pow(3.0, (i - 6) / 6.0);
    grid.sigma2.push_back(sigma * sigma);
    if (two_step) grid.tau2.push_back(sigma * sigma + 1.0);
    grid.replicates.push_back(replicates);
  }
  // Pin the exact endpoints and midpoint against pow rounding.
  grid.sigma2[0] = 1.0 / 9.0;
  grid.sigma2[6] = 1.0;
  grid.sigma2[12] = 9.0;
  if (two_step) {
    grid.tau2[0] = 1.0 / 9.0 + 1.0;
    grid.tau2[6] = 2.0;
    grid.tau2[12] = 10.0;
  }
  return grid;
}

ScaleGrid unit_scale_grid(std::int64_t replicates) {
  ScaleGrid grid;
  grid.sigma2 = {1.0};
  grid.replicates = {replicates};
  return grid;
}

ScaleGrid read_scale_grid_csv(std::istream& in, std::int64_t default_replicates) {
  const detail::CsvTable table = detail::read_csv(in);
  const int s_col = table.column("sigma2");
  const int t_col = table.find_column("tau2");
  const int b_col = table.find_column("B");
  ScaleGrid grid;
  for (const auto& row : table.rows) {
    grid.sigma2.push_back(detail::parse_double(row.at(s_col)));
    if (t_col >= 0) grid.tau2.push_back(detail::parse_double(row.at(t_col)));
    grid.replicates.push_back(b_col >= 0 ? detail::parse_int(row.at(b_col)) : default_replicates);
  }
  grid.validate();
  return grid;
}

void write_scale_grid_csv(std::ostream& out, const ScaleGrid& grid) {
  out << (grid.two_step() ? "scale_index,sigma2,tau2,B\n" : "scale_index,sigma2,B\n");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out << i << ',' << detail::format_double(grid.sigma2[i]);
    if (grid.two_step()) out << ',' << detail::format_double(grid.tau2[i]);
    out << ',' << grid.replicates[i] << '\n';
  }
}

void MultiscaleCounts::validate() const {
  for (const ScaleCounts& s : scales) {
    const bool ok = s.B >= 1 && s.C >= 0 && s.D >= 0 && s.E >= 0 && s.C <= s.B && s.D <= s.B &&
                    s.E <= std::min(s.C, s.D) && s.C + s.D - s.E <= s.B;
    if (!ok) {
      std::ostringstream msg;
      msg << "counts: inconsistent (B, C, D, E) = (" << s.B << ", " << s.C << ", " << s.D << ", "
          << s.E << ") at sigma2 = " << s.sigma2;
      throw ConfigError(msg.str());
    }
    if (mode == CountMode::OneStep && (s.D != 0 || s.E != 0)) {
      throw ConfigError("counts: one-step counts must have D = E = 0");
    }
    if (mode == CountMode::TwoStep && !(s.tau2 > s.sigma2)) {
      throw ConfigError("counts: two-step counts need tau2 > sigma2");
    }
  }
}

MultiscaleCounts MultiscaleCounts::complement() const {
  MultiscaleCounts out = *this;
  for (ScaleCounts& s : out.scales) {
    const ScaleCounts o = s;
    s.C = o.B - o.C;
    if (mode == CountMode::TwoStep) {
      s.D = o.B - o.D;
      s.E = o.B - o.C - o.D + o.E;
    }
  }
  return out;
}

namespace {

struct Tally {
  std::int64_t C = 0, D = 0, E = 0;
};

// Fills z with n standard normals from the stream.
inline void draw(rng::NormalStream& stream, double* z, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) z[k] = stream.next();
}

// Replicate r of scale `scale`: Y* = y + sigma z1, Y** = Y* + sqrt(tau2 - sigma2) z2.
template <class R>
inline void one_replicate(const R& region, std::span<const double> y, double sigma, double extra,
                          bool two_step, std::uint64_t seed, std::uint32_t scale, std::int64_t r,
                          Target target, double* ystar, double* ystar2, Tally& t) {
  const std::size_t n = y.size();
  rng::NormalStream stream(seed, scale, static_cast<std::uint64_t>(r));
  draw(stream, ystar, n);
  for (std::size_t k = 0; k < n; ++k) ystar[k] = y[k] + sigma * ystar[k];
  const bool in1 = in_target(classify_unchecked(region, ystar, n), target);
  t.C += in1;
  if (two_step) {
    draw(stream, ystar2, n);
    for (std::size_t k = 0; k < n; ++k) ystar2[k] = ystar[k] + extra * ystar2[k];
    const bool in2 = in_target(classify_unchecked(region, ystar2, n), target);
    t.D += in2;
    t.E += in1 && in2;
  }
}

MultiscaleCounts prepare(const Region& region, std::span<const double> y, const ScaleGrid& grid,
                         std::uint64_t seed, Target target) {
  validate(region);
  grid.validate();
  if (y.size() != ambient_dim(region)) {
    throw ConfigError("sample_counts: y has the wrong dimension for the region");
  }
  MultiscaleCounts out;
  out.mode = grid.two_step() ? CountMode::TwoStep : CountMode::OneStep;
  out.seed = seed;
  out.target = target;
  out.scales.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out.scales[i].sigma2 = grid.sigma2[i];
    out.scales[i].tau2 = grid.two_step() ? grid.tau2[i] : 0.0;
    out.scales[i].B = grid.replicates[i];
  }
  return out;
}

}  // namespace

MultiscaleCounts sample_counts(const Region& region, std::span<const double> y,
                               const ScaleGrid& grid, std::uint64_t seed, Target target) {
  MultiscaleCounts out = prepare(region, y, grid, seed, target);
  const bool two_step = grid.two_step();
  const std::size_t n = y.size();
  std::visit(
      [&](const auto& r) {
        for (std::size_t i = 0; i < grid.size(); ++i) {
          const double sigma = std::sqrt(grid.sigma2[i]);
          const double extra = two_step ? std::sqrt(grid.tau2[i] - grid.sigma2[i]) : 0.0;
          const std::int64_t B = grid.replicates[i];
          std::int64_t C = 0, D = 0, E = 0;
#pragma omp parallel reduction(+ : C, D, E)
          {
            std::vector<double> ystar(n), ystar2(n);
            Tally t;
#pragma omp for schedule(static)
            for (std::int64_t rep = 0; rep < B; ++rep) {
              one_replicate(r, y, sigma, extra, two_step, seed, static_cast<std::uint32_t>(i), rep,
                            target, ystar.data(), ystar2.data(), t);
            }
            C += t.C;
            D += t.D;
            E += t.E;
          }
          out.scales[i].C = C;
          out.scales[i].D = D;
          out.scales[i].E = E;
        }
      },
      region);
  return out;
}

MultiscaleCounts sample_counts_serial(const Region& region, std::span<const double> y,
                                      const ScaleGrid& grid, std::uint64_t seed, Target target) {
  MultiscaleCounts out = prepare(region, y, grid, seed, target);
  const bool two_step = grid.two_step();
  std::vector<double> ystar(y.size()), ystar2(y.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double sigma = std::sqrt(grid.sigma2[i]);
    const double extra = two_step ? std::sqrt(grid.tau2[i] - grid.sigma2[i]) : 0.0;
    Tally t;
    for (std::int64_t rep = 0; rep < grid.replicates[i]; ++rep) {
      std::visit(
          [&](const auto& r) {
            one_replicate(r, y, sigma, extra, two_step, seed, static_cast<std::uint32_t>(i), rep,
                          target, ystar.data(), ystar2.data(), t);
          },
          region);
    }
    out.scales[i].C = t.C;
    out.scales[i].D = t.D;
    out.scales[i].E = t.E;
  }
  return out;
}

std::vector<std::array<std::int64_t, 3>> sample_label_counts(const Region& region,
                                                             std::span<const double> y,
                                                             const ScaleGrid& grid,
                                                             std::uint64_t seed) {
  prepare(region, y, grid, seed, Target::H0);
  const std::size_t n = y.size();
  std::vector<std::array<std::int64_t, 3>> out(grid.size(), {0, 0, 0});
  std::vector<double> ystar(n);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double sigma = std::sqrt(grid.sigma2[i]);
    for (std::int64_t rep = 0; rep < grid.replicates[i]; ++rep) {
      rng::NormalStream stream(seed, static_cast<std::uint32_t>(i), static_cast<std::uint64_t>(rep));
      for (std::size_t k = 0; k < n; ++k) ystar[k] = y[k] + sigma * stream.next();
      const Label label = classify(region, ystar);
      ++out[i][static_cast<std::size_t>(label)];
    }
  }
  return out;
}

void write_counts_csv(std::ostream& out, const MultiscaleCounts& counts) {
  out << "scale_index,sigma2,tau2,B,C,D,E\n";
  for (std::size_t i = 0; i < counts.scales.size(); ++i) {
    const ScaleCounts& s = counts.scales[i];
    out << i << ',' << detail::format_double(s.sigma2) << ',' << detail::format_double(s.tau2)
        << ',' << s.B << ',' << s.C << ',' << s.D << ',' << s.E << '\n';
  }
}

MultiscaleCounts read_counts_csv(std::istream& in) {
  const detail::CsvTable table = detail::read_csv(in);
  const int cs = table.column("sigma2");
  const int ct = table.column("tau2");
  const int cb = table.column("B");
  const int cc = table.column("C");
  const int cd = table.column("D");
  const int ce = table.column("E");
  MultiscaleCounts counts;
  bool any_two_step = false;
  for (const auto& row : table.rows) {
    ScaleCounts s;
    s.sigma2 = detail::parse_double(row.at(cs));
    s.tau2 = detail::parse_double(row.at(ct));
    s.B = detail::parse_int(row.at(cb));
    s.C = detail::parse_int(row.at(cc));
    s.D = detail::parse_int(row.at(cd));
    s.E = detail::parse_int(row.at(ce));
    any_two_step = any_two_step || s.tau2 > 0.0;
    counts.scales.push_back(s);
  }
  if (counts.scales.empty()) throw ConfigError("counts CSV has no rows");
  counts.mode = any_two_step ? CountMode::TwoStep : CountMode::OneStep;
  counts.validate();
  return counts;
}

}  // namespace regionboot
