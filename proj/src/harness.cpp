#include "regionboot/harness.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "regionboot/dist.hpp"
#include "regionboot/error.hpp"
#include "regionboot/rng.hpp"
#include "csv.hpp"

#ifndef REGIONBOOT_VERSION
#define REGIONBOOT_VERSION "0.0.0"
#endif

namespace regionboot {

const char* const kVersion = REGIONBOOT_VERSION;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double norm2(std::span<const double> y) {
  double s = 0.0;
  for (double v : y) s += v * v;
  return std::sqrt(s);
}

void check_dim(const Region& region, std::span<const double> y) {
  if (y.size() != ambient_dim(region)) {
    throw ConfigError("y has dimension " + std::to_string(y.size()) + ", region expects " +
                      std::to_string(ambient_dim(region)));
  }
}

}  // namespace

nlohmann::json exact_report(const Region& region, std::span<const double> y, double alpha) {
  validate(region);
  check_dim(region, y);
  nlohmann::json j{{"region", region_to_json(region)}, {"y", std::vector<double>(y.begin(), y.end())}};
  if (const auto* slab = std::get_if<Slab>(&region)) {
    const double v = y.back();
    const ConfidenceReport r = exact_slab_p_values(v, slab->d);
    j["p_one_sided"] = *r.p_one_sided;  // p(H0'), H0': mu_last <= 0
    j["pi_one_sided"] = exact_bootstrap_prob(region, y, 1.0, Target::H0Prime);
    j["p1"] = *r.p1;
    j["p2"] = *r.p2;
    j["p_exact"] = exact_p_slab(v, slab->d);
    j["p_two_sided"] = *r.p_two_sided;
    j["pi_bayes"] = exact_bootstrap_prob(region, y, 1.0, Target::H0);
    j["critical_constant"] = slab_critical_constant(alpha, slab->d);
  } else if (const auto* shell = std::get_if<SphericalShell>(&region)) {
    const double r = norm2(y);
    const int df = shell->m + 1;
    const double p1 = exact_one_sided_shell(r, shell->a1, df, ShellSide::Outer);
    const double p2 = exact_one_sided_shell(r, shell->a2, df, ShellSide::Inner);
    const ConfidenceReport rep = combine_tails(p1, p2);
    const ShellConstants c = shell_critical_constants(alpha, shell->a1, shell->a2, df);
    j["p1"] = p1;
    j["p2"] = p2;
    j["p_exact"] = exact_p_shell(r, shell->a1, shell->a2, df);
    j["p_two_sided"] = *rep.p_two_sided;
    j["pi_bayes"] = *rep.pi_bayes;
    j["bp_h0"] = exact_bootstrap_prob(region, y, 1.0, Target::H0);
    j["c1"] = c.c1;
    j["c2"] = c.c2;
  } else if (const auto* half = std::get_if<HalfSpace>(&region)) {
    const double p = dist::std_normal_cdf(half->offset - y.back());
    j["p_one_sided"] = p;
    j["pi_one_sided"] = exact_bootstrap_prob(region, y, 1.0, Target::H0);
  } else {
    throw UnsupportedOracle("exact: no closed-form p-values for " + region_kind(region));
  }
  j["alpha"] = alpha;
  return j;
}

std::vector<ModelSpec> default_models(const Region& region, Target target) {
  const bool three = target == Target::H0 &&
                     (std::holds_alternative<Slab>(region) || std::holds_alternative<SphericalShell>(region));
  if (std::holds_alternative<Cone2D>(region)) {
    return model_set(target == Target::H0 ? "cone" : "cone-two");
  }
  if (three) return model_set("shell-h0");
  if (std::holds_alternative<HalfSpace>(region)) return model_set("halfspace");
  return model_set("shell-h1");
}

nlohmann::json PipelineResult::to_json() const {
  return {{"report", report.to_json()},
          {"selection", selection.to_json()},
          {"seed", counts.seed},
          {"target", to_string(counts.target)}};
}

PipelineResult run_pipeline(const Region& region, std::span<const double> y,
                            const PipelineConfig& config) {
  config.grid.require_fit_ready();
  PipelineResult out;
  out.counts = sample_counts(region, y, config.grid, config.seed, config.target);
  const auto models = config.models.empty() ? default_models(region, config.target) : config.models;
  out.selection = select(models, out.counts, config.fit);
  out.report = report_from_model(out.selection.best().model, config.k, config.sigma0_sq);
  return out;
}

std::string to_string(Measure measure) {
  switch (measure) {
    case Measure::Bp1: return "bp1";
    case Measure::OneSided: return "one-sided";
    case Measure::TwoSidedSelect: return "two-sided-select";
    case Measure::Bayes: return "bayes";
  }
  return "?";
}

Measure measure_from_string(const std::string& name) {
  for (Measure m : {Measure::Bp1, Measure::OneSided, Measure::TwoSidedSelect, Measure::Bayes}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown measure '" + name + "' (bp1, one-sided, two-sided-select, bayes)");
}

std::vector<Measure> parse_measures(const std::string& text) {
  if (text == "all") return {Measure::Bp1, Measure::OneSided, Measure::TwoSidedSelect, Measure::Bayes};
  std::vector<Measure> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(measure_from_string(item));
  }
  if (out.empty()) throw ConfigError("no measures given");
  return out;
}

void SweepConfig::validate() const {
  regionboot::validate(region);
  if (ambient_dim(region) != 2) throw ConfigError("sweeps need a two-dimensional region");
  if (measures.empty()) throw ConfigError("sweep: no measures");
  grid.require_fit_ready();
  if (!grid.two_step()) throw ConfigError("sweep: the scale grid must be two-step");
  if (bp_replicates < 1) throw ConfigError("sweep: B must be >= 1");
  if (models.empty()) throw ConfigError("sweep: no candidate models");
  if (!(step > 0.0)) throw ConfigError("sweep: step must be > 0");
  if (nx < 1 || ny < 1) throw ConfigError("sweep: grid needs at least one point per axis");
  if (replicates < 1) throw ConfigError("sweep: replicates must be >= 1");
  if (!(alpha_low > 0.0 && alpha_low < 1.0 && alpha_high > 0.0 && alpha_high < 1.0)) {
    throw ConfigError("sweep: alpha levels must lie in (0, 1)");
  }
  for (double r : mu_norms) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("sweep: mu norms must be >= 0");
  }
}

nlohmann::json SweepConfig::to_json() const {
  std::vector<std::string> m, names;
  for (Measure x : measures) m.push_back(to_string(x));
  for (const auto& s : models) names.push_back(s.name);
  return {{"region", region_to_json(region)},
          {"measures", m},
          {"scales", grid.size()},
          {"B", grid.replicates.empty() ? 0 : grid.replicates.front()},
          {"bp_replicates", bp_replicates},
          {"models", names},
          {"seed", seed},
          {"k", k},
          {"sigma0_sq", sigma0_sq},
          {"alpha_low", alpha_low},
          {"alpha_high", alpha_high},
          {"x0", x0},
          {"y0", y0},
          {"step", step},
          {"nx", nx},
          {"ny", ny},
          {"mu_norms", mu_norms},
          {"replicates", replicates}};
}

PointResult evaluate_point(const SweepConfig& config, std::span<const double> y, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  PointResult out;
  out.values.assign(config.measures.size(), kNaN);
  bool needs_fit = false;
  for (Measure m : config.measures) needs_fit = needs_fit || m != Measure::Bp1;

  try {
    for (std::size_t i = 0; i < config.measures.size(); ++i) {
      if (config.measures[i] != Measure::Bp1) continue;
      const auto counts = sample_counts(config.region, y, unit_scale_grid(config.bp_replicates),
                                        rng::derive_seed(seed, 0xB1), Target::H0);
      const ScaleCounts& s = counts.scales.front();
      out.values[i] = static_cast<double>(s.C) / static_cast<double>(s.B);
    }
    if (needs_fit) {
      const auto counts = sample_counts(config.region, y, config.grid, seed, Target::H0);
      FitOptions options;
      options.standard_errors = false;
      ModelSelection sel;
      sel.candidates.reserve(config.models.size());
      for (const auto& spec : config.models) sel.candidates.push_back(fit(spec, counts, options));

      // Best converged fit, optionally restricted to two-region models.
      auto best = [&](bool two_region_only) -> const FitResult* {
        const FitResult* b = nullptr;
        for (const auto& c : sel.candidates) {
          if (!c.converged || (two_region_only && c.model.spec.three_region())) continue;
          if (!b || c.aic < b->aic || (c.aic == b->aic && c.free_count < b->free_count)) b = &c;
        }
        return b;
      };
      const FitResult* overall = best(false);
      const FitResult* two = best(true);
      if (overall) {
        out.model = overall->model.spec.name;
        out.three_region = overall->model.spec.three_region();
      }
      for (std::size_t i = 0; i < config.measures.size(); ++i) {
        const Measure m = config.measures[i];
        if (m == Measure::Bp1) continue;
        const FitResult* f = m == Measure::OneSided ? two : overall;
        if (!f) {
          out.failed = true;
          out.error = "no candidate model converged";
          continue;
        }
        const ConfidenceReport r = report_from_model(f->model, config.k, config.sigma0_sq);
        if (!r.has_tails()) {
          out.values[i] = *r.p_one_sided;
        } else if (m == Measure::Bayes) {
          out.values[i] = *r.pi_bayes;
        } else {
          out.values[i] = *r.p_two_sided;
        }
      }
    }
  } catch (const std::exception& e) {
    out.failed = true;
    out.error = e.what();
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

namespace {

std::string fmt(double v) {
  return std::isnan(v) ? std::string("NA") : detail::format_double(v);
}

nlohmann::json sidecar_base(const SweepConfig& config, const char* kind, double elapsed,
                            std::size_t rows, std::size_t flagged, const nlohmann::json& errors) {
  return {{"kind", kind},
          {"version", kVersion},
          {"config", config.to_json()},
          {"seed", config.seed},
          {"rows", rows},
          {"flagged_rows", flagged},
          {"errors", errors},
          {"elapsed_seconds", elapsed}};
}

}  // namespace

SweepOutput sweep_contour(const SweepConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const std::size_t n = static_cast<std::size_t>(config.nx) * static_cast<std::size_t>(config.ny);
  std::vector<PointResult> results(n);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t idx = 0; idx < static_cast<std::ptrdiff_t>(n); ++idx) {
    const auto i = static_cast<std::size_t>(idx);
    const double y[2] = {config.x0 + static_cast<double>(i % config.nx) * config.step,
                         config.y0 + static_cast<double>(i / config.nx) * config.step};
    results[i] = evaluate_point(config, y, rng::derive_seed(config.seed, i));
  }

  std::ostringstream csv;
  csv << "x,y";
  for (Measure m : config.measures) {
    const std::string name = to_string(m);
    csv << ',' << name << ',' << name << "_reject_low," << name << "_reject_high";
  }
  csv << ",model,flag";
  if (config.timing) csv << ",seconds";
  csv << '\n';
  SweepOutput out;
  nlohmann::json errors = nlohmann::json::array();
  for (std::size_t i = 0; i < n; ++i) {
    const PointResult& r = results[i];
    csv << fmt(config.x0 + static_cast<double>(i % config.nx) * config.step) << ','
        << fmt(config.y0 + static_cast<double>(i / config.nx) * config.step);
    for (double v : r.values) {
      csv << ',' << fmt(v);
      if (std::isnan(v)) {
        csv << ",NA,NA";
      } else {
        csv << ',' << (v < config.alpha_low ? 1 : 0) << ',' << (v > config.alpha_high ? 1 : 0);
      }
    }
    csv << ',' << (r.model.empty() ? "NA" : r.model) << ',' << (r.failed ? "failed" : "ok");
    if (config.timing) csv << ',' << fmt(r.seconds);
    csv << '\n';
    if (r.failed) {
      ++out.flagged_rows;
      errors.push_back({{"row", i}, {"error", r.error}});
    }
  }
  out.rows = n;
  out.csv = csv.str();
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.sidecar = sidecar_base(config, "sweep-contour", elapsed, n, out.flagged_rows, errors);
  return out;
}

SweepOutput sweep_rejection(const SweepConfig& config) {
  config.validate();
  const auto* cone = std::get_if<Cone2D>(&config.region);
  if (!cone) throw ConfigError("sweep-rejection needs a cone2d region");
  const auto start = std::chrono::steady_clock::now();
  // Direction of the first edge; mu moves along the boundary away from the vertex.
  const double edge = cone->orientation - cone->half_angle;
  const double ex = std::cos(edge), ey = std::sin(edge);

  const std::size_t n_mu = config.mu_norms.size();
  const auto reps = static_cast<std::size_t>(config.replicates);
  const std::size_t n = n_mu * reps;
  std::vector<PointResult> results(n);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t idx = 0; idx < static_cast<std::ptrdiff_t>(n); ++idx) {
    const auto i = static_cast<std::size_t>(idx);
    const std::size_t a = i / reps;
    const std::size_t r = i % reps;
    const std::uint64_t seed = rng::derive_seed(config.seed, a, r);
    rng::NormalStream obs(seed, rng::kObservationStream, 0);
    const double norm = config.mu_norms[a];
    const double y[2] = {norm * ex + obs.next(), norm * ey + obs.next()};
    results[i] = evaluate_point(config, y, seed);
  }

  std::ostringstream csv;
  csv << "mu_x,mu_y,mu_norm,replicates";
  for (Measure m : config.measures) {
    const std::string name = to_string(m);
    csv << ',' << name << "_rate_low," << name << "_se_low," << name << "_rate_high," << name
        << "_se_high," << name << "_failures";
  }
  csv << ",three_region_fraction,flag";
  if (config.timing) csv << ",seconds";
  csv << '\n';

  SweepOutput out;
  nlohmann::json errors = nlohmann::json::array();
  for (std::size_t a = 0; a < n_mu; ++a) {
    const double norm = config.mu_norms[a];
    csv << fmt(norm * ex) << ',' << fmt(norm * ey) << ',' << fmt(norm) << ',' << reps;
    bool flagged = false;
    double seconds = 0.0;
    std::size_t fitted = 0, three = 0;
    for (std::size_t r = 0; r < reps; ++r) {
      const PointResult& p = results[a * reps + r];
      seconds += p.seconds;
      if (!p.model.empty()) {
        ++fitted;
        three += p.three_region;
      }
      if (p.failed) {
        flagged = true;
        errors.push_back({{"mu_norm", norm}, {"replicate", r}, {"error", p.error}});
      }
    }
    for (std::size_t m = 0; m < config.measures.size(); ++m) {
      std::size_t ok = 0, low = 0, high = 0;
      for (std::size_t r = 0; r < reps; ++r) {
        const double v = results[a * reps + r].values[m];
        if (std::isnan(v)) continue;
        ++ok;
        low += v < config.alpha_low;
        high += v > config.alpha_high;
      }
      const std::size_t failures = reps - ok;
      if (ok == 0) {
        csv << ",NA,NA,NA,NA," << failures;
        continue;
      }
      const double k = static_cast<double>(ok);
      const double rl = static_cast<double>(low) / k;
      const double rh = static_cast<double>(high) / k;
      csv << ',' << fmt(rl) << ',' << fmt(std::sqrt(rl * (1.0 - rl) / k)) << ',' << fmt(rh) << ','
          << fmt(std::sqrt(rh * (1.0 - rh) / k)) << ',' << failures;
    }
    csv << ',' << (fitted ? fmt(static_cast<double>(three) / static_cast<double>(fitted)) : "NA") << ','
        << (flagged ? "failed" : "ok");
    if (config.timing) csv << ',' << fmt(seconds);
    csv << '\n';
    out.flagged_rows += flagged;
  }
  out.rows = n_mu;
  out.csv = csv.str();
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.sidecar = sidecar_base(config, "sweep-rejection", elapsed, n_mu, out.flagged_rows, errors);
  return out;
}

}  // namespace regionboot
