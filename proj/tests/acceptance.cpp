// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "regionboot/confidence.hpp"
#include "regionboot/dist.hpp"
#include "regionboot/fit.hpp"
#include "regionboot/harness.hpp"
#include "regionboot/regions.hpp"
#include "regionboot/rng.hpp"
#include "regionboot/sampler.hpp"
#include "regionboot/scaling.hpp"
#include "support.hpp"

using namespace regionboot;

namespace {

constexpr std::uint64_t kSeed = 20240611;
const std::vector<double> kShellY{5.9, 0.0, 0.0, 0.0};
const SphericalShell kShell{3, 6.0, 5.0};

struct Check {
  std::vector<std::string> failures;
  std::ostringstream notes;

  void near(const std::string& what, double got, double want, double tol) {
    notes << what << "=" << got << " ";
    if (!(std::abs(got - want) <= tol)) {
      failures.push_back(what + "=" + std::to_string(got) + " not within " + std::to_string(tol) + " of " +
                         std::to_string(want));
    }
  }
  void that(const std::string& what, bool ok) {
    if (!ok) failures.push_back(what);
  }
  bool ok() const { return failures.empty(); }
};

int g_failed = 0;

void report(int id, const std::string& title, double limit_seconds, const std::function<void(Check&)>& body) {
  Check c;
  const auto start = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.failures.push_back(std::string("exception: ") + e.what());
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (seconds >= limit_seconds) {
    c.failures.push_back("runtime " + std::to_string(seconds) + " s exceeds " + std::to_string(limit_seconds) + " s");
  }
  std::printf("criterion %d: %s  %s (%.2f s)\n", id, c.ok() ? "PASS" : "FAIL", title.c_str(), seconds);
  const std::string notes = c.notes.str();
  if (!notes.empty()) std::printf("    %s\n", notes.c_str());
  for (const auto& f : c.failures) std::printf("    failed: %s\n", f.c_str());
  std::fflush(stdout);
  g_failed += !c.ok();
}

double get(const nlohmann::json& j, const char* key) { return j.at(key).get<double>(); }

// Column `name` of a sweep CSV, one value per data row.
std::vector<double> csv_column(const std::string& csv, const std::string& name) {
  std::istringstream in(csv);
  std::string line, cell;
  std::getline(in, line);
  std::istringstream head(line);
  int index = -1;
  for (int k = 0; std::getline(head, cell, ','); ++k) {
    if (cell == name) index = k;
  }
  if (index < 0) throw std::runtime_error("no column " + name);
  std::vector<double> out;
  while (std::getline(in, line)) {
    std::istringstream row(line);
    for (int k = 0; k <= index; ++k) std::getline(row, cell, ',');
    out.push_back(cell == "NA" ? std::nan("") : std::stod(cell));
  }
  return out;
}

void criterion_slab(Check& c) {
  const auto j = exact_report(Slab{1, 1.0}, std::vector<double>{0.0, -0.1});
  c.near("p(H0')", get(j, "p_one_sided"), 0.540, 5e-4);
  c.near("p(H0)", get(j, "p_two_sided"), 0.724, 5e-4);
  c.near("pi(H0')", get(j, "pi_one_sided"), 0.540, 5e-4);
  c.near("pi(H0)", get(j, "pi_bayes"), 0.356, 5e-4);
}

void criterion_shell(Check& c) {
  const auto j = exact_report(kShell, kShellY, 0.05);
  c.near("p(H1)", get(j, "p1"), 0.362, 5e-4);
  c.near("p(H2)", get(j, "p2"), 0.267, 5e-4);
  c.near("exact p(H0)", get(j, "p_exact"), 0.907, 5e-4);
  c.near("combined", get(j, "p_two_sided"), 0.905, 5e-4);
  c.near("bayes", get(j, "pi_bayes"), 0.371, 5e-4);
  c.near("bp(H0)", get(j, "bp_h0"), 0.320, 5e-4);
  c.near("c1", get(j, "c1"), 1.331, 5e-4);
  c.near("c2", get(j, "c2"), 1.903, 5e-4);
}

void shell_pipeline_attempt(Check& c, std::uint64_t seed) {
  const ScaleGrid grid = default_scale_grid(true, 10000);
  const auto h1 = sample_counts(kShell, kShellY, grid, seed, Target::H1);
  const FitResult two = fit(ModelSpec::parse("poly1+drho"), h1);
  c.that("poly1+drho converged", two.converged);
  c.near("b0", two.model.param("b0"), 0.101, 0.03);
  c.near("b1", two.model.param("b1"), -0.258, 0.06);
  c.near("m", two.model.param("m"), 2.83, 1.2);

  const auto h0 = sample_counts(kShell, kShellY, grid, seed, Target::H0);
  const FitResult three = fit(ModelSpec::parse("3same.poly1"), h0);
  c.that("3same.poly1 converged", three.converged);
  c.near("d", three.model.param("d"), 0.995, 0.08);
  c.near("p(H0)", *combine_three_region(three.model).p_two_sided, 0.853, 0.05);
}

void criterion_pipeline(Check& c) {
  Check first;
  shell_pipeline_attempt(first, kSeed);
  if (first.ok()) {
    c.notes << "seed " << kSeed << ": " << first.notes.str();
    return;
  }
  const std::uint64_t retry = rng::derive_seed(kSeed, 1);
  c.notes << "seed " << kSeed << " failed (" << first.failures.front() << "); rerun with seed " << retry << ": ";
  Check second;
  shell_pipeline_attempt(second, retry);
  c.notes << second.notes.str();
  c.failures = second.failures;
}

void criterion_drho_evidence(Check& c) {
  const auto h1 = sample_counts(kShell, kShellY, default_scale_grid(true, 10000), kSeed, Target::H1);
  const auto sel = select(model_set("shell-h1"), h1);
  const double gap = sel.candidates[1].aic - sel.candidates[0].aic;
  c.notes << "AIC(poly1) - AIC(poly1+drho) = " << gap;
  c.that("AIC gap > 30", gap > 30.0);
}

void criterion_cone_sweep(Check& c) {
  SweepConfig config;
  config.region = Cone2D{std::numbers::pi / 10.0, std::numbers::pi / 10.0};
  config.seed = kSeed;
  config.replicates = 1000;

  config.measures = {Measure::TwoSidedSelect};
  config.mu_norms = {2.0, 4.0, 8.0, 16.0};
  const auto sweep = sweep_rejection(config);
  const auto rates = csv_column(sweep.csv, "two-sided-select_rate_low");
  const auto failures = csv_column(sweep.csv, "two-sided-select_failures");
  const auto three = csv_column(sweep.csv, "three_region_fraction");
  for (std::size_t i = 0; i < rates.size(); ++i) {
    const std::string at = "|mu|=" + std::to_string(static_cast<int>(config.mu_norms[i]));
    c.near("two-sided-select rate " + at, rates[i], 0.05, 0.03);
    c.notes << "(three-region " << three[i] << ", failures " << failures[i] << ") ";
  }

  config.measures = {Measure::Bp1};
  config.mu_norms = {0.0};
  const double bp = csv_column(sweep_rejection(config).csv, "bp1_rate_low").front();
  c.notes << "bp1 rate |mu|=0: " << bp;
  c.that("bp1 at the vertex deviates from 0.05 by more than 0.05", std::abs(bp - 0.05) > 0.05);
}

void criterion_properties(Check& c) {
  std::mt19937_64 gen(kSeed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  double worst = 0.0;
  for (int i = 0; i < 2000; ++i) {
    const double a = 4.0 * u(gen), b = 4.0 * u(gen);
    worst = std::max(worst, std::abs(dist::bivariate_normal_cdf(a, b, 0.0) -
                                     dist::std_normal_cdf(a) * dist::std_normal_cdf(b)));
  }
  c.notes << "bvn factorization err " << worst << "; ";
  c.that("bivariate cdf factorizes at rho = 0 within 1e-9", worst <= 1e-9);

  bool frechet = true;
  for (int i = 0; i < 500; ++i) {
    const std::vector<ScalingModel> models{
        ScalingModel::from_free(ModelSpec::parse("poly1+drho"), std::vector<double>{u(gen), u(gen), 0.6 + 4.0 * std::abs(u(gen))}),
        ScalingModel::from_free(ModelSpec::parse("sing+drho"), std::vector<double>{u(gen), u(gen), 0.5 * u(gen), 0.6 + 4.0 * std::abs(u(gen))}),
        ScalingModel::from_free(ModelSpec::parse("3same.poly1"), std::vector<double>{0.2 * u(gen), 0.3 * u(gen), 0.5 + 3.0 * std::abs(u(gen))}),
        ScalingModel::from_free(ModelSpec::parse("3opp.sing"), std::vector<double>{0.2 * u(gen), 0.3 * u(gen), 0.5 * u(gen), 0.5 + 3.0 * std::abs(u(gen))}),
    };
    const double s2 = 0.15 + 2.0 * std::abs(u(gen));
    for (const auto& m : models) {
      const double g = detail::joint_raw(m, s2, s2 + 1.0);
      if (std::isnan(g)) continue;
      const double f1 = detail::marginal_raw(m, s2), f2 = detail::marginal_raw(m, s2 + 1.0);
      frechet = frechet && g <= std::min(f1, f2) + 1e-9 && g >= std::max(0.0, f1 + f2 - 1.0) - 1e-9;
    }
  }
  c.that("joint probability within the Frechet bounds", frechet);

  bool sided = true;
  for (int i = 0; i < 1000; ++i) {
    const ConfidenceReport r = combine_tails(0.5 * std::abs(u(gen)), 0.5 * std::abs(u(gen)));
    sided = sided && p_sided(r, 0.0) == *r.pi_bayes && p_sided(r, 2.0) == *r.p_two_sided;
  }
  c.that("p_s(0) = pi and p_s(2) = two-sided p", sided);

  double taylor = 0.0;
  for (int q = 1; q <= 4; ++q) {
    for (int i = 0; i < 20; ++i) {
      std::vector<double> beta(static_cast<std::size_t>(q) + 1);
      for (double& b : beta) b = 0.5 * u(gen);
      const auto psi = PsiFamily::poly(beta);
      for (int k = q + 1; k <= 7; ++k) taylor = std::max(taylor, std::abs(p_taylor(psi, k, 1.0) - p_extrapolate_exact(psi)));
    }
  }
  c.notes << "taylor exactness err " << taylor << "; ";
  c.that("Taylor extrapolation exact for polynomials", taylor <= 1e-12);

  const ScaleGrid grid = default_scale_grid(true, 10000);
  bool partition = true;
  for (std::size_t i = 0; const auto& row : sample_label_counts(kShell, kShellY, grid, kSeed)) {
    partition = partition && row[0] + row[1] + row[2] == grid.replicates[i++];
  }
  c.that("shared-draw label counts sum to B", partition);

  std::ostringstream a, b;
  write_counts_csv(a, sample_counts(kShell, kShellY, grid, kSeed));
  write_counts_csv(b, sample_counts_serial(kShell, kShellY, grid, kSeed));
  std::ostringstream again;
  write_counts_csv(again, sample_counts(kShell, kShellY, grid, kSeed));
  c.that("counts byte-identical for the same seed", a.str() == again.str() && a.str() == b.str());

  const auto h0 = sample_counts(kShell, kShellY, grid, kSeed, Target::H0);
  const FitResult r = fit(ModelSpec::parse("3same.poly1"), h0);
  const double rel = r.gradient_norm / (1.0 + std::abs(r.loglik));
  c.notes << "relative gradient " << rel << "; ";
  c.that("MLE gradient at the optimum < 1e-4 relative", r.converged && rel < 1e-4);

  const auto h1 = sample_counts(kShell, kShellY, grid, kSeed, Target::H1);
  const auto spec = ModelSpec::parse("poly1+drho");
  const double p = report_from_model(fit(spec, h1).model).p_one_sided.value();
  const double q = report_from_model(fit(spec, h1.complement()).model).p_one_sided.value();
  c.near("p + p'", p + q, 1.0, 2e-3);
}

void criterion_quadratic_surface(Check& c) {
  struct Setting {
    double v, curvature, sigma2;
  };
  for (const Setting s : {Setting{0.0, 1.0, 1.0}, Setting{-0.3, 0.5, 2.0}, Setting{0.3, 1.0, 0.25}}) {
    const testing::QuadraticSurface surface{20, s.curvature, s.v};
    const auto r = testing::quadratic_surface_joint(surface, s.sigma2, s.sigma2 + 1.0, 1000000, kSeed);
    const double plain = std::abs(r.monte_carlo - r.plain);
    const double corrected = std::abs(r.monte_carlo - r.corrected);
    c.notes << "[v=" << s.v << " B=" << s.curvature << " s2=" << s.sigma2 << ": mc " << r.monte_carlo
            << " err plain " << plain << " corrected " << corrected << "] ";
    c.that("corrected correlation wins at v=" + std::to_string(s.v), corrected < plain);
  }
}

}  // namespace

int main() {
  report(1, "closed-form slab suite", 1.0, criterion_slab);
  report(2, "spherical-shell exact suite", 10.0, criterion_shell);
  report(3, "pipeline on the shell", 120.0, criterion_pipeline);
  report(4, "correlation-correction model evidence", 60.0, criterion_drho_evidence);
  report(5, "cone rejection sweep", 1800.0, criterion_cone_sweep);
  report(6, "property suites", 60.0, criterion_properties);
  report(7, "quadratic-surface joint probability check", 300.0, criterion_quadratic_surface);
  std::printf("%d of 7 criteria failed\n", g_failed);
  return g_failed == 0 ? 0 : 1;
}
