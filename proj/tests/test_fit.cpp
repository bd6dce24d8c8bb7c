#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "regionboot/error.hpp"
#include "regionboot/fit.hpp"
#include "regionboot/sampler.hpp"

using namespace regionboot;
using Catch::Approx;

namespace {

const std::vector<double> kShellY{5.9, 0.0, 0.0, 0.0};

ScalingModel make(const std::string& name, std::vector<double> free_values) {
  return ScalingModel::from_free(ModelSpec::parse(name), free_values);
}

// Expected counts of a model, rounded: a noise-free data set whose MLE is the
// generating parameter up to rounding.
MultiscaleCounts expected_counts(const ScalingModel& model, const ScaleGrid& grid) {
  MultiscaleCounts c;
  c.mode = grid.two_step() ? CountMode::TwoStep : CountMode::OneStep;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    ScaleCounts s;
    s.sigma2 = grid.sigma2[i];
    s.B = grid.replicates[i];
    const double B = static_cast<double>(s.B);
    s.C = std::llround(B * marginal_prob(model, s.sigma2));
    if (grid.two_step()) {
      s.tau2 = grid.tau2[i];
      s.D = std::llround(B * marginal_prob(model, s.tau2));
      s.E = std::llround(B * joint_prob(model, s.sigma2, s.tau2));
    }
    c.scales.push_back(s);
  }
  return c;
}

// Log-likelihood gradient in the unconstrained coordinates, by central differences.
std::vector<double> u_gradient(const FitResult& r, const MultiscaleCounts& counts) {
  // The fitter bounds the singular b2 by the smallest and largest sigma.
  double lo = counts.scales.front().sigma2, hi = 0.0;
  for (const auto& s : counts.scales) hi = std::max({hi, s.sigma2, s.tau2});
  const Reparameterization rp(r.model.spec, std::sqrt(lo), std::sqrt(hi));
  std::vector<double> free;
  for (const auto& name : r.model.spec.free_param_names()) free.push_back(r.model.param(name));
  auto u = rp.to_unconstrained(free);
  std::vector<double> g(u.size());
  ScalingModel work = r.model;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double h = 1e-6 * std::max(1.0, std::abs(u[k]));
    const double u0 = u[k];
    u[k] = u0 + h;
    rp.to_params(u, work.params);
    const double fp = loglik(work, counts);
    u[k] = u0 - h;
    rp.to_params(u, work.params);
    const double fm = loglik(work, counts);
    u[k] = u0;
    g[k] = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace

TEST_CASE("one-step likelihood") {
  MultiscaleCounts c;
  c.scales.push_back(ScaleCounts{1.0, 0.0, 1000, 500, 0, 0});
  CHECK(loglik_one_step(make("poly1", {0.0, 0.0}), c) == Approx(1000.0 * std::log(0.5)).epsilon(1e-14));

  // The saturated fit bounds every other parameter value.
  c.scales = {ScaleCounts{0.5, 0.0, 1000, 300, 0, 0}, ScaleCounts{2.0, 0.0, 1000, 450, 0, 0}};
  double saturated = 0.0;
  for (const auto& s : c.scales) {
    const double f = static_cast<double>(s.C) / static_cast<double>(s.B);
    saturated += s.C * std::log(f) + (s.B - s.C) * std::log(1.0 - f);
  }
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) CHECK(loglik_one_step(make("poly1", {u(gen), u(gen)}), c) <= saturated + 1e-9);
}

TEST_CASE("two-step likelihood is the four-category multinomial") {
  const auto model = make("poly1+drho", {0.2, -0.25, 3.0});
  MultiscaleCounts c;
  c.mode = CountMode::TwoStep;
  c.scales = {ScaleCounts{0.5, 1.5, 1000, 400, 420, 300}, ScaleCounts{1.0, 2.0, 500, 210, 230, 150}};
  double direct = 0.0;
  for (const auto& s : c.scales) {
    const double f = marginal_prob(model, s.sigma2), h = marginal_prob(model, s.tau2);
    const double g = joint_prob(model, s.sigma2, s.tau2);
    direct += s.E * std::log(g) + (s.C - s.E) * std::log(f - g) + (s.D - s.E) * std::log(h - g) +
              (s.B - s.C - s.D + s.E) * std::log(1.0 - f - h + g);
  }
  CHECK(loglik_two_step(model, c) == Approx(direct).epsilon(1e-13));
  CHECK(loglik(model, c) == loglik_two_step(model, c));

  // Perfect nesting leaves the (C - E) category empty, so it must not contribute.
  MultiscaleCounts nested = c;
  for (auto& s : nested.scales) s.E = s.C;
  CHECK(std::isfinite(loglik_two_step(model, nested)));

  MultiscaleCounts one = c;
  one.mode = CountMode::OneStep;
  for (auto& s : one.scales) s.D = s.E = 0, s.tau2 = 0.0;
  CHECK_THROWS_AS(loglik_two_step(model, one), ConfigError);
}

TEST_CASE("reparameterization round trip") {
  const Reparameterization rp(ModelSpec::parse("3opp.sing"), 1.0 / 3.0, std::sqrt(10.0));
  CHECK(rp.b2_lower() < 0.0);
  CHECK(rp.b2_upper() > 0.0);
  for (const char* name : {"poly1+drho", "3same.poly1", "3opp.sing", "sing[b1=0,b2=0]"}) {
    const ModelSpec spec = ModelSpec::parse(name);
    const Reparameterization r(spec, 1.0 / 3.0, std::sqrt(10.0));
    std::vector<double> free;
    for (const auto& p : spec.free_param_names()) {
      free.push_back(p == "d" ? 1.3 : p == "m" ? 4.0 : p == "b2" ? 0.3 : p == "b0" ? 0.2 : -0.1);
    }
    const auto back = r.to_free(r.to_unconstrained(free));
    REQUIRE(back.size() == free.size());
    for (std::size_t k = 0; k < free.size(); ++k) CHECK(back[k] == Approx(free[k]).epsilon(1e-10));
  }
}

TEST_CASE("fit recovers the generating parameters from noise-free counts") {
  const ScaleGrid grid = default_scale_grid(true, 1000000);
  for (const auto& [name, truth] : std::vector<std::pair<std::string, std::vector<double>>>{
           {"poly1+drho", {0.1, -0.26, 3.0}},
           {"3same.poly1", {0.09, -0.2, 1.0}},
       }) {
    const ScalingModel model = make(name, truth);
    const auto counts = expected_counts(model, grid);
    const FitResult r = fit(model.spec, counts);
    REQUIRE(r.converged);
    const auto names = model.spec.free_param_names();
    for (std::size_t k = 0; k < names.size(); ++k) {
      INFO(name << " " << names[k]);
      CHECK(std::abs(r.model.param(names[k]) - truth[k]) <= 3.0 * r.se[k]);
    }
  }
}

TEST_CASE("shell fits") {
  const SphericalShell shell{3, 6.0, 5.0};
  const ScaleGrid grid = default_scale_grid(true, 10000);
  const auto h1 = sample_counts(shell, kShellY, grid, 1, Target::H1);
  const auto sel = select(model_set("shell-h1"), h1);
  REQUIRE(sel.candidates.size() == 2);
  const FitResult& with = sel.candidates[0];
  const FitResult& without = sel.candidates[1];
  CHECK(sel.best().model.spec.name == "poly1+drho");
  CHECK(with.model.param("b0") == Approx(0.101).margin(0.03));
  CHECK(with.model.param("b1") == Approx(-0.258).margin(0.05));
  CHECK(with.model.param("m") == Approx(2.83).margin(1.0));
  CHECK(without.aic - with.aic > 30.0);

  const auto h0 = sample_counts(shell, kShellY, grid, 1, Target::H0);
  const FitResult three = fit(ModelSpec::parse("3same.poly1"), h0);
  CHECK(three.converged);
  CHECK(three.model.param("b0") == Approx(0.089).margin(0.03));
  CHECK(three.model.param("b1") == Approx(-0.199).margin(0.05));
  CHECK(three.model.param("d") == Approx(0.995).margin(0.08));
}

TEST_CASE("fit invariants") {
  const SphericalShell shell{3, 6.0, 5.0};
  const auto counts = sample_counts(shell, kShellY, default_scale_grid(true, 5000), 9, Target::H0);
  for (const char* name : {"3same.poly1", "3opp.sing", "3opp.sing[b2=0]"}) {
    const FitResult r = fit(ModelSpec::parse(name), counts);
    INFO(name);
    CHECK(r.aic == -2.0 * r.loglik + 2.0 * static_cast<double>(r.free_count));
    CHECK(r.free_count == r.model.spec.free_count());
    // Canonical orientation of the mirrored three-region solution.
    CHECK(r.model.param("b0") <= r.model.param("d") / 2.0 + 1e-12);
    if (r.converged) {
      for (double g : u_gradient(r, counts)) CHECK(std::abs(g) < 1e-4 * (1.0 + std::abs(r.loglik)));
    }
  }
}

TEST_CASE("one-step three-region fits need an override") {
  const auto counts = sample_counts(SphericalShell{3, 6.0, 5.0}, kShellY, default_scale_grid(false, 5000), 2);
  CHECK_THROWS_AS(fit(ModelSpec::parse("3same.poly1"), counts), ConfigError);
  FitOptions o;
  o.allow_one_step_three_region = true;
  CHECK(std::isfinite(fit(ModelSpec::parse("3same.poly1"), counts, o).loglik));
}

TEST_CASE("complement symmetry") {
  const auto counts = sample_counts(SphericalShell{3, 6.0, 5.0}, kShellY, default_scale_grid(true, 10000), 4, Target::H1);
  const auto spec = ModelSpec::parse("poly1+drho");
  const FitResult a = fit(spec, counts);
  const FitResult b = fit(spec, counts.complement());
  REQUIRE(a.converged);
  REQUIRE(b.converged);
  CHECK(a.model.param("b0") == Approx(-b.model.param("b0")).margin(1e-3));
  CHECK(a.model.param("b1") == Approx(-b.model.param("b1")).margin(1e-3));
  const double p = std::erfc(a.model.psi().value(-1.0) / std::sqrt(2.0)) / 2.0;
  const double q = std::erfc(b.model.psi().value(-1.0) / std::sqrt(2.0)) / 2.0;
  CHECK(p + q == Approx(1.0).margin(2e-3));
}

TEST_CASE("selection rules") {
  const auto counts = sample_counts(SphericalShell{3, 6.0, 5.0}, kShellY, default_scale_grid(true, 3000), 5, Target::H1);
  const auto dup = select({ModelSpec::parse("poly1"), ModelSpec::parse("poly1")}, counts);
  CHECK(dup.chosen == 0);
  const auto sel = select(model_set("shell-h1"), counts);
  for (const auto& c : sel.candidates) {
    if (c.converged) CHECK(sel.best().aic <= c.aic);
  }
  const auto j = sel.to_json();
  CHECK(j.at("candidates").size() == 2);
}

TEST_CASE("flat boundary prefers the submodel without slope", "[slow]") {
  // A half-space boundary has psi constant in sigma2, so fixing b1 = 0
  // should win on AIC in most trials.
  const ScaleGrid grid = default_scale_grid(true, 10000);
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto counts = sample_counts(HalfSpace{1, 0.0}, std::vector<double>{0.0, -0.3}, grid, seed);
    const auto sel = select(model_set("halfspace"), counts);
    wins += sel.best().model.spec.name == "poly1[b1=0]";
  }
  CHECK(wins >= 80);
}
