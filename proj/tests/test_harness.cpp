#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <numbers>
#include <sstream>

#include "regionboot/dist.hpp"
#include "regionboot/error.hpp"
#include "regionboot/harness.hpp"

using namespace regionboot;
using Catch::Approx;

namespace {

SweepConfig small_sweep() {
  SweepConfig c;
  c.grid = default_scale_grid(true, 2000);
  c.bp_replicates = 2000;
  c.seed = 17;
  c.nx = 3;
  c.ny = 2;
  c.x0 = 1.0;
  c.y0 = -1.0;
  c.step = 1.0;
  return c;
}

std::size_t count_lines(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

int run_cli(const std::string& args) {
  const char* cli = std::getenv("REGIONBOOT_CLI");
  if (!cli) return -1;
  const int status = std::system((std::string(cli) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("exact report for the slab") {
  const auto j = exact_report(Slab{1, 1.0}, std::vector<double>{0.0, -0.1});
  CHECK(j.at("p_one_sided").get<double>() == Approx(0.540).margin(5e-4));
  CHECK(j.at("p_two_sided").get<double>() == Approx(0.724).margin(5e-4));
  CHECK(j.at("pi_one_sided").get<double>() == Approx(0.540).margin(5e-4));
  CHECK(j.at("pi_bayes").get<double>() == Approx(0.356).margin(5e-4));
  const auto center = exact_report(Slab{1, 1.0}, std::vector<double>{0.0, -0.5});
  CHECK(center.at("p_two_sided").get<double>() == Approx(1.0).margin(1e-15));
}

TEST_CASE("exact report for the shell", "[slow]") {
  const auto j = exact_report(SphericalShell{3, 6.0, 5.0}, std::vector<double>{5.9, 0.0, 0.0, 0.0});
  CHECK(j.at("p1").get<double>() == Approx(0.362).margin(5e-4));
  CHECK(j.at("p2").get<double>() == Approx(0.267).margin(5e-4));
  CHECK(j.at("p_exact").get<double>() == Approx(0.907).margin(5e-4));
  CHECK(j.at("p_two_sided").get<double>() == Approx(0.905).margin(5e-4));
  CHECK(j.at("pi_bayes").get<double>() == Approx(0.371).margin(5e-4));
  CHECK(j.at("bp_h0").get<double>() == Approx(0.320).margin(5e-4));
}

TEST_CASE("exact report errors") {
  CHECK_THROWS_AS(exact_report(Cone2D{}, std::vector<double>{1.0, 1.0}), UnsupportedOracle);
  CHECK_THROWS_AS(exact_report(Slab{1, 1.0}, std::vector<double>{1.0}), ConfigError);
  const auto h = exact_report(HalfSpace{1, 0.0}, std::vector<double>{0.0, 0.0});
  CHECK(h.at("p_one_sided").get<double>() == 0.5);
}

TEST_CASE("default candidate models") {
  CHECK(default_models(SphericalShell{}, Target::H0).front().name == "3same.poly1");
  CHECK(default_models(SphericalShell{}, Target::H1).front().name == "poly1+drho");
  CHECK(default_models(Cone2D{}, Target::H0).size() == 11);
  CHECK(default_models(HalfSpace{}, Target::H0).size() == 2);
}

TEST_CASE("pipeline on the shell") {
  PipelineConfig config;
  config.seed = 3;
  const auto r = run_pipeline(SphericalShell{3, 6.0, 5.0}, std::vector<double>{5.9, 0.0, 0.0, 0.0}, config);
  REQUIRE(r.report.p_two_sided.has_value());
  CHECK(*r.report.p_two_sided == Approx(0.853).margin(0.05));
  CHECK(r.to_json().at("report").at("model") == "3same.poly1");
}

TEST_CASE("pipeline at a half-space boundary") {
  PipelineConfig config;
  config.seed = 8;
  const auto r = run_pipeline(HalfSpace{2, 0.0}, std::vector<double>{0.4, -1.0, 0.0}, config);
  REQUIRE(r.report.p_one_sided.has_value());
  CHECK(*r.report.p_one_sided == Approx(0.5).margin(0.03));
}

TEST_CASE("measure names") {
  CHECK(parse_measures("all").size() == 4);
  CHECK(parse_measures("bp1,bayes") == std::vector<Measure>{Measure::Bp1, Measure::Bayes});
  for (Measure m : parse_measures("all")) CHECK(measure_from_string(to_string(m)) == m);
  CHECK_THROWS_AS(parse_measures("au"), ConfigError);
}

TEST_CASE("sweep configuration checks") {
  SweepConfig c = small_sweep();
  CHECK_NOTHROW(c.validate());
  c.step = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_sweep();
  c.replicates = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_sweep();
  c.alpha_low = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_sweep();
  c.region = SphericalShell{};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_sweep();
  c.region = Slab{1, 1.0};
  CHECK_THROWS_AS(sweep_rejection(c), ConfigError);
}

TEST_CASE("contour sweep output is deterministic and complete") {
  SweepConfig c = small_sweep();
  c.measures = parse_measures("all");
  const auto a = sweep_contour(c);
  const auto b = sweep_contour(c);
  CHECK(a.csv == b.csv);
  CHECK(a.rows == 6);
  CHECK(count_lines(a.csv) == 7);
  CHECK(a.csv.rfind("x,y,bp1,bp1_reject_low,bp1_reject_high,one-sided", 0) == 0);
  CHECK(a.sidecar.at("seed") == 17);
  CHECK(a.sidecar.at("flagged_rows") == a.flagged_rows);
  c.timing = true;
  CHECK(sweep_contour(c).csv.find(",seconds\n") != std::string::npos);
}

TEST_CASE("bp1 on the cone interior and far along an edge") {
  SweepConfig c = small_sweep();
  c.measures = {Measure::Bp1};
  c.bp_replicates = 10000;
  const double axis = Cone2D{}.orientation;
  const std::vector<double> inside{20.0 * std::cos(axis), 20.0 * std::sin(axis)};
  CHECK(evaluate_point(c, inside, 1).values[0] > 0.999);
  const std::vector<double> edge{20.0, 0.0};
  CHECK(evaluate_point(c, edge, 2).values[0] == Approx(0.5).margin(4.0 * std::sqrt(0.25 / 1e4)));
}

TEST_CASE("one-sided rejection region has the larger dent near the vertex") {
  // Walk away from the vertex opposite to the cone axis and record where each
  // measure first drops below 0.05.
  SweepConfig c = small_sweep();
  c.grid = default_scale_grid(true, 10000);
  c.bp_replicates = 10000;
  c.measures = {Measure::Bp1, Measure::OneSided};
  const double back = Cone2D{}.orientation + std::numbers::pi;
  double crossing[2] = {NAN, NAN};
  for (int i = 1; i <= 24 && std::isnan(crossing[1]); ++i) {
    const double t = 0.25 * i;
    const std::vector<double> y{t * std::cos(back), t * std::sin(back)};
    const PointResult p = evaluate_point(c, y, static_cast<std::uint64_t>(i));
    for (int m = 0; m < 2; ++m) {
      if (std::isnan(crossing[m]) && p.values[m] < 0.05) crossing[m] = t;
    }
  }
  REQUIRE_FALSE(std::isnan(crossing[0]));
  REQUIRE_FALSE(std::isnan(crossing[1]));
  CHECK(crossing[1] > crossing[0]);
}

TEST_CASE("rejection sweep with a single replicate") {
  SweepConfig c = small_sweep();
  c.measures = {Measure::Bp1, Measure::TwoSidedSelect};
  c.replicates = 1;
  c.mu_norms = {0.0, 4.0};
  const auto out = sweep_rejection(c);
  CHECK(out.rows == 2);
  std::istringstream in(out.csv);
  std::string header, line;
  std::getline(in, header);
  CHECK(header.rfind("mu_x,mu_y,mu_norm,replicates,bp1_rate_low", 0) == 0);
  while (std::getline(in, line)) {
    std::istringstream cells(line);
    std::string cell;
    for (int k = 0; k < 5; ++k) std::getline(cells, cell, ',');
    CHECK((cell == "0" || cell == "1"));
  }
  CHECK(sweep_rejection(c).csv == out.csv);
}

TEST_CASE("command-line exit codes") {
  if (!std::getenv("REGIONBOOT_CLI")) SKIP("REGIONBOOT_CLI not set");
  CHECK(run_cli(R"(exact --region '{"kind":"slab","m":1,"d":1}' --y 0,-0.1)") == 0);
  CHECK(run_cli(R"(exact --region '{"kind":"cone2d","angle":0.6}' --y 1,1)") == 2);
  CHECK(run_cli(R"(exact --region '{"kind":"slab","d":-1}' --y 0)") == 2);
  CHECK(run_cli("grid --no-such-flag") == 2);
  CHECK(run_cli("pipeline --region /no/such/file.json --y 1") == 2);
  const std::string tmp = (std::filesystem::temp_directory_path() / "regionboot_cli_test.csv").string();
  CHECK(run_cli("sweep-contour --nx 2 --ny 1 --B 500 --bp-B 500 --measure bp1 --seed 1 --out " + tmp) == 0);
}
