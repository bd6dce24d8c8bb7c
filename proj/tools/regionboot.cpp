// regionboot: command-line front end for the exact oracles, the multiscale
// bootstrap pipeline and the cone sweeps.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <omp.h>

#include "regionboot/error.hpp"
#include "regionboot/harness.hpp"

namespace rb = regionboot;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitFlagged = 4;

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw rb::ConfigError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A region argument is either inline JSON or the path of a JSON file.
rb::Region parse_region(const std::string& arg) {
  const auto first = arg.find_first_not_of(" \t\n");
  const std::string text = first != std::string::npos && arg[first] == '{' ? arg : slurp(arg);
  try {
    return rb::region_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw rb::ConfigError(std::string("bad region JSON: ") + e.what());
  }
}

std::vector<double> parse_vector(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw rb::ConfigError("bad number '" + item + "' in --y");
    }
  }
  if (out.empty()) throw rb::ConfigError("--y is empty");
  return out;
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("REGIONBOOT_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw rb::ConfigError("REGIONBOOT_SEED is not an unsigned integer");
    }
  }
  return 0;
}

// Writes to --out, or stdout when no path is given.
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw rb::ConfigError("cannot write '" + path + "'");
  out << text;
}

struct Options {
  std::string region;
  std::string y;
  std::string scales;
  std::int64_t B = 10000;
  std::optional<std::uint64_t> seed;
  int k = rb::kDefaultTaylorOrder;
  double sigma0_sq = rb::kDefaultSigma0Sq;
  std::string measure = "two-sided-select";
  std::string models;
  std::string out;
  int replicates = 1000;
  int threads = 0;
  std::string target = "H0";
  double alpha = 0.05;
  bool timing = false;
  bool one_step = false;
  bool allow_one_step_three = false;
  std::string mu_norms;
  double step = 0.25;
  int nx = 60;
  int ny = 36;
  double x0 = -4.0;
  double y0 = -3.75;
  std::int64_t bp_B = 10000;
};

rb::ScaleGrid make_grid(const Options& o, bool two_step) {
  if (o.scales.empty()) return rb::default_scale_grid(two_step, o.B);
  std::ifstream in(o.scales);
  if (!in) throw rb::ConfigError("cannot open '" + o.scales + "'");
  return rb::read_scale_grid_csv(in, o.B);
}

int cmd_exact(const Options& o) {
  const auto region = parse_region(o.region);
  const auto y = parse_vector(o.y);
  emit(o.out, rb::exact_report(region, y, o.alpha).dump(2) + "\n");
  return 0;
}

int cmd_pipeline(const Options& o) {
  const auto region = parse_region(o.region);
  const auto y = parse_vector(o.y);
  rb::PipelineConfig config;
  config.grid = make_grid(o, !o.one_step);
  config.seed = resolve_seed(o.seed);
  config.target = rb::target_from_string(o.target);
  if (!o.models.empty()) config.models = rb::parse_model_list(o.models);
  config.k = o.k;
  config.sigma0_sq = o.sigma0_sq;
  config.fit.allow_one_step_three_region = o.allow_one_step_three;
  const auto result = rb::run_pipeline(region, y, config);

  nlohmann::json j = result.to_json();
  j["version"] = rb::kVersion;
  j["region"] = rb::region_to_json(region);
  emit(o.out, j.dump(2) + "\n");
  if (!o.out.empty() && o.out != "-") {
    std::ostringstream counts;
    rb::write_counts_csv(counts, result.counts);
    emit(o.out + ".counts.csv", counts.str());
  }
  return result.selection.best().converged ? 0 : kExitNumerical;
}

rb::SweepConfig sweep_config(const Options& o) {
  rb::SweepConfig c;
  if (!o.region.empty()) c.region = parse_region(o.region);
  c.measures = rb::parse_measures(o.measure);
  c.grid = make_grid(o, true);
  c.bp_replicates = o.bp_B;
  if (!o.models.empty()) c.models = rb::parse_model_list(o.models);
  c.seed = resolve_seed(o.seed);
  c.k = o.k;
  c.sigma0_sq = o.sigma0_sq;
  c.timing = o.timing;
  c.x0 = o.x0;
  c.y0 = o.y0;
  c.step = o.step;
  c.nx = o.nx;
  c.ny = o.ny;
  c.replicates = o.replicates;
  if (!o.mu_norms.empty()) c.mu_norms = parse_vector(o.mu_norms);
  return c;
}

int finish_sweep(const Options& o, const rb::SweepOutput& s) {
  emit(o.out, s.csv);
  if (!o.out.empty() && o.out != "-") {
    emit(o.out + ".json", s.sidecar.dump(2) + "\n");
  } else {
    std::cerr << s.sidecar.dump() << "\n";
  }
  return s.flagged_rows ? kExitFlagged : 0;
}

int cmd_grid(const Options& o) {
  std::ostringstream ss;
  rb::write_scale_grid_csv(ss, make_grid(o, !o.one_step));
  emit(o.out, ss.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiscale bootstrap confidence for the problem of regions"};
  app.set_version_flag("--version", std::string(rb::kVersion));
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", o.out, "Output path (default stdout)");
    sub->add_option("--threads", o.threads, "OpenMP threads (0: runtime default)")->check(CLI::NonNegativeNumber);
  };
  auto add_sampling = [&](CLI::App* sub) {
    sub->add_option("--scales", o.scales, "Scale grid CSV (sigma2[,tau2][,B])");
    sub->add_option("--B", o.B, "Replicates per scale")->check(CLI::PositiveNumber);
    sub->add_option("--seed", o.seed, "Master seed (fallback: REGIONBOOT_SEED)");
    sub->add_option("--k", o.k, "Taylor order for singular extrapolation")->check(CLI::Range(1, 7));
    sub->add_option("--sigma0sq", o.sigma0_sq, "Taylor expansion point")->check(CLI::PositiveNumber);
    sub->add_option("--models", o.models, "Comma list of model names or sets");
  };

  auto* exact = app.add_subcommand("exact", "Closed-form p-values for slab, shell and half-space");
  exact->add_option("--region", o.region, "Region JSON or file")->required();
  exact->add_option("--y", o.y, "Observation, comma separated")->required();
  exact->add_option("--alpha", o.alpha, "Level for critical constants")->check(CLI::Range(0.0, 1.0));
  add_common(exact);

  auto* pipeline = app.add_subcommand("pipeline", "Sample, fit, select and report");
  pipeline->add_option("--region", o.region, "Region JSON or file")->required();
  pipeline->add_option("--y", o.y, "Observation, comma separated")->required();
  pipeline->add_option("--target", o.target, "H0, H1, H2 or H0'");
  pipeline->add_flag("--one-step", o.one_step, "Sample marginal counts only");
  pipeline->add_flag("--allow-one-step-three-region", o.allow_one_step_three,
                     "Fit three-region models to one-step counts");
  add_sampling(pipeline);
  add_common(pipeline);

  auto add_sweep = [&](CLI::App* sub) {
    sub->add_option("--region", o.region, "Cone region JSON or file (default cone2d)");
    sub->add_option("--measure", o.measure, "bp1, one-sided, two-sided-select, bayes or all");
    sub->add_option("--bp-B", o.bp_B, "Replicates for bp1")->check(CLI::PositiveNumber);
    sub->add_flag("--timing", o.timing, "Add a per-row seconds column");
    add_sampling(sub);
    add_common(sub);
  };
  auto* contour = app.add_subcommand("sweep-contour", "Confidence measures over a grid of y");
  contour->add_option("--x0", o.x0, "First grid x");
  contour->add_option("--y0", o.y0, "First grid y");
  contour->add_option("--step", o.step, "Grid spacing")->check(CLI::PositiveNumber);
  contour->add_option("--nx", o.nx, "Points along x")->check(CLI::PositiveNumber);
  contour->add_option("--ny", o.ny, "Points along y")->check(CLI::PositiveNumber);
  add_sweep(contour);

  auto* rejection = app.add_subcommand("sweep-rejection", "Rejection rates along the cone edge");
  rejection->add_option("--replicates", o.replicates, "Observations per mu")->check(CLI::PositiveNumber);
  rejection->add_option("--mu", o.mu_norms, "Comma list of |mu| values");
  add_sweep(rejection);

  auto* grid = app.add_subcommand("grid", "Print the default scale grid");
  grid->add_option("--B", o.B, "Replicates per scale")->check(CLI::PositiveNumber);
  grid->add_flag("--one-step", o.one_step, "Omit tau2");
  add_common(grid);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (o.threads > 0) omp_set_num_threads(o.threads);
    if (*exact) return cmd_exact(o);
    if (*pipeline) return cmd_pipeline(o);
    if (*contour) return finish_sweep(o, rb::sweep_contour(sweep_config(o)));
    if (*rejection) return finish_sweep(o, rb::sweep_rejection(sweep_config(o)));
    if (*grid) return cmd_grid(o);
  } catch (const std::logic_error& e) {
    // ConfigError, InvalidParameter, OrderingError and UnsupportedOracle.
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
  return 0;
}
