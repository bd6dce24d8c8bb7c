// OpenMP kernels against their serial references.

#include <benchmark/benchmark.h>

#include <omp.h>

#include <vector>

#include "regionboot/dist.hpp"
#include "regionboot/regions.hpp"
#include "regionboot/sampler.hpp"

using namespace regionboot;

namespace {

const SphericalShell kShell{3, 6.0, 5.0};
const std::vector<double> kY{5.9, 0.0, 0.0, 0.0};

void BM_SampleCountsSerial(benchmark::State& state) {
  const ScaleGrid grid = default_scale_grid(true, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(sample_counts_serial(kShell, kY, grid, 1));
  state.SetItemsProcessed(state.iterations() * state.range(0) * static_cast<std::int64_t>(grid.size()));
}

void BM_SampleCountsParallel(benchmark::State& state) {
  const ScaleGrid grid = default_scale_grid(true, state.range(0));
  omp_set_num_threads(static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(sample_counts(kShell, kY, grid, 1));
  state.SetItemsProcessed(state.iterations() * state.range(0) * static_cast<std::int64_t>(grid.size()));
}

void BM_BivariateGenz(benchmark::State& state) {
  double a = -2.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(dist::bivariate_normal_cdf(a, 0.3, 0.7));
    a = a > 2.0 ? -2.0 : a + 0.01;
  }
}

void BM_BivariateQuadrature(benchmark::State& state) {
  double a = -2.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(dist::bivariate_normal_cdf_quadrature(a, 0.3, 0.7));
    a = a > 2.0 ? -2.0 : a + 0.01;
  }
}

}  // namespace

BENCHMARK(BM_SampleCountsSerial)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SampleCountsParallel)
    ->ArgsProduct({{10000}, {1, 2, 4, 8}})
    ->ArgNames({"B", "threads"})
    ->Unit(benchmark::kMillisecond)
    ->UseRealTime();
BENCHMARK(BM_BivariateGenz);
BENCHMARK(BM_BivariateQuadrature);

BENCHMARK_MAIN();
