// Serial reference path versus the OpenMP path for the hot kernels.
// Arg(0) = serial, Arg(1) = parallel.

#include <benchmark/benchmark.h>

#include <cmath>

#include "frsf/basisfit.hpp"
#include "frsf/pace.hpp"
#include "frsf/pipeline.hpp"
#include "frsf/simulate.hpp"
#include "frsf/smoother.hpp"

using namespace frsf;

namespace {

Exec exec_of(const benchmark::State& state) { return state.range(0) ? Exec::parallel : Exec::serial; }

const Dataset& dataset() {
  static const Dataset ds = [] {
    SimConfig cfg;
    cfg.n_subjects = 300;
    cfg.eigenvalues = {4, 2, 1, 0.5};
    cfg.gamma = {1.0};
    cfg.dt = 0.5;
    cfg.noise_covariates = true;
    cfg.seed = 1;
    return gen_dataset(cfg).dataset;
  }();
  return ds;
}

void BM_loclin_2d(benchmark::State& state) {
  Rng rng(2);
  std::vector<PointST> pts;
  std::vector<double> y, grid;
  for (int i = 0; i < 20000; ++i) {
    pts.push_back({rng.uniform(), rng.uniform()});
    y.push_back(std::sin(3 * pts.back().s) + rng.normal());
  }
  for (int k = 0; k <= 50; ++k) grid.push_back(k / 50.0);
  const auto bins = bin_2d(pts, y);
  for (auto _ : state) benchmark::DoNotOptimize(loclin_2d(bins, {0.1, 0.1}, grid, grid, exec_of(state)));
}

void BM_fit_cfd_all(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(fit_cfd_all(dataset(), {}, exec_of(state)));
}

void BM_score_matrix(benchmark::State& state) {
  const auto grid = build_grid(dataset().domain, 0.2);
  const auto curves = fit_cfd_all(dataset(), {});
  const auto g = resample_curves(dataset(), curves, grid);
  const auto model = fit_fpca(g, grid, {});
  for (auto _ : state) benchmark::DoNotOptimize(score_matrix(g, model, ScoreMethod::conditional, exec_of(state)));
}

void BM_fit_forest(benchmark::State& state) {
  PipelineConfig pc;
  pc.forest.n_trees = 1;
  const auto model = fit_pipeline(dataset(), pc);
  ForestParams fp;
  fp.n_trees = 100;
  fp.seed = 3;
  for (auto _ : state) benchmark::DoNotOptimize(fit_forest(model.frame, fp, exec_of(state)));
}

void BM_vimp_table(benchmark::State& state) {
  PipelineConfig pc;
  pc.forest.n_trees = 100;
  const auto model = fit_pipeline(dataset(), pc);
  for (auto _ : state) benchmark::DoNotOptimize(vimp_table(model.forest, model.frame, 3, 1, exec_of(state)));
}

}  // namespace

BENCHMARK(BM_loclin_2d)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_fit_cfd_all)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_score_matrix)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_fit_forest)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_vimp_table)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
