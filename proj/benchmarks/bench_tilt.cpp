#include "tiltwise/dgp.hpp"
#include "tiltwise/nuisance.hpp"
#include "tiltwise/simlab.hpp"
#include "tiltwise/tilt.hpp"

#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

using namespace tiltwise;

static void BM_TiltDensity(benchmark::State& state)
{
  auto grid = share(SupportGrid::unit(static_cast<double>(state.range(0))));
  std::vector<double> v(grid->size());
  for (std::size_t d = 0; d < v.size(); ++d)
    v[d] = 1.0 + 0.5 * std::sin(6.0 * grid->points()[d]);
  double mass = 0;
  for (std::size_t d = 0; d < v.size(); ++d)
    mass += grid->weights()[d] * v[d];
  for (double& x : v)
    x /= mass;
  const ConditionalDensitySlice slice(grid, v);
  for (auto _ : state)
    benchmark::DoNotOptimize(tilt_density(slice, Tilt(7.5)));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(grid->size()));
}
BENCHMARK(BM_TiltDensity)->Arg(200)->Arg(2000)->Arg(20000);

//! One delta step over a fold: the per-delta work the curve repeats.
static void BM_TiltQuantities(benchmark::State& state)
{
  const auto grid = SupportGrid::unit();
  const auto units = state.range(0);
  const Eigen::MatrixXd pi = Eigen::MatrixXd::Constant(units, static_cast<Eigen::Index>(grid.size()), 1.0);
  Eigen::MatrixXd mu(units, static_cast<Eigen::Index>(grid.size()));
  for (Eigen::Index d = 0; d < mu.cols(); ++d)
    mu.col(d).setConstant(grid.points()[static_cast<std::size_t>(d)]);
  for (auto _ : state)
    benchmark::DoNotOptimize(tilt_quantities(grid, pi, mu, Tilt(4.0)));
  state.SetItemsProcessed(state.iterations() * units);
}
BENCHMARK(BM_TiltQuantities)->Arg(400)->Arg(4000);

static void BM_OracleEfficiencyBound(benchmark::State& state)
{
  const auto dgp = make_dgp("logistic");
  for (auto _ : state)
    benchmark::DoNotOptimize(oracle_efficiency_bound(dgp, Tilt(8.0)));
}
BENCHMARK(BM_OracleEfficiencyBound)->Unit(benchmark::kMillisecond);
