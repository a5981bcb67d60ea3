#include "tiltwise/dgp.hpp"
#include "tiltwise/estimator.hpp"
#include "tiltwise/learners.hpp"
#include "tiltwise/nuisance.hpp"
#include "tiltwise/simlab.hpp"

#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

using namespace tiltwise;

namespace {

std::vector<std::size_t> all_rows(std::size_t n)
{
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

} // namespace

//! mu-hat on the full (unit x design point) product, the dominant fit cost.
static void BM_NadarayaWatsonProduct(benchmark::State& state)
{
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto data = generate_dataset(make_dgp("logistic"), n, 1);
  const auto model = fit_outcome_regression(NadarayaWatson(), data, all_rows(n));
  const auto grid = SupportGrid::unit();
  const Eigen::MatrixXd x = data.covariates().topRows(static_cast<Eigen::Index>(n / 5));
  for (auto _ : state)
    benchmark::DoNotOptimize(model.predict_grid(x, grid));
}
BENCHMARK(BM_NadarayaWatsonProduct)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

static void BM_BandwidthCv(benchmark::State& state)
{
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto data = generate_dataset(make_dgp("logistic"), n, 2);
  const auto grid = SupportGrid::unit();
  const auto candidates = log_spaced(0.02, 0.5, 12);
  const NadarayaWatson nw;
  for (auto _ : state)
    benchmark::DoNotOptimize(select_bandwidth_cv(data, grid, candidates, 5, nw, all_rows(n), 3));
}
BENCHMARK(BM_BandwidthCv)->Arg(1000)->Arg(2000)->Unit(benchmark::kMillisecond);

static void BM_CrossFitLearned(benchmark::State& state)
{
  const auto dgp = make_dgp("uniform");
  const auto data = generate_dataset(dgp, static_cast<std::size_t>(state.range(0)), 4);
  const std::vector<double> deltas = {0.0, 1.0, 2.0, 4.0};
  const auto cfg = simulation_config(dgp, false);
  for (auto _ : state)
    benchmark::DoNotOptimize(estimate_curve(data, deltas, cfg));
}
BENCHMARK(BM_CrossFitLearned)->Arg(1000)->Arg(2000)->Unit(benchmark::kMillisecond);

static void BM_CrossFitOracle(benchmark::State& state)
{
  const auto dgp = make_dgp("uniform");
  const auto data = generate_dataset(dgp, static_cast<std::size_t>(state.range(0)), 5);
  const std::vector<double> deltas = {1.0, 4.0};
  const auto cfg = simulation_config(dgp, true);
  for (auto _ : state)
    benchmark::DoNotOptimize(estimate_curve(data, deltas, cfg));
}
BENCHMARK(BM_CrossFitOracle)->Arg(4000)->Arg(100000)->Unit(benchmark::kMillisecond);
