#include "tiltwise/estimator.hpp"

#include "tiltwise/error.hpp"
#include "tiltwise/parallel.hpp"
#include "tiltwise/random.hpp"
#include "tiltwise/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tiltwise {

namespace {

constexpr double kLargeRatio = 1e6;

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& m, std::span<const std::size_t> rows)
{
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

void check_hygiene(const FoldNuisances& nuis)
{
  for (std::size_t r : nuis.held_out) {
    if ((nuis.mu && nuis.mu->trained_on(r)) || (nuis.density && nuis.density->trained_on(r)))
      throw Error(ErrorCode::InvalidArgument,
                  "cross-fit violation: row " + std::to_string(r) + " of fold " +
                    std::to_string(nuis.fold) + " was used to train its own nuisances");
  }
}

} // namespace

std::vector<std::size_t> FoldPlan::held_out(std::size_t k) const
{
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < assignment.size(); ++i)
    if (assignment[i] == k)
      rows.push_back(i);
  return rows;
}

std::vector<std::size_t> FoldPlan::training(std::size_t k) const
{
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < assignment.size(); ++i)
    if (assignment[i] != k)
      rows.push_back(i);
  return rows;
}

FoldPlan split_folds(std::size_t n, std::size_t folds, std::uint64_t seed)
{
  if (folds < 2)
    throw Error(ErrorCode::InvalidArgument, "cross-fitting needs at least two folds");
  if (n < folds * kMinFoldRows)
    throw Error(ErrorCode::TooFewRows, std::to_string(n) + " rows cannot fill " +
                                         std::to_string(folds) + " folds of " +
                                         std::to_string(kMinFoldRows));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto engine = make_engine(seed, {0x666f6c64});
  shuffle(order, engine);
  FoldPlan plan{folds, std::vector<std::size_t>(n), seed};
  for (std::size_t i = 0; i < n; ++i)
    plan.assignment[order[i]] = i % folds;
  return plan;
}

LearnedNuisances::LearnedNuisances(LearnedOptions options, std::uint64_t seed)
  : options_(std::move(options))
  , seed_(seed)
{
  if (options_.bandwidths.empty())
    options_.bandwidths = log_spaced(0.02, 0.5, 12);
}

FoldNuisances LearnedNuisances::fit(const Dataset& data, const FoldPlan& plan, std::size_t fold,
                                    const SharedGrid& grid) const
{
  const auto train = plan.training(fold);
  const auto held = plan.held_out(fold);
  const auto outcome_learner = make_learner(options_.outcome_learner);
  const auto density_learner = make_learner(options_.density_learner);

  const auto chosen =
    select_bandwidth_cv(data, *grid, options_.bandwidths, options_.cv_folds, *density_learner,
                        train, seed_ + 0x9e3779b97f4a7c15ULL * (fold + 1), options_.cv_points,
                        options_.kernel);
  auto density = std::make_shared<const DensityModel>(fit_conditional_density(
    *density_learner, data, grid, chosen.bandwidth, train, fold, options_.kernel));
  auto mu = std::make_shared<const OutcomeModel>(
    fit_outcome_regression(*outcome_learner, data, train, fold));

  const Eigen::MatrixXd x = gather_rows(data.covariates(), held);
  FoldNuisances out;
  out.fold = fold;
  out.held_out = held;
  out.mu_grid = mu->predict_grid(x, *grid);
  out.pi_grid = density->evaluate(x);
  out.mu = std::move(mu);
  out.density = std::move(density);
  out.bandwidth = chosen.bandwidth;
  return out;
}

FoldEstimate fold_psi_hat(const Dataset& data, const SupportGrid& grid, const FoldNuisances& nuis,
                          Tilt tilt)
{
  if (nuis.held_out.empty())
    throw Error(ErrorCode::EmptyFold, "fold " + std::to_string(nuis.fold) + " has no units");
  const auto m = static_cast<Eigen::Index>(nuis.held_out.size());
  if (nuis.mu_grid.rows() != m || nuis.pi_grid.rows() != m)
    throw Error(ErrorCode::InvalidArgument, "fold nuisances do not cover the held-out rows");

  const auto q = tilt_quantities(grid, nuis.pi_grid, nuis.mu_grid, tilt);
  const double delta = tilt.delta();
  FoldEstimate out{nuis.fold, 0.0, nuis.held_out, std::vector<double>(nuis.held_out.size()), {}};
  double total = 0.0;
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto row = static_cast<Eigen::Index>(nuis.held_out[static_cast<std::size_t>(j)]);
    const double a = data.treatment()(row);
    std::size_t left = 0;
    double t = 0.0;
    // units outside the support carry no tilted mass
    const double ratio =
      grid.locate(a, left, t) ? std::exp(delta * (a - q.a_ref)) / q.ratio_scale(j) : 0.0;
    if (q.floored[static_cast<std::size_t>(j)])
      ++out.diagnostics.floor_engaged;
    if (ratio > kLargeRatio)
      ++out.diagnostics.large_ratios;
    out.diagnostics.max_ratio = std::max(out.diagnostics.max_ratio, ratio);
    const double value = ratio * (data.outcome()(row) - q.xi(j)) + q.xi(j);
    out.influence[static_cast<std::size_t>(j)] = value;
    total += value;
  }
  out.psi = total / static_cast<double>(m);
  return out;
}

double influence_variance(const InfluenceValues& values)
{
  for (double v : values.values)
    if (!std::isfinite(v))
      throw Error(ErrorCode::InvalidArgument, "influence values must be finite");
  return sample_variance(values.values);
}

IncrementalEstimate combine_folds(const Dataset& data, const SupportGrid& grid,
                                  std::span<const FoldNuisances> nuisances, Tilt tilt, double alpha,
                                  InfluenceValues* influence)
{
  if (!(alpha > 0.0 && alpha < 1.0))
    throw Error(ErrorCode::InvalidConfig, "alpha must lie in (0, 1)");
  const std::size_t n = data.size();
  InfluenceValues unit{std::vector<double>(n, 0.0), std::vector<std::size_t>(n, 0)};
  std::vector<bool> seen(n, false);

  IncrementalEstimate est;
  est.delta = tilt.delta();
  est.n = n;
  double psi_total = 0.0;
  for (const auto& nuis : nuisances) {
    const auto fe = fold_psi_hat(data, grid, nuis, tilt);
    for (std::size_t j = 0; j < fe.rows.size(); ++j) {
      const std::size_t r = fe.rows[j];
      if (seen[r])
        throw Error(ErrorCode::InvalidArgument, "a unit is held out by two folds");
      seen[r] = true;
      unit.values[r] = fe.influence[j];
      unit.folds[r] = fe.fold;
    }
    est.fold_psi.push_back(fe.psi);
    psi_total += fe.psi;
    est.diagnostics.floor_engaged += fe.diagnostics.floor_engaged;
    est.diagnostics.large_ratios += fe.diagnostics.large_ratios;
    est.diagnostics.max_ratio = std::max(est.diagnostics.max_ratio, fe.diagnostics.max_ratio);
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end())
    throw Error(ErrorCode::InvalidArgument, "folds do not cover every unit");

  est.psi_hat = psi_total / static_cast<double>(nuisances.size());
  est.sigma2_hat = influence_variance(unit);
  est.se = std::sqrt(est.sigma2_hat / static_cast<double>(n));
  const double z = normal_quantile(1.0 - alpha / 2.0);
  est.ci_lower = est.psi_hat - z * est.se;
  est.ci_upper = est.psi_hat + z * est.se;
  if (influence)
    *influence = std::move(unit);
  return est;
}

SharedGrid estimation_grid(const Dataset& data, const EstimatorConfig& config)
{
  std::vector<Interval> support = config.support;
  if (support.empty())
    support = {{data.treatment_min(), data.treatment_max()}};
  if (config.design_points)
    return share(SupportGrid::with_count(std::move(support), *config.design_points));
  return share(SupportGrid::uniform(std::move(support), config.points_per_unit));
}

CurveResult estimate_curve(const Dataset& data, std::span<const double> deltas,
                           const EstimatorConfig& config)
{
  if (deltas.empty())
    throw Error(ErrorCode::InvalidArgument, "delta grid is empty");
  for (double d : deltas)
    (void)Tilt(d);
  if (!std::is_sorted(deltas.begin(), deltas.end()))
    throw Error(ErrorCode::UnsortedDeltaGrid, "delta grid must be sorted ascending");
  if (data.size() < config.min_rows)
    throw Error(ErrorCode::TooFewRows, "estimation needs at least " +
                                         std::to_string(config.min_rows) + " rows, got " +
                                         std::to_string(data.size()));

  CurveResult out;
  out.plan = split_folds(data.size(), config.folds, config.seed);
  out.grid = estimation_grid(data, config);
  const auto source = config.nuisances
                        ? config.nuisances
                        : std::make_shared<const LearnedNuisances>(config.learned, config.seed);

  std::vector<FoldNuisances> fitted(config.folds);
  parallel_for(
    config.folds,
    [&](std::size_t k) {
      fitted[k] = source->fit(data, out.plan, k, out.grid);
      check_hygiene(fitted[k]);
    },
    config.threads);
  for (const auto& f : fitted)
    out.bandwidths.push_back(f.bandwidth);

  out.estimates.resize(deltas.size());
  parallel_for(
    deltas.size(),
    [&](std::size_t i) {
      out.estimates[i] = combine_folds(data, *out.grid, fitted, Tilt(deltas[i]), config.alpha);
    },
    config.threads);
  return out;
}

IncrementalEstimate cross_fit_psi(const Dataset& data, Tilt tilt, const EstimatorConfig& config)
{
  const double d = tilt.delta();
  return estimate_curve(data, std::span<const double>(&d, 1), config).estimates.front();
}

} // namespace tiltwise
