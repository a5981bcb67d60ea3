#include "tiltwise/dose_response.hpp"

#include "tiltwise/error.hpp"
#include "tiltwise/parallel.hpp"
#include "tiltwise/simlab.hpp"

#include <algorithm>
#include <cmath>

namespace tiltwise {

namespace {

double schedule(std::size_t n, double c)
{
  if (!(c > 0.0) || !std::isfinite(c))
    throw Error(ErrorCode::InvalidArgument, "schedule constant must be positive");
  return c * std::cbrt(static_cast<double>(n));
}

HalfSampleEstimate run_half(const Dataset& data, const std::vector<std::size_t>& rows, double lo,
                            double hi, EdgeSide side, double c, const EstimatorConfig& config)
{
  const Dataset half = data.subset(rows).rescaled_to(lo, hi);
  EstimatorConfig cfg = config;
  cfg.support = {{0.0, 1.0}};
  cfg.min_rows = kMinHalfRows;
  cfg.folds = std::clamp<std::size_t>(rows.size() / kMinFoldRows, 2, config.folds);
  const auto est = estimate_edge(half, side, c, cfg);
  return {rows.size(), lo, hi, est.delta_used, est.estimate, est.se};
}

} // namespace

DoseResponseEstimate estimate_edge(const Dataset& data, EdgeSide side, double c,
                                   const EstimatorConfig& config)
{
  if (data.size() < config.min_rows)
    throw Error(ErrorCode::TooFewRows, "edge estimation needs at least " +
                                         std::to_string(config.min_rows) + " rows");
  const double delta = schedule(data.size(), c);
  const auto est =
    cross_fit_psi(data, Tilt(side == EdgeSide::upper ? delta : -delta), config);
  const auto grid = estimation_grid(data, config);
  DoseResponseEstimate out;
  out.target = side == EdgeSide::upper ? DoseResponseEstimate::Target::upper_edge
                                       : DoseResponseEstimate::Target::lower_edge;
  out.a_prime = side == EdgeSide::upper ? grid->hi() : grid->lo();
  out.delta_used = delta;
  out.estimate = est.psi_hat;
  out.se = est.se;
  return out;
}

DoseResponseEstimate estimate_at_point(const Dataset& data, double a_prime, double c,
                                       const EstimatorConfig& config)
{
  const auto grid = estimation_grid(data, config);
  if (!(a_prime > grid->lo() && a_prime < grid->hi()))
    throw Error(ErrorCode::InteriorPointRequired,
                "a' must lie strictly inside the treatment support");

  std::vector<std::size_t> lower;
  std::vector<std::size_t> upper;
  double lower_min = a_prime;
  double upper_max = a_prime;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double a = data.treatment()(static_cast<Eigen::Index>(i));
    if (a <= a_prime) {
      lower.push_back(i);
      lower_min = std::min(lower_min, a);
    } else {
      upper.push_back(i);
      upper_max = std::max(upper_max, a);
    }
  }
  if (lower.size() < kMinHalfRows || upper.size() < kMinHalfRows)
    throw Error(ErrorCode::EmptyHalfSample,
                "half samples have " + std::to_string(lower.size()) + " and " +
                  std::to_string(upper.size()) + " rows; each needs " +
                  std::to_string(kMinHalfRows));
  if (!(lower_min < a_prime))
    throw Error(ErrorCode::EmptyHalfSample, "lower half sample has no treatment spread");

  std::optional<HalfSampleEstimate> halves[2];
  parallel_for(
    2,
    [&](std::size_t h) {
      halves[h] = h == 0 ? run_half(data, lower, lower_min, a_prime, EdgeSide::upper, c, config)
                         : run_half(data, upper, a_prime, upper_max, EdgeSide::lower, c, config);
    },
    config.threads);

  DoseResponseEstimate out;
  out.target = DoseResponseEstimate::Target::interior;
  out.a_prime = a_prime;
  out.delta_used = 0.5 * (halves[0]->delta + halves[1]->delta);
  out.estimate = 0.5 * (halves[0]->estimate + halves[1]->estimate);
  out.se = 0.5 * std::hypot(halves[0]->se, halves[1]->se);
  out.lower_half = halves[0];
  out.upper_half = halves[1];
  return out;
}

double sigma_delta_ratio(const Dataset& data, Tilt tilt, const EstimatorConfig& config)
{
  if (!(tilt.delta() > 0.0))
    throw Error(ErrorCode::PositiveDeltaRequired, "sigma_delta ratio needs delta > 0");
  return cross_fit_psi(data, tilt, config).sigma2_hat / tilt.delta();
}

double sigma_delta_ratio(const DgpSpec& dgp, Tilt tilt)
{
  if (!(tilt.delta() > 0.0))
    throw Error(ErrorCode::PositiveDeltaRequired, "sigma_delta ratio needs delta > 0");
  return oracle_efficiency_bound(dgp, tilt).value / tilt.delta();
}

} // namespace tiltwise
