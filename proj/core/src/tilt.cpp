#include "tiltwise/tilt.hpp"

#include "tiltwise/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace tiltwise {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct TiltedMoments
{
  double mean;
  double variance;
  double third;
};

TiltedMoments moments_of(const TiltedSlice& tilted)
{
  const auto points = tilted.grid->points();
  const auto weights = tilted.grid->weights();
  double mean = 0.0;
  for (std::size_t d = 0; d < points.size(); ++d)
    mean += weights[d] * tilted.values[d] * points[d];
  double m2 = 0.0;
  double m3 = 0.0;
  for (std::size_t d = 0; d < points.size(); ++d) {
    const double c = points[d] - mean;
    const double wq = weights[d] * tilted.values[d];
    m2 += wq * c * c;
    m3 += wq * c * c * c;
  }
  return {mean, m2, m3};
}

} // namespace

Tilt::Tilt(double delta)
  : delta_(delta)
{
  if (!std::isfinite(delta))
    throw Error(ErrorCode::NonFiniteTilt, "tilt delta must be finite");
}

ConditionalDensitySlice::ConditionalDensitySlice(SharedGrid grid,
                                                 std::vector<double> values,
                                                 std::optional<double> tol_norm)
  : grid_(std::move(grid))
  , values_(std::move(values))
{
  if (!grid_)
    throw Error(ErrorCode::InvalidSlice, "slice needs a grid");
  if (values_.size() != grid_->size())
    throw Error(ErrorCode::InvalidSlice, "slice has " + std::to_string(values_.size()) +
                                           " values for " + std::to_string(grid_->size()) +
                                           " grid points");
  for (double v : values_)
    if (!std::isfinite(v) || v < 0.0)
      throw Error(ErrorCode::InvalidSlice, "slice values must be finite and nonnegative");
  if (tol_norm) {
    const double m = mass();
    if (std::abs(m - 1.0) > *tol_norm)
      throw Error(ErrorCode::InvalidSlice,
                  "slice integrates to " + std::to_string(m) + ", outside tolerance");
  }
}

double ConditionalDensitySlice::mass() const noexcept
{
  const auto w = grid_->weights();
  double total = 0.0;
  for (std::size_t d = 0; d < values_.size(); ++d)
    total += w[d] * values_[d];
  return total;
}

double ConditionalDensitySlice::value_at(double a) const
{
  if (!(a >= grid_->lo() && a <= grid_->hi()))
    throw Error(ErrorCode::OutOfSupportQuery, "query outside the grid hull");
  std::size_t left = 0;
  double t = 0.0;
  if (!grid_->locate(a, left, t))
    return 0.0;
  if (t == 0.0)
    return values_[left];
  if (t == 1.0)
    return values_[left + 1];
  return (1.0 - t) * values_[left] + t * values_[left + 1];
}

double TiltedSlice::normalizer() const
{
  if (cumulant > std::log(std::numeric_limits<double>::max()))
    throw Error(ErrorCode::OverflowRisk, "tilt normalizer overflows double precision");
  return std::exp(cumulant);
}

double log_sum_exp(std::span<const double> terms)
{
  double peak = kNegInf;
  for (double t : terms)
    peak = std::max(peak, t);
  if (peak == kNegInf)
    return kNegInf;
  double acc = 0.0;
  for (double t : terms)
    acc += std::exp(t - peak);
  return peak + std::log(acc);
}

double log_tilt_normalizer(const ConditionalDensitySlice& slice, Tilt tilt)
{
  const auto points = slice.grid().points();
  const auto weights = slice.grid().weights();
  const auto values = slice.values();
  std::vector<double> terms;
  terms.reserve(points.size());
  for (std::size_t d = 0; d < points.size(); ++d)
    if (values[d] > 0.0 && weights[d] > 0.0)
      terms.push_back(std::log(weights[d]) + std::log(values[d]) + tilt.delta() * points[d]);
  if (terms.empty())
    throw Error(ErrorCode::IdenticallyZeroDensity, "density slice is identically zero");
  return log_sum_exp(terms);
}

double tilt_normalizer(const ConditionalDensitySlice& slice, Tilt tilt)
{
  const double kappa = log_tilt_normalizer(slice, tilt);
  if (kappa > std::log(std::numeric_limits<double>::max()))
    throw Error(ErrorCode::OverflowRisk, "tilt normalizer overflows double precision");
  return std::exp(kappa);
}

TiltedSlice tilt_density(const ConditionalDensitySlice& slice, Tilt tilt)
{
  const double kappa = log_tilt_normalizer(slice, tilt);
  const auto points = slice.grid().points();
  const auto values = slice.values();
  std::vector<double> q(points.size(), 0.0);
  for (std::size_t d = 0; d < points.size(); ++d)
    if (values[d] > 0.0)
      q[d] = std::exp(std::log(values[d]) + tilt.delta() * points[d] - kappa);
  return {slice.shared_grid(), std::move(q), kappa};
}

double likelihood_ratio(const ConditionalDensitySlice& slice, Tilt tilt, double a)
{
  if (slice.value_at(a) <= 0.0)
    return 0.0;
  return std::exp(tilt.delta() * a - log_tilt_normalizer(slice, tilt));
}

double tilted_moment(const ConditionalDensitySlice& slice, Tilt tilt, int order,
                     Centering centering)
{
  if (order < 1 || order > 3)
    throw Error(ErrorCode::InvalidArgument, "moment order must be 1, 2 or 3");
  const TiltedSlice tilted = tilt_density(slice, tilt);
  if (centering == Centering::central) {
    const auto m = moments_of(tilted);
    switch (order) {
      case 1: return 0.0;
      case 2: return m.variance;
      default: return m.third;
    }
  }
  const auto points = tilted.grid->points();
  const auto weights = tilted.grid->weights();
  double acc = 0.0;
  for (std::size_t d = 0; d < points.size(); ++d)
    acc += weights[d] * tilted.values[d] * std::pow(points[d], order);
  return acc;
}

double kl_divergence(const ConditionalDensitySlice& slice, Tilt tilt)
{
  const TiltedSlice tilted = tilt_density(slice, tilt);
  const double mean = moments_of(tilted).mean;
  const double kappa0 = log_tilt_normalizer(slice, Tilt(0.0));
  return std::max(0.0, tilt.delta() * mean - tilted.cumulant + kappa0);
}

KlDerivatives kl_derivatives(const ConditionalDensitySlice& slice, Tilt tilt)
{
  const auto m = moments_of(tilt_density(slice, tilt));
  return {tilt.delta() * m.variance, m.variance + tilt.delta() * m.third};
}

} // namespace tiltwise
