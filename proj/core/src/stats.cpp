#include "tiltwise/stats.hpp"

#include "tiltwise/error.hpp"

#include <boost/math/distributions/normal.hpp>

namespace tiltwise {

double mean(std::span<const double> values)
{
  if (values.empty())
    throw Error(ErrorCode::TooFewValues, "mean of an empty range");
  double s = 0.0;
  for (double v : values)
    s += v;
  return s / static_cast<double>(values.size());
}

double sample_variance(std::span<const double> values)
{
  if (values.size() < 2)
    throw Error(ErrorCode::TooFewValues, "variance needs at least two values");
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values)
    ss += (v - m) * (v - m);
  return ss / static_cast<double>(values.size() - 1);
}

double normal_quantile(double p)
{
  if (!(p > 0.0 && p < 1.0))
    throw Error(ErrorCode::InvalidArgument, "quantile level must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

LineFit fit_line(std::span<const double> x, std::span<const double> y)
{
  if (x.size() != y.size() || x.size() < 2)
    throw Error(ErrorCode::TooFewValues, "line fit needs two or more paired values");
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0)
    throw Error(ErrorCode::InvalidArgument, "line fit needs distinct x values");
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

} // namespace tiltwise
