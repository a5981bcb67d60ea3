#pragma once

#include <span>

namespace tiltwise {

double mean(std::span<const double> values);

//! Unbiased sample variance, accumulated in index order. Needs >= 2 values.
double sample_variance(std::span<const double> values);

//! Standard normal quantile.
double normal_quantile(double p);

struct LineFit
{
  double slope;
  double intercept;
};

//! Ordinary least squares y ~ intercept + slope * x.
LineFit fit_line(std::span<const double> x, std::span<const double> y);

} // namespace tiltwise
