#pragma once

#include "tiltwise/dataset.hpp"
#include "tiltwise/dgp.hpp"
#include "tiltwise/estimator.hpp"
#include "tiltwise/tilt.hpp"

#include <cstddef>
#include <optional>

namespace tiltwise {

enum class EdgeSide
{
  upper, // E[Y^1], positive tilt
  lower  // E[Y^0], negative tilt
};

struct HalfSampleEstimate
{
  std::size_t n;
  double support_lo; // stored treatment scale of the parent dataset
  double support_hi;
  double delta;
  double estimate;
  double se;
};

//! Dose response at an edge or an interior point. Treatment values are on the
//! dataset's stored scale.
struct DoseResponseEstimate
{
  enum class Target
  {
    upper_edge,
    lower_edge,
    interior
  };

  Target target;
  double a_prime;
  double delta_used; // magnitude; the edge sign follows from target
  double estimate;
  double se;
  std::optional<HalfSampleEstimate> lower_half;
  std::optional<HalfSampleEstimate> upper_half;
};

inline constexpr std::size_t kMinHalfRows = 50;

//! psi(+-c n^(1/3)) by cross-fitting.
DoseResponseEstimate estimate_edge(const Dataset& data, EdgeSide side, double c,
                                   const EstimatorConfig& config);

//! Units with A <= a' are mapped to [0, 1] over [min A, a'] and tilted up;
//! units with A > a' are mapped over [a', max A] and tilted down. The estimate
//! is the plain average of the two halves.
DoseResponseEstimate estimate_at_point(const Dataset& data, double a_prime, double c,
                                       const EstimatorConfig& config);

//! sigma2_hat / delta from cross-fitted influence values.
double sigma_delta_ratio(const Dataset& data, Tilt tilt, const EstimatorConfig& config);
//! Efficiency bound / delta from the oracle.
double sigma_delta_ratio(const DgpSpec& dgp, Tilt tilt);

} // namespace tiltwise
