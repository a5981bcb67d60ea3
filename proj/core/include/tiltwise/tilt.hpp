#pragma once

#include "tiltwise/support_grid.hpp"

#include <optional>
#include <span>
#include <vector>

namespace tiltwise {

//! Tilt magnitude. Any finite real; the sign selects the direction.
class Tilt
{
public:
  explicit Tilt(double delta);

  double delta() const noexcept { return delta_; }

private:
  double delta_;
};

//! pi(. | x) evaluated on a support grid for one covariate value.
class ConditionalDensitySlice
{
public:
  static constexpr double kEstimatedTolerance = 0.05;
  static constexpr double kAnalyticTolerance = 1e-8;

  //! Values must be finite and nonnegative. When `tol_norm` is set the
  //! quadrature integral must lie within 1 +- tol_norm.
  ConditionalDensitySlice(SharedGrid grid,
                          std::vector<double> values,
                          std::optional<double> tol_norm = kEstimatedTolerance);

  static ConditionalDensitySlice analytic(SharedGrid grid, std::vector<double> values)
  {
    return {std::move(grid), std::move(values), kAnalyticTolerance};
  }

  const SupportGrid& grid() const noexcept { return *grid_; }
  const SharedGrid& shared_grid() const noexcept { return grid_; }
  std::span<const double> values() const noexcept { return values_; }

  //! Quadrature integral of the slice.
  double mass() const noexcept;

  //! Linear interpolation between grid points; 0 inside holes.
  //! Throws OutOfSupportQuery outside the grid hull.
  double value_at(double a) const;

private:
  SharedGrid grid_;
  std::vector<double> values_;
};

//! q_delta(. | x) on the grid, with the cumulant kappa = log(normalizer).
struct TiltedSlice
{
  SharedGrid grid;
  std::vector<double> values;
  double cumulant;

  //! exp(cumulant). Throws OverflowRisk when it is not representable.
  double normalizer() const;
};

//! log of sum_d w_d exp(delta a_d) pi_d, accumulated in log space.
double log_tilt_normalizer(const ConditionalDensitySlice& slice, Tilt tilt);

//! sum_d w_d exp(delta a_d) pi_d.
double tilt_normalizer(const ConditionalDensitySlice& slice, Tilt tilt);

TiltedSlice tilt_density(const ConditionalDensitySlice& slice, Tilt tilt);

//! q/pi at a: exp(delta a) / normalizer where pi(a|x) > 0, and 0 where the
//! density vanishes.
double likelihood_ratio(const ConditionalDensitySlice& slice, Tilt tilt, double a);

enum class Centering
{
  raw,
  central
};

//! Raw or central moment of order 1, 2 or 3 under the tilted slice.
double tilted_moment(const ConditionalDensitySlice& slice, Tilt tilt, int order,
                     Centering centering = Centering::raw);

//! KL(q_delta || pi) = delta E_Q[A] - kappa(delta) + kappa(0). The kappa(0)
//! term normalizes pi by its quadrature mass and vanishes for exact slices.
double kl_divergence(const ConditionalDensitySlice& slice, Tilt tilt);

struct KlDerivatives
{
  double first;   // delta var_Q(A)
  double second;  // var_Q(A) + delta E_Q[(A - E_Q A)^3]
};

KlDerivatives kl_derivatives(const ConditionalDensitySlice& slice, Tilt tilt);

//! Numerically stable log(sum_i exp(x_i)). Returns -inf for an empty range
//! or when every term is -inf.
double log_sum_exp(std::span<const double> terms);

} // namespace tiltwise
