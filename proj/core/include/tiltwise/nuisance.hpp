#pragma once

#include "tiltwise/dataset.hpp"
#include "tiltwise/learners.hpp"
#include "tiltwise/support_grid.hpp"
#include "tiltwise/tilt.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace tiltwise {

enum class Kernel
{
  gaussian,
  epanechnikov
};

//! Smoothing kernel density at z.
double kernel_value(Kernel kernel, double z) noexcept;

//! h^-1 K((A_i - a_d) / h) for each unit.
Eigen::VectorXd kernel_transform_targets(std::span<const double> a, double a_d, double h,
                                         Kernel kernel = Kernel::gaussian);

//! Minimum training rows for any nuisance fit.
inline constexpr std::size_t kMinFoldRows = 20;

//! mu(x, a) = E[Y | X = x, A = a], fitted on one training fold.
class OutcomeModel
{
public:
  OutcomeModel(std::shared_ptr<const FittedRegressor> fitted, std::size_t fold,
               std::vector<std::size_t> training_rows);

  std::size_t fold() const noexcept { return fold_; }
  bool trained_on(std::size_t row) const;

  //! mu at (covariates.row(i), treatment(i)).
  Eigen::VectorXd predict(const Eigen::MatrixXd& covariates, const Eigen::VectorXd& treatment) const;
  //! mu at every (covariates.row(i), a_d); rows x grid points.
  Eigen::MatrixXd predict_grid(const Eigen::MatrixXd& covariates, const SupportGrid& grid) const;

private:
  std::shared_ptr<const FittedRegressor> fitted_;
  std::size_t fold_;
  std::vector<std::size_t> rows_;
};

//! Trains on `rows` of data; features are (X, A).
OutcomeModel fit_outcome_regression(const Regressor& learner, const Dataset& data,
                                    std::span<const std::size_t> rows, std::size_t fold = 0);

//! pi(a_d | x) by regressing kernel-transformed treatments on X, one output per
//! design point. The outputs share one fit, which is equivalent to a separate
//! regression per design point for any learner linear in its targets.
class DensityModel
{
public:
  DensityModel(std::shared_ptr<const FittedRegressor> fitted, SharedGrid grid, double bandwidth,
               Kernel kernel, std::size_t fold, std::vector<std::size_t> training_rows);

  const SupportGrid& grid() const noexcept { return *grid_; }
  const SharedGrid& shared_grid() const noexcept { return grid_; }
  double bandwidth() const noexcept { return bandwidth_; }
  Kernel kernel() const noexcept { return kernel_; }
  std::size_t fold() const noexcept { return fold_; }
  bool trained_on(std::size_t row) const;

  //! Rows x grid points, negatives clipped to 0.
  Eigen::MatrixXd evaluate(const Eigen::MatrixXd& covariates) const;
  //! One clipped slice. No mass check unless `tol_norm` is given.
  ConditionalDensitySlice slice(const Eigen::RowVectorXd& x,
                                std::optional<double> tol_norm = std::nullopt) const;

private:
  std::shared_ptr<const FittedRegressor> fitted_;
  SharedGrid grid_;
  double bandwidth_;
  Kernel kernel_;
  std::size_t fold_;
  std::vector<std::size_t> rows_;
};

DensityModel fit_conditional_density(const Regressor& learner, const Dataset& data, SharedGrid grid,
                                     double h, std::span<const std::size_t> rows,
                                     std::size_t fold = 0, Kernel kernel = Kernel::gaussian);

struct BandwidthSelection
{
  double bandwidth;
  std::vector<double> candidates;
  std::vector<double> scores; // per candidate, lower is better
};

//! Cross-validated bandwidth for the density regression.
//!
//! For held-out unit i and CV design point a_c the score adds
//! fhat_h(a_c|X_i)^2 - 2 T_ref(A_i; a_c) fhat_h(a_c|X_i), where T_ref is the
//! kernel transform at a reference bandwidth of min(candidates) / 2. Its
//! expectation is the squared error against the reference-smoothed density up
//! to a constant, so it does not reward oversmoothing the way raw squared error
//! on the noisy targets does. Ties go to the larger bandwidth.
BandwidthSelection select_bandwidth_cv(const Dataset& data, const SupportGrid& grid,
                                       std::span<const double> candidates, std::size_t folds,
                                       const Regressor& learner,
                                       std::span<const std::size_t> rows, std::uint64_t seed,
                                       std::size_t cv_points = 10,
                                       Kernel kernel = Kernel::gaussian);

//! Log-spaced candidates between lo and hi inclusive.
std::vector<double> log_spaced(double lo, double hi, std::size_t count);

//! Experimental ν/η parameterization: nu regresses exp(delta A) on X and eta
//! regresses exp(delta A) mu(X, A) on X. Less robust than the density route.
struct NuEtaModels
{
  std::shared_ptr<const FittedRegressor> nu;
  std::shared_ptr<const FittedRegressor> eta;
};

NuEtaModels fit_nu_eta(const Regressor& learner, const Dataset& data, Tilt tilt,
                       const OutcomeModel& mu, std::span<const std::size_t> rows);

//! Floor on the tilt normalizer, relative to the largest attainable integrand
//! max_d exp(delta a_d).
inline constexpr double kNuFloor = 1e-6;

struct NuHat
{
  double value;
  bool floor_engaged;
};

//! Quadrature normalizer sum_d w_d exp(delta a_d) pihat(a_d|x), floored.
NuHat compute_nu_hat(const DensityModel& density, Tilt tilt, const Eigen::RowVectorXd& x);

//! Quadrature mean of muhat(x, .) under the estimated tilted slice.
double compute_xi_hat(const OutcomeModel& mu, const DensityModel& density, Tilt tilt,
                      const Eigen::RowVectorXd& x);

//! Tilt quantities for many units at once from nuisance grids (rows are units).
//! ratio_scale(i) holds exp(-delta a_ref) nuhat_i with a_ref the grid end the
//! tilt points to, so exp(delta a) / nuhat = exp(delta (a - a_ref)) / ratio_scale.
struct TiltQuantities
{
  Eigen::VectorXd ratio_scale;
  Eigen::VectorXd xi;
  std::vector<bool> floored;
  double a_ref;
};

TiltQuantities tilt_quantities(const SupportGrid& grid, const Eigen::MatrixXd& pi_grid,
                               const Eigen::MatrixXd& mu_grid, Tilt tilt);

} // namespace tiltwise
