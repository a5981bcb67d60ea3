#pragma once

#include "tiltwise/dataset.hpp"
#include "tiltwise/nuisance.hpp"
#include "tiltwise/support_grid.hpp"
#include "tiltwise/tilt.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tiltwise {

//! Fold assignment for cross-fitting.
struct FoldPlan
{
  std::size_t folds = 0;
  std::vector<std::size_t> assignment; // fold id per unit
  std::uint64_t seed = 0;

  std::vector<std::size_t> held_out(std::size_t k) const;
  std::vector<std::size_t> training(std::size_t k) const;
};

//! Near-equal folds from a seeded permutation. Needs K >= 2 and n >= 20 K.
FoldPlan split_folds(std::size_t n, std::size_t folds, std::uint64_t seed);

//! Nuisances for one fold, evaluated on that fold's held-out rows.
//! mu_grid and pi_grid are held_out.size() x grid.size().
struct FoldNuisances
{
  std::size_t fold = 0;
  std::vector<std::size_t> held_out;
  Eigen::MatrixXd mu_grid;
  Eigen::MatrixXd pi_grid;
  std::shared_ptr<const OutcomeModel> mu;       // empty for injected nuisances
  std::shared_ptr<const DensityModel> density;  // empty for injected nuisances
  std::optional<double> bandwidth;
};

//! Produces fold nuisances. Implementations must only use training rows of the
//! fold (injected truths use none).
class NuisanceSource
{
public:
  virtual ~NuisanceSource() = default;
  virtual std::string name() const = 0;
  virtual FoldNuisances fit(const Dataset& data, const FoldPlan& plan, std::size_t fold,
                            const SharedGrid& grid) const = 0;
};

struct LearnedOptions
{
  std::string outcome_learner = "nw";
  std::string density_learner = "nw";
  //! Empty means log_spaced(0.02, 0.5, 12).
  std::vector<double> bandwidths;
  std::size_t cv_folds = 5;
  std::size_t cv_points = 10;
  Kernel kernel = Kernel::gaussian;
};

//! muhat and pihat fitted on the training rows, bandwidth chosen by CV.
class LearnedNuisances final : public NuisanceSource
{
public:
  explicit LearnedNuisances(LearnedOptions options = {}, std::uint64_t seed = 0);

  std::string name() const override { return "learned"; }
  FoldNuisances fit(const Dataset& data, const FoldPlan& plan, std::size_t fold,
                    const SharedGrid& grid) const override;

private:
  LearnedOptions options_;
  std::uint64_t seed_;
};

struct FoldDiagnostics
{
  std::size_t floor_engaged = 0;
  std::size_t large_ratios = 0; // likelihood ratios above 1e6
  double max_ratio = 0.0;
};

struct FoldEstimate
{
  std::size_t fold;
  double psi;
  std::vector<std::size_t> rows;
  std::vector<double> influence; // per held-out unit, same order as rows
  FoldDiagnostics diagnostics;
};

//! psi_k = mean over fold k of ratio (Y - xi) + xi. Throws EmptyFold.
FoldEstimate fold_psi_hat(const Dataset& data, const SupportGrid& grid, const FoldNuisances& nuis,
                          Tilt tilt);

//! Per-unit influence values of one tilt, in unit order.
struct InfluenceValues
{
  std::vector<double> values;
  std::vector<std::size_t> folds;
};

//! Pooled sample variance. Throws TooFewValues below two values.
double influence_variance(const InfluenceValues& values);

struct IncrementalEstimate
{
  double delta = 0.0;
  double psi_hat = 0.0;
  double sigma2_hat = 0.0;
  double se = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  std::size_t n = 0;
  std::vector<double> fold_psi;
  FoldDiagnostics diagnostics; // summed over folds, max over folds
};

struct EstimatorConfig
{
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  double alpha = 0.05;
  double points_per_unit = SupportGrid::kDefaultPointsPerUnit;
  std::optional<std::size_t> design_points; // per interval; overrides points_per_unit
  std::vector<Interval> support;            // empty: observed treatment range
  std::size_t min_rows = 100;
  std::shared_ptr<const NuisanceSource> nuisances; // empty: LearnedNuisances(learned, seed)
  LearnedOptions learned;
  std::size_t threads = 0; // 0: worker_count()
};

struct CurveResult
{
  std::vector<IncrementalEstimate> estimates;
  FoldPlan plan;
  std::vector<std::optional<double>> bandwidths; // per fold
  SharedGrid grid;
};

//! Support grid the estimator uses for `data` under `config`.
SharedGrid estimation_grid(const Dataset& data, const EstimatorConfig& config);

//! Cross-fitted estimates over a sorted delta grid. Nuisances are fitted once
//! per fold and shared by every delta.
CurveResult estimate_curve(const Dataset& data, std::span<const double> deltas,
                           const EstimatorConfig& config);

//! Same as estimate_curve for one delta.
IncrementalEstimate cross_fit_psi(const Dataset& data, Tilt tilt, const EstimatorConfig& config);

//! Per-delta step on already fitted nuisances; `influence` receives the unit
//! values when given.
IncrementalEstimate combine_folds(const Dataset& data, const SupportGrid& grid,
                                  std::span<const FoldNuisances> nuisances, Tilt tilt, double alpha,
                                  InfluenceValues* influence = nullptr);

} // namespace tiltwise
