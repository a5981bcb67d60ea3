#include "tiltwise/nuisance.hpp"

#include "tiltwise/error.hpp"
#include "tiltwise/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace tiltwise {

namespace {

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& m, std::span<const std::size_t> rows)
{
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

std::vector<double> gather(const Eigen::VectorXd& v, std::span<const std::size_t> rows)
{
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out[i] = v(static_cast<Eigen::Index>(rows[i]));
  return out;
}

std::vector<std::size_t> sorted_rows(std::span<const std::size_t> rows, std::size_t n)
{
  std::vector<std::size_t> out(rows.begin(), rows.end());
  std::sort(out.begin(), out.end());
  if (std::adjacent_find(out.begin(), out.end()) != out.end())
    throw Error(ErrorCode::InvalidArgument, "training rows contain duplicates");
  if (!out.empty() && out.back() >= n)
    throw Error(ErrorCode::InvalidArgument, "training row index out of range");
  return out;
}

void require_fold_size(std::size_t rows)
{
  if (rows < kMinFoldRows)
    throw Error(ErrorCode::DegenerateFold, "training fold has " + std::to_string(rows) +
                                             " rows; at least " + std::to_string(kMinFoldRows) +
                                             " are required");
}

void require_bandwidth(double h)
{
  if (!(h > 0.0) || !std::isfinite(h))
    throw Error(ErrorCode::NonpositiveBandwidth, "bandwidth must be positive and finite");
}

Eigen::MatrixXd transform_matrix(std::span<const double> a, std::span<const double> design,
                                 double h, Kernel kernel)
{
  Eigen::MatrixXd t(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(design.size()));
  for (std::size_t d = 0; d < design.size(); ++d)
    t.col(static_cast<Eigen::Index>(d)) = kernel_transform_targets(a, design[d], h, kernel);
  return t;
}

} // namespace

double kernel_value(Kernel kernel, double z) noexcept
{
  switch (kernel) {
    case Kernel::gaussian:
      return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
    case Kernel::epanechnikov:
      return std::abs(z) < 1.0 ? 0.75 * (1.0 - z * z) : 0.0;
  }
  return 0.0;
}

Eigen::VectorXd kernel_transform_targets(std::span<const double> a, double a_d, double h,
                                         Kernel kernel)
{
  require_bandwidth(h);
  Eigen::VectorXd out(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    out(static_cast<Eigen::Index>(i)) = kernel_value(kernel, (a[i] - a_d) / h) / h;
  return out;
}

// -- outcome -----------------------------------------------------------------

OutcomeModel::OutcomeModel(std::shared_ptr<const FittedRegressor> fitted, std::size_t fold,
                           std::vector<std::size_t> training_rows)
  : fitted_(std::move(fitted))
  , fold_(fold)
  , rows_(std::move(training_rows))
{
  std::sort(rows_.begin(), rows_.end());
}

bool OutcomeModel::trained_on(std::size_t row) const
{
  return std::binary_search(rows_.begin(), rows_.end(), row);
}

Eigen::VectorXd OutcomeModel::predict(const Eigen::MatrixXd& covariates,
                                      const Eigen::VectorXd& treatment) const
{
  if (covariates.rows() != treatment.size())
    throw Error(ErrorCode::InvalidArgument, "covariates and treatment disagree in length");
  Eigen::MatrixXd features(covariates.rows(), covariates.cols() + 1);
  features << covariates, treatment;
  return fitted_->predict(features).col(0);
}

Eigen::MatrixXd OutcomeModel::predict_grid(const Eigen::MatrixXd& covariates,
                                           const SupportGrid& grid) const
{
  return fitted_->predict_product(covariates, grid.points());
}

OutcomeModel fit_outcome_regression(const Regressor& learner, const Dataset& data,
                                    std::span<const std::size_t> rows, std::size_t fold)
{
  auto train = sorted_rows(rows, data.size());
  require_fold_size(train.size());
  const Eigen::MatrixXd x = gather_rows(data.covariates(), train);
  Eigen::MatrixXd features(x.rows(), x.cols() + 1);
  Eigen::MatrixXd targets(x.rows(), 1);
  features.leftCols(x.cols()) = x;
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(train[i]);
    features(static_cast<Eigen::Index>(i), x.cols()) = data.treatment()(r);
    targets(static_cast<Eigen::Index>(i), 0) = data.outcome()(r);
  }
  return OutcomeModel(learner.fit(features, targets), fold, std::move(train));
}

// -- density -----------------------------------------------------------------

DensityModel::DensityModel(std::shared_ptr<const FittedRegressor> fitted, SharedGrid grid,
                           double bandwidth, Kernel kernel, std::size_t fold,
                           std::vector<std::size_t> training_rows)
  : fitted_(std::move(fitted))
  , grid_(std::move(grid))
  , bandwidth_(bandwidth)
  , kernel_(kernel)
  , fold_(fold)
  , rows_(std::move(training_rows))
{
  require_bandwidth(bandwidth_);
  std::sort(rows_.begin(), rows_.end());
}

bool DensityModel::trained_on(std::size_t row) const
{
  return std::binary_search(rows_.begin(), rows_.end(), row);
}

Eigen::MatrixXd DensityModel::evaluate(const Eigen::MatrixXd& covariates) const
{
  return fitted_->predict(covariates).cwiseMax(0.0);
}

ConditionalDensitySlice DensityModel::slice(const Eigen::RowVectorXd& x,
                                            std::optional<double> tol_norm) const
{
  const Eigen::MatrixXd row = evaluate(Eigen::MatrixXd(x));
  std::vector<double> values(row.data(), row.data() + row.size());
  return ConditionalDensitySlice(grid_, std::move(values), tol_norm);
}

DensityModel fit_conditional_density(const Regressor& learner, const Dataset& data, SharedGrid grid,
                                     double h, std::span<const std::size_t> rows, std::size_t fold,
                                     Kernel kernel)
{
  require_bandwidth(h);
  if (!grid)
    throw Error(ErrorCode::InvalidGrid, "density fit needs a grid");
  auto train = sorted_rows(rows, data.size());
  require_fold_size(train.size());
  const Eigen::MatrixXd x = gather_rows(data.covariates(), train);
  const auto a = gather(data.treatment(), train);
  const Eigen::MatrixXd targets = transform_matrix(a, grid->points(), h, kernel);
  return DensityModel(learner.fit(x, targets), std::move(grid), h, kernel, fold, std::move(train));
}

std::vector<double> log_spaced(double lo, double hi, std::size_t count)
{
  if (count == 0)
    return {};
  if (!(lo > 0.0) || !(hi >= lo))
    throw Error(ErrorCode::InvalidArgument, "log spacing needs 0 < lo <= hi");
  if (count == 1)
    return {lo};
  std::vector<double> out(count);
  const double step = std::log(hi / lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i)
    out[i] = lo * std::exp(step * static_cast<double>(i));
  out.back() = hi;
  return out;
}

BandwidthSelection select_bandwidth_cv(const Dataset& data, const SupportGrid& grid,
                                       std::span<const double> candidates, std::size_t folds,
                                       const Regressor& learner,
                                       std::span<const std::size_t> rows, std::uint64_t seed,
                                       std::size_t cv_points, Kernel kernel)
{
  if (candidates.empty())
    throw Error(ErrorCode::EmptyCandidateSet, "no candidate bandwidths");
  for (double h : candidates)
    require_bandwidth(h);
  BandwidthSelection out{candidates.front(), {candidates.begin(), candidates.end()},
                         std::vector<double>(candidates.size(), 0.0)};
  if (candidates.size() == 1)
    return out;
  if (folds < 2)
    throw Error(ErrorCode::InvalidArgument, "bandwidth CV needs at least two folds");

  auto pool = sorted_rows(rows, data.size());
  require_fold_size(pool.size());
  auto engine = make_engine(seed, {0x62616e64});
  shuffle(pool, engine);

  // evenly spaced subsample of the design points
  cv_points = std::clamp<std::size_t>(cv_points, 1, grid.size());
  std::vector<double> design(cv_points);
  for (std::size_t c = 0; c < cv_points; ++c) {
    const auto idx = static_cast<std::size_t>((static_cast<double>(c) + 0.5) /
                                              static_cast<double>(cv_points) *
                                              static_cast<double>(grid.size()));
    design[c] = grid.points()[std::min(idx, grid.size() - 1)];
  }
  const double h_ref = *std::min_element(candidates.begin(), candidates.end()) / 2.0;
  const auto nh = static_cast<Eigen::Index>(candidates.size());
  const auto nc = static_cast<Eigen::Index>(cv_points);

  for (std::size_t k = 0; k < folds; ++k) {
    std::vector<std::size_t> train;
    std::vector<std::size_t> held;
    for (std::size_t i = 0; i < pool.size(); ++i)
      (i % folds == k ? held : train).push_back(pool[i]);
    std::sort(train.begin(), train.end());
    std::sort(held.begin(), held.end());
    require_fold_size(train.size());
    if (held.empty())
      continue;

    const auto a_train = gather(data.treatment(), train);
    const auto a_held = gather(data.treatment(), held);
    Eigen::MatrixXd targets(static_cast<Eigen::Index>(train.size()), nh * nc);
    for (Eigen::Index j = 0; j < nh; ++j)
      targets.middleCols(j * nc, nc) =
        transform_matrix(a_train, design, candidates[static_cast<std::size_t>(j)], kernel);
    const Eigen::MatrixXd reference = transform_matrix(a_held, design, h_ref, kernel);

    const auto fitted = learner.fit(gather_rows(data.covariates(), train), targets);
    const Eigen::MatrixXd f = fitted->predict(gather_rows(data.covariates(), held)).cwiseMax(0.0);
    for (Eigen::Index j = 0; j < nh; ++j) {
      const auto block = f.middleCols(j * nc, nc);
      out.scores[static_cast<std::size_t>(j)] +=
        (block.array().square() - 2.0 * reference.array() * block.array()).sum();
    }
  }

  double best = out.scores.front();
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    const double s = out.scores[j];
    if (s < best || (s == best && candidates[j] > out.bandwidth)) {
      best = s;
      out.bandwidth = candidates[j];
    }
  }
  return out;
}

// -- nu / eta ----------------------------------------------------------------

NuEtaModels fit_nu_eta(const Regressor& learner, const Dataset& data, Tilt tilt,
                       const OutcomeModel& mu, std::span<const std::size_t> rows)
{
  auto train = sorted_rows(rows, data.size());
  if (train.empty())
    throw Error(ErrorCode::DegenerateFold, "empty training fold");
  require_fold_size(train.size());
  const double delta = tilt.delta();
  double max_abs_a = 0.0;
  for (std::size_t r : train)
    max_abs_a = std::max(max_abs_a, std::abs(data.treatment()(static_cast<Eigen::Index>(r))));
  if (std::abs(delta) * max_abs_a > 300.0)
    throw Error(ErrorCode::OverflowRisk, "|delta| max|A| exceeds 300");

  const Eigen::MatrixXd x = gather_rows(data.covariates(), train);
  Eigen::VectorXd a(x.rows());
  for (std::size_t i = 0; i < train.size(); ++i)
    a(static_cast<Eigen::Index>(i)) = data.treatment()(static_cast<Eigen::Index>(train[i]));
  const Eigen::VectorXd e = (delta * a.array()).exp();
  const Eigen::VectorXd m = mu.predict(x, a);
  return {learner.fit(x, Eigen::MatrixXd(e)), learner.fit(x, Eigen::MatrixXd(e.cwiseProduct(m)))};
}

// -- tilt quantities ---------------------------------------------------------

TiltQuantities tilt_quantities(const SupportGrid& grid, const Eigen::MatrixXd& pi_grid,
                               const Eigen::MatrixXd& mu_grid, Tilt tilt)
{
  const auto nd = static_cast<Eigen::Index>(grid.size());
  if (pi_grid.cols() != nd || mu_grid.cols() != nd || pi_grid.rows() != mu_grid.rows())
    throw Error(ErrorCode::InvalidArgument, "nuisance grids do not match the support grid");
  const double delta = tilt.delta();
  const auto pts = grid.points();
  const auto w = grid.weights();
  const double a_ref = delta >= 0.0 ? grid.hi() : grid.lo();

  Eigen::VectorXd s(nd);
  for (Eigen::Index d = 0; d < nd; ++d)
    s(d) = w[static_cast<std::size_t>(d)] * std::exp(delta * (pts[static_cast<std::size_t>(d)] - a_ref));
  const Eigen::VectorXd wv = Eigen::Map<const Eigen::VectorXd>(w.data(), nd);
  const double total_w = wv.sum();

  TiltQuantities out;
  out.a_ref = a_ref;
  out.ratio_scale = pi_grid * s;
  const Eigen::VectorXd num = pi_grid.cwiseProduct(mu_grid) * s;
  out.xi.resize(pi_grid.rows());
  out.floored.assign(static_cast<std::size_t>(pi_grid.rows()), false);
  for (Eigen::Index i = 0; i < pi_grid.rows(); ++i) {
    const double den = out.ratio_scale(i);
    out.xi(i) = den > 0.0 ? num(i) / den : mu_grid.row(i).dot(wv) / total_w;
    if (!(den >= kNuFloor)) {
      out.ratio_scale(i) = kNuFloor;
      out.floored[static_cast<std::size_t>(i)] = true;
    }
  }
  return out;
}

NuHat compute_nu_hat(const DensityModel& density, Tilt tilt, const Eigen::RowVectorXd& x)
{
  const Eigen::MatrixXd pi = density.evaluate(Eigen::MatrixXd(x));
  const Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(1, pi.cols());
  const auto q = tilt_quantities(density.grid(), pi, mu, tilt);
  return {q.ratio_scale(0) * std::exp(tilt.delta() * q.a_ref), q.floored.front()};
}

double compute_xi_hat(const OutcomeModel& mu, const DensityModel& density, Tilt tilt,
                      const Eigen::RowVectorXd& x)
{
  const Eigen::MatrixXd xm(x);
  const Eigen::MatrixXd pi = density.evaluate(xm);
  const Eigen::MatrixXd m = mu.predict_grid(xm, density.grid());
  return tilt_quantities(density.grid(), pi, m, tilt).xi(0);
}

} // namespace tiltwise
