#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tiltwise {

//! A regression fit. Immutable once constructed; predict() is reentrant.
//! Targets are a matrix so several regressions on the same features can share
//! work (one output column per target column).
class FittedRegressor
{
public:
  virtual ~FittedRegressor() = default;

  virtual std::size_t feature_count() const = 0;
  virtual std::size_t output_count() const = 0;

  //! One row per query, one column per output.
  virtual Eigen::MatrixXd predict(const Eigen::MatrixXd& features) const = 0;

  //! Output 0 on the product set {(covariates.row(i), a_d)}, where the
  //! treatment is the last feature. Result is covariates.rows() x a.size().
  virtual Eigen::MatrixXd predict_product(const Eigen::MatrixXd& covariates,
                                          std::span<const double> treatments) const;
};

class Regressor
{
public:
  virtual ~Regressor() = default;

  virtual std::string name() const = 0;

  virtual std::shared_ptr<const FittedRegressor> fit(const Eigen::MatrixXd& features,
                                                     const Eigen::MatrixXd& targets) const = 0;
};

//! Nadaraya-Watson smoother with a product Gaussian kernel. Bandwidths
//! default to Scott's rule, scale * sd_j * n^(-1/(p+4)).
class NadarayaWatson final : public Regressor
{
public:
  struct Options
  {
    double bandwidth_scale = 1.0;
    std::optional<std::vector<double>> bandwidths;
  };

  NadarayaWatson() = default;
  explicit NadarayaWatson(Options options);

  std::string name() const override { return "nw"; }
  std::shared_ptr<const FittedRegressor> fit(const Eigen::MatrixXd& features,
                                             const Eigen::MatrixXd& targets) const override;

  //! Scott's-rule bandwidths for the given features.
  static std::vector<double> rule_of_thumb(const Eigen::MatrixXd& features, double scale = 1.0);

private:
  Options options_;
};

//! Average of the k nearest training targets under standardized Euclidean
//! distance. k defaults to round(sqrt(n)). Ties break toward lower row index.
class NearestNeighbors final : public Regressor
{
public:
  explicit NearestNeighbors(std::optional<std::size_t> k = std::nullopt);

  std::string name() const override { return "knn"; }
  std::shared_ptr<const FittedRegressor> fit(const Eigen::MatrixXd& features,
                                             const Eigen::MatrixXd& targets) const override;

private:
  std::optional<std::size_t> k_;
};

//! Ridge regression on standardized features with an unpenalized intercept.
class Ridge final : public Regressor
{
public:
  explicit Ridge(double penalty = 1e-3);

  std::string name() const override { return "ridge"; }
  std::shared_ptr<const FittedRegressor> fit(const Eigen::MatrixXd& features,
                                             const Eigen::MatrixXd& targets) const override;

private:
  double penalty_;
};

//! "nw", "knn" or "ridge".
std::shared_ptr<const Regressor> make_learner(std::string_view name);

} // namespace tiltwise
