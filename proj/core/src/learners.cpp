#include "tiltwise/learners.hpp"

#include "tiltwise/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

namespace tiltwise {

namespace {

constexpr Eigen::Index kBlockElements = Eigen::Index{1} << 22;

void check_fit_inputs(const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets)
{
  if (features.rows() == 0)
    throw Error(ErrorCode::DegenerateFold, "cannot fit a regressor on zero rows");
  if (features.rows() != targets.rows())
    throw Error(ErrorCode::InvalidArgument, "features and targets disagree in row count");
  if (targets.cols() == 0)
    throw Error(ErrorCode::InvalidArgument, "at least one target column is required");
  if (!features.allFinite() || !targets.allFinite())
    throw Error(ErrorCode::InvalidArgument, "regression inputs must be finite");
}

void check_query(const Eigen::MatrixXd& features, std::size_t expected)
{
  if (static_cast<std::size_t>(features.cols()) != expected)
    throw Error(ErrorCode::InvalidArgument, "query has the wrong number of features");
}

Eigen::Index block_rows(Eigen::Index train_rows)
{
  return std::max<Eigen::Index>(1, kBlockElements / std::max<Eigen::Index>(1, train_rows));
}

// Column means and standard deviations; zero spread maps to 1.
std::pair<Eigen::RowVectorXd, Eigen::RowVectorXd> standardization(const Eigen::MatrixXd& x)
{
  const Eigen::RowVectorXd mean = x.colwise().mean();
  Eigen::RowVectorXd sd(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double ss = (x.col(j).array() - mean(j)).square().sum();
    const double s = x.rows() > 1 ? std::sqrt(ss / static_cast<double>(x.rows() - 1)) : 0.0;
    sd(j) = s > 0.0 ? s : 1.0;
  }
  return {mean, sd};
}

class FittedNadarayaWatson final : public FittedRegressor
{
public:
  FittedNadarayaWatson(Eigen::MatrixXd features, Eigen::MatrixXd targets, std::vector<double> bw)
    : x_(std::move(features))
    , t_(std::move(targets))
    , inv_h_(static_cast<Eigen::Index>(bw.size()))
  {
    for (std::size_t k = 0; k < bw.size(); ++k)
      inv_h_(static_cast<Eigen::Index>(k)) = 1.0 / bw[k];
  }

  std::size_t feature_count() const override { return static_cast<std::size_t>(x_.cols()); }
  std::size_t output_count() const override { return static_cast<std::size_t>(t_.cols()); }

  Eigen::MatrixXd predict(const Eigen::MatrixXd& q) const override
  {
    check_query(q, feature_count());
    const Eigen::Index n = x_.rows();
    Eigen::MatrixXd out(q.rows(), t_.cols());
    const Eigen::Index step = block_rows(n);
    for (Eigen::Index start = 0; start < q.rows(); start += step) {
      const Eigen::Index b = std::min(step, q.rows() - start);
      Eigen::MatrixXd w = log_kernel(q.middleRows(start, b), x_.cols());
      normalize_rows(w);
      out.middleRows(start, b).noalias() = w * t_;
    }
    return out;
  }

  Eigen::MatrixXd predict_product(const Eigen::MatrixXd& covariates,
                                  std::span<const double> treatments) const override
  {
    const Eigen::Index p = x_.cols();
    check_query(covariates, feature_count() - 1);
    const Eigen::Index n = x_.rows();
    const auto na = static_cast<Eigen::Index>(treatments.size());

    // treatment factor, shared across covariate rows
    Eigen::MatrixXd la(na, n);
    for (Eigen::Index d = 0; d < na; ++d)
      for (Eigen::Index j = 0; j < n; ++j) {
        const double z = (treatments[static_cast<std::size_t>(d)] - x_(j, p - 1)) * inv_h_(p - 1);
        la(d, j) = -0.5 * z * z;
      }
    Eigen::MatrixXd ka = la;
    subtract_row_max_and_exp(ka);
    const Eigen::MatrixXd ka_t = ka.transpose();
    const Eigen::MatrixXd ka_ty = (ka.array().rowwise() * t_.col(0).transpose().array()).transpose();

    Eigen::MatrixXd out(covariates.rows(), na);
    const Eigen::Index step = block_rows(n);
    for (Eigen::Index start = 0; start < covariates.rows(); start += step) {
      const Eigen::Index b = std::min(step, covariates.rows() - start);
      const Eigen::MatrixXd lx = log_kernel(covariates.middleRows(start, b), p - 1);
      Eigen::MatrixXd kx = lx;
      subtract_row_max_and_exp(kx);
      const Eigen::MatrixXd den = kx * ka_t;
      const Eigen::MatrixXd num = kx * ka_ty;
      for (Eigen::Index i = 0; i < b; ++i)
        for (Eigen::Index d = 0; d < na; ++d) {
          if (den(i, d) > 1e-200) {
            out(start + i, d) = num(i, d) / den(i, d);
          } else {
            // the two factors peak at different rows; combine in log space
            out(start + i, d) = direct_entry(lx.row(i), la.row(d));
          }
        }
    }
    return out;
  }

private:
  // -0.5 * sum_k ((q_ik - x_jk) / h_k)^2 over the first `dims` features.
  Eigen::MatrixXd log_kernel(const Eigen::Ref<const Eigen::MatrixXd>& q, Eigen::Index dims) const
  {
    const Eigen::Index n = x_.rows();
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(q.rows(), n);
    for (Eigen::Index k = 0; k < dims; ++k) {
      const double s = inv_h_(k);
      for (Eigen::Index j = 0; j < n; ++j) {
        const double xj = x_(j, k);
        for (Eigen::Index i = 0; i < q.rows(); ++i) {
          const double z = (q(i, k) - xj) * s;
          l(i, j) -= 0.5 * z * z;
        }
      }
    }
    return l;
  }

  static void subtract_row_max_and_exp(Eigen::MatrixXd& m)
  {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const double peak = m.row(i).maxCoeff();
      m.row(i) = (m.row(i).array() - peak).exp();
    }
  }

  static void normalize_rows(Eigen::MatrixXd& m)
  {
    subtract_row_max_and_exp(m);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      m.row(i) /= m.row(i).sum();
  }

  double direct_entry(const Eigen::Ref<const Eigen::RowVectorXd>& lx,
                      const Eigen::Ref<const Eigen::RowVectorXd>& la) const
  {
    const Eigen::RowVectorXd l = lx + la;
    const double peak = l.maxCoeff();
    const Eigen::RowVectorXd w = (l.array() - peak).exp();
    return w.dot(t_.col(0)) / w.sum();
  }

  Eigen::MatrixXd x_;
  Eigen::MatrixXd t_;
  Eigen::VectorXd inv_h_;
};

class FittedNearestNeighbors final : public FittedRegressor
{
public:
  FittedNearestNeighbors(const Eigen::MatrixXd& features, Eigen::MatrixXd targets, std::size_t k)
    : t_(std::move(targets))
    , k_(std::min<std::size_t>(k, static_cast<std::size_t>(features.rows())))
  {
    std::tie(mean_, sd_) = standardization(features);
    z_ = (features.rowwise() - mean_).array().rowwise() / sd_.array();
  }

  std::size_t feature_count() const override { return static_cast<std::size_t>(z_.cols()); }
  std::size_t output_count() const override { return static_cast<std::size_t>(t_.cols()); }

  Eigen::MatrixXd predict(const Eigen::MatrixXd& q) const override
  {
    check_query(q, feature_count());
    const Eigen::Index n = z_.rows();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(q.rows(), t_.cols());
    std::vector<std::pair<double, Eigen::Index>> dist(static_cast<std::size_t>(n));
    const auto kk = static_cast<std::ptrdiff_t>(k_);
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
      const Eigen::RowVectorXd zq = (q.row(i) - mean_).array() / sd_.array();
      for (Eigen::Index j = 0; j < n; ++j)
        dist[static_cast<std::size_t>(j)] = {(z_.row(j) - zq).squaredNorm(), j};
      std::nth_element(dist.begin(), dist.begin() + (kk - 1), dist.end());
      std::sort(dist.begin(), dist.begin() + kk);
      for (std::ptrdiff_t r = 0; r < kk; ++r)
        out.row(i) += t_.row(dist[static_cast<std::size_t>(r)].second);
      out.row(i) /= static_cast<double>(k_);
    }
    return out;
  }

private:
  Eigen::MatrixXd z_;
  Eigen::MatrixXd t_;
  Eigen::RowVectorXd mean_;
  Eigen::RowVectorXd sd_;
  std::size_t k_;
};

class FittedRidge final : public FittedRegressor
{
public:
  FittedRidge(Eigen::RowVectorXd mean, Eigen::RowVectorXd sd, Eigen::RowVectorXd intercept,
              Eigen::MatrixXd beta)
    : mean_(std::move(mean))
    , sd_(std::move(sd))
    , intercept_(std::move(intercept))
    , beta_(std::move(beta))
  {}

  std::size_t feature_count() const override { return static_cast<std::size_t>(beta_.rows()); }
  std::size_t output_count() const override { return static_cast<std::size_t>(beta_.cols()); }

  Eigen::MatrixXd predict(const Eigen::MatrixXd& q) const override
  {
    check_query(q, feature_count());
    const Eigen::MatrixXd z = (q.rowwise() - mean_).array().rowwise() / sd_.array();
    Eigen::MatrixXd out = z * beta_;
    out.rowwise() += intercept_;
    return out;
  }

private:
  Eigen::RowVectorXd mean_;
  Eigen::RowVectorXd sd_;
  Eigen::RowVectorXd intercept_;
  Eigen::MatrixXd beta_;
};

} // namespace

Eigen::MatrixXd FittedRegressor::predict_product(const Eigen::MatrixXd& covariates,
                                                 std::span<const double> treatments) const
{
  const Eigen::Index nx = covariates.rows();
  const auto na = static_cast<Eigen::Index>(treatments.size());
  const Eigen::Index p = covariates.cols();
  Eigen::MatrixXd features(nx * na, p + 1);
  for (Eigen::Index i = 0; i < nx; ++i)
    for (Eigen::Index d = 0; d < na; ++d) {
      features.row(i * na + d).head(p) = covariates.row(i);
      features(i * na + d, p) = treatments[static_cast<std::size_t>(d)];
    }
  const Eigen::MatrixXd flat = predict(features);
  Eigen::MatrixXd out(nx, na);
  for (Eigen::Index i = 0; i < nx; ++i)
    for (Eigen::Index d = 0; d < na; ++d)
      out(i, d) = flat(i * na + d, 0);
  return out;
}

NadarayaWatson::NadarayaWatson(Options options)
  : options_(std::move(options))
{}

std::vector<double> NadarayaWatson::rule_of_thumb(const Eigen::MatrixXd& features, double scale)
{
  const auto n = static_cast<double>(features.rows());
  const auto p = static_cast<double>(features.cols());
  const double factor = scale * std::pow(n, -1.0 / (p + 4.0));
  const auto sd = standardization(features).second;
  std::vector<double> h(static_cast<std::size_t>(features.cols()));
  for (Eigen::Index j = 0; j < features.cols(); ++j)
    h[static_cast<std::size_t>(j)] = sd(j) * factor;
  return h;
}

std::shared_ptr<const FittedRegressor> NadarayaWatson::fit(const Eigen::MatrixXd& features,
                                                           const Eigen::MatrixXd& targets) const
{
  check_fit_inputs(features, targets);
  std::vector<double> h = options_.bandwidths ? *options_.bandwidths
                                              : rule_of_thumb(features, options_.bandwidth_scale);
  if (h.size() != static_cast<std::size_t>(features.cols()))
    throw Error(ErrorCode::InvalidArgument, "one bandwidth per feature is required");
  for (double v : h)
    if (!(v > 0.0) || !std::isfinite(v))
      throw Error(ErrorCode::NonpositiveBandwidth, "regression bandwidths must be positive");
  return std::make_shared<FittedNadarayaWatson>(features, targets, std::move(h));
}

NearestNeighbors::NearestNeighbors(std::optional<std::size_t> k)
  : k_(k)
{
  if (k_ && *k_ == 0)
    throw Error(ErrorCode::InvalidArgument, "k must be positive");
}

std::shared_ptr<const FittedRegressor> NearestNeighbors::fit(const Eigen::MatrixXd& features,
                                                             const Eigen::MatrixXd& targets) const
{
  check_fit_inputs(features, targets);
  const auto n = static_cast<double>(features.rows());
  const std::size_t k =
    k_ ? *k_ : std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(std::sqrt(n))));
  return std::make_shared<FittedNearestNeighbors>(features, targets, k);
}

Ridge::Ridge(double penalty)
  : penalty_(penalty)
{
  if (!(penalty >= 0.0))
    throw Error(ErrorCode::InvalidArgument, "ridge penalty must be nonnegative");
}

std::shared_ptr<const FittedRegressor> Ridge::fit(const Eigen::MatrixXd& features,
                                                  const Eigen::MatrixXd& targets) const
{
  check_fit_inputs(features, targets);
  auto [mean, sd] = standardization(features);
  const Eigen::MatrixXd z = (features.rowwise() - mean).array().rowwise() / sd.array();
  const Eigen::RowVectorXd intercept = targets.colwise().mean();
  const Eigen::MatrixXd centered = targets.rowwise() - intercept;
  Eigen::MatrixXd gram = z.transpose() * z;
  gram.diagonal().array() += penalty_;
  const Eigen::MatrixXd beta = gram.ldlt().solve(z.transpose() * centered);
  return std::make_shared<FittedRidge>(std::move(mean), std::move(sd), intercept, beta);
}

std::shared_ptr<const Regressor> make_learner(std::string_view name)
{
  if (name == "nw")
    return std::make_shared<NadarayaWatson>();
  if (name == "knn")
    return std::make_shared<NearestNeighbors>();
  if (name == "ridge")
    return std::make_shared<Ridge>();
  throw Error(ErrorCode::InvalidConfig, "unknown learner '" + std::string(name) + "'");
}

} // namespace tiltwise
