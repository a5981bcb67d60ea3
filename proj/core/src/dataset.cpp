#include "tiltwise/dataset.hpp"

#include "tiltwise/error.hpp"

#include <cmath>

namespace tiltwise {

Dataset Dataset::create(Eigen::MatrixXd covariates,
                        Eigen::VectorXd treatment,
                        Eigen::VectorXd outcome,
                        bool rescale,
                        std::vector<std::string> covariate_names)
{
  const auto n = outcome.size();
  if (n == 0)
    throw Error(ErrorCode::TooFewRows, "dataset is empty");
  if (treatment.size() != n || covariates.rows() != n)
    throw Error(ErrorCode::InvalidArgument, "covariates, treatment and outcome disagree in length");
  if (!covariates.allFinite() || !treatment.allFinite() || !outcome.allFinite())
    throw Error(ErrorCode::InvalidArgument, "dataset contains non-finite values");
  if (!covariate_names.empty() &&
      covariate_names.size() != static_cast<std::size_t>(covariates.cols()))
    throw Error(ErrorCode::InvalidArgument, "covariate name count mismatch");

  Dataset data;
  data.covariates_ = std::move(covariates);
  data.treatment_ = std::move(treatment);
  data.outcome_ = std::move(outcome);
  data.names_ = std::move(covariate_names);
  if (rescale) {
    const double lo = data.treatment_.minCoeff();
    const double hi = data.treatment_.maxCoeff();
    if (!(hi > lo))
      throw Error(ErrorCode::InvalidArgument, "cannot rescale a constant treatment");
    data.treatment_ = (data.treatment_.array() - lo) / (hi - lo);
    data.rescale_ = {lo, hi - lo, true};
  }
  return data;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const
{
  Dataset out;
  const auto m = static_cast<Eigen::Index>(rows.size());
  out.covariates_.resize(m, covariates_.cols());
  out.treatment_.resize(m);
  out.outcome_.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto r = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]);
    if (r >= outcome_.size())
      throw Error(ErrorCode::InvalidArgument, "subset row out of range");
    out.covariates_.row(i) = covariates_.row(r);
    out.treatment_(i) = treatment_(r);
    out.outcome_(i) = outcome_(r);
  }
  out.rescale_ = rescale_;
  out.names_ = names_;
  return out;
}

Dataset Dataset::rescaled_to(double lo, double hi) const
{
  if (!(hi > lo))
    throw Error(ErrorCode::InvalidArgument, "rescale interval must satisfy lo < hi");
  Dataset out = *this;
  out.treatment_ = (treatment_.array() - lo) / (hi - lo);
  out.rescale_ = {rescale_.to_source(lo), rescale_.scale * (hi - lo), true};
  return out;
}

} // namespace tiltwise
