#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace tiltwise {

//! Affine record mapping stored treatments back to the source scale:
//! source = origin + scale * stored.
struct RescaleRecord
{
  double origin = 0.0;
  double scale = 1.0;
  bool applied = false;

  double to_source(double a) const noexcept { return origin + scale * a; }
  double from_source(double a) const noexcept { return (a - origin) / scale; }
};

//! Observed units Z_i = (X_i, A_i, Y_i). Rows of X are units.
class Dataset
{
public:
  //! Validates shapes and finiteness. With `rescale` the treatment is mapped
  //! affinely onto [0, 1] using its observed range.
  static Dataset create(Eigen::MatrixXd covariates,
                        Eigen::VectorXd treatment,
                        Eigen::VectorXd outcome,
                        bool rescale = true,
                        std::vector<std::string> covariate_names = {});

  std::size_t size() const noexcept { return static_cast<std::size_t>(outcome_.size()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(covariates_.cols()); }

  const Eigen::MatrixXd& covariates() const noexcept { return covariates_; }
  const Eigen::VectorXd& treatment() const noexcept { return treatment_; }
  const Eigen::VectorXd& outcome() const noexcept { return outcome_; }
  const RescaleRecord& rescale_record() const noexcept { return rescale_; }
  const std::vector<std::string>& covariate_names() const noexcept { return names_; }

  double treatment_min() const { return treatment_.minCoeff(); }
  double treatment_max() const { return treatment_.maxCoeff(); }

  //! Subset of rows, keeping the rescale record.
  Dataset subset(std::span<const std::size_t> rows) const;

  //! Copy with the treatment mapped a -> (a - lo) / (hi - lo); the record is
  //! composed so to_source() still reaches the original scale.
  Dataset rescaled_to(double lo, double hi) const;

private:
  Dataset() = default;

  Eigen::MatrixXd covariates_;
  Eigen::VectorXd treatment_;
  Eigen::VectorXd outcome_;
  RescaleRecord rescale_;
  std::vector<std::string> names_;
};

} // namespace tiltwise
