#pragma once

#include "tiltwise/dataset.hpp"
#include "tiltwise/support_grid.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tiltwise {

//! Constants a DGP declares for the variance envelopes.
struct DgpBounds
{
  double pi_min;
  double pi_max;
  double sigma2_min;
  double outcome_bound; // B with |Y| <= B on the bulk of the outcome law
  std::size_t intervals;
  double min_length;
};

//! Closed-form data-generating process. X ~ Uniform(-1, 1)^dim, A | X has
//! density `density` on `support`, Y = mean(X, A) + noise_sd N(0, 1).
struct DgpSpec
{
  using Field = std::function<double(const Eigen::Ref<const Eigen::RowVectorXd>&, double)>;
  using Quantile = std::function<double(const Eigen::Ref<const Eigen::RowVectorXd>&, double)>;

  std::string name;
  std::size_t dim = 1;
  std::vector<Interval> support;
  Field density;
  Field mean;
  double noise_sd = 0.25;
  bool treatment_independent = false; // density ignores x
  double mean_lipschitz = 0.0;        // in a, for the edge bias bound
  std::optional<DgpBounds> bounds;
  Quantile quantile; // optional closed-form inverse CDF of A | X

  double noise_variance() const noexcept { return noise_sd * noise_sd; }
};

//! uniform, uniform-null, uniform-const, logistic, logistic-null, holey.
DgpSpec make_dgp(std::string_view name);
std::vector<std::string> builtin_dgp_names();

//! n i.i.d. draws. The treatment is drawn by inverting the CDF of A | X on a
//! fine quadrature grid (or the closed-form quantile when one is declared).
//! The treatment is stored on its native scale, which for every built-in DGP
//! lies in [0, 1].
Dataset generate_dataset(const DgpSpec& dgp, std::size_t n, std::uint64_t seed);

} // namespace tiltwise
