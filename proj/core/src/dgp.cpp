#include "tiltwise/dgp.hpp"

#include "tiltwise/error.hpp"
#include "tiltwise/random.hpp"

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include <algorithm>
#include <cmath>

namespace tiltwise {

namespace {

using Row = Eigen::Ref<const Eigen::RowVectorXd>;

constexpr double kSamplingPointsPerUnit = 8000.0;
constexpr double kPerUnitSamplingPointsPerUnit = 2000.0;

double logistic_cdf(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct LogisticLaw
{
  double center(const Row& x) const { return 0.5 + 0.2 * x(0); }
  static constexpr double scale = 0.2;

  double density(const Row& x, double a) const
  {
    if (a < 0.0 || a > 1.0)
      return 0.0;
    const double m = center(x);
    const double z = (a - m) / scale;
    const double e = std::exp(-std::abs(z));
    const double pdf = e / ((1.0 + e) * (1.0 + e) * scale);
    return pdf / (logistic_cdf((1.0 - m) / scale) - logistic_cdf(-m / scale));
  }

  double quantile(const Row& x, double u) const
  {
    const double m = center(x);
    const double lo = logistic_cdf(-m / scale);
    const double hi = logistic_cdf((1.0 - m) / scale);
    const double p = lo + u * (hi - lo);
    return std::clamp(m + scale * std::log(p / (1.0 - p)), 0.0, 1.0);
  }
};

DgpSpec uniform_base(std::string name)
{
  DgpSpec d;
  d.name = std::move(name);
  d.support = {{0.0, 1.0}};
  d.density = [](const Row&, double a) { return a >= 0.0 && a <= 1.0 ? 1.0 : 0.0; };
  d.treatment_independent = true;
  d.quantile = [](const Row&, double u) { return u; };
  d.bounds = DgpBounds{1.0, 1.0, d.noise_variance(), 2.0, 1, 1.0};
  return d;
}

DgpSpec logistic_base(std::string name)
{
  DgpSpec d;
  d.name = std::move(name);
  d.support = {{0.0, 1.0}};
  const LogisticLaw law;
  d.density = [law](const Row& x, double a) { return law.density(x, a); };
  d.quantile = [law](const Row& x, double u) { return law.quantile(x, u); };
  d.bounds = DgpBounds{0.18, 1.59, d.noise_variance(), 3.0, 1, 1.0};
  return d;
}

// Cumulative trapezoid mass at each grid point; holes add nothing.
std::vector<double> cumulative_mass(const SupportGrid& grid, const std::vector<double>& pdf)
{
  std::vector<double> cum(grid.size(), 0.0);
  const auto pts = grid.points();
  for (std::size_t d = 1; d < grid.size(); ++d) {
    const double seg = grid.interval_of(d) == grid.interval_of(d - 1)
                         ? 0.5 * (pdf[d - 1] + pdf[d]) * (pts[d] - pts[d - 1])
                         : 0.0;
    cum[d] = cum[d - 1] + seg;
  }
  return cum;
}

double invert(const SupportGrid& grid, const std::vector<double>& cum, double u)
{
  const double target = u * cum.back();
  const auto it = std::upper_bound(cum.begin(), cum.end(), target);
  if (it == cum.end())
    return grid.hi();
  const auto d = static_cast<std::size_t>(it - cum.begin());
  if (d == 0)
    return grid.lo();
  const auto pts = grid.points();
  const double frac = (target - cum[d - 1]) / (cum[d] - cum[d - 1]);
  return pts[d - 1] + frac * (pts[d] - pts[d - 1]);
}

std::vector<double> density_row(const DgpSpec& dgp, const SupportGrid& grid, const Row& x)
{
  std::vector<double> pdf(grid.size());
  for (std::size_t d = 0; d < grid.size(); ++d)
    pdf[d] = dgp.density(x, grid.points()[d]);
  return pdf;
}

} // namespace

DgpSpec make_dgp(std::string_view name)
{
  if (name == "uniform") {
    auto d = uniform_base("uniform");
    d.mean = [](const Row&, double a) { return a; };
    d.mean_lipschitz = 1.0;
    return d;
  }
  if (name == "uniform-null") {
    auto d = uniform_base("uniform-null");
    d.mean = [](const Row&, double) { return 0.0; };
    return d;
  }
  if (name == "uniform-const") {
    auto d = uniform_base("uniform-const");
    d.mean = [](const Row&, double) { return 0.7; };
    return d;
  }
  if (name == "logistic") {
    auto d = logistic_base("logistic");
    d.mean = [](const Row& x, double a) { return a + 0.25 * x(0); };
    d.mean_lipschitz = 1.0;
    return d;
  }
  if (name == "logistic-null") {
    auto d = logistic_base("logistic-null");
    d.mean = [](const Row&, double) { return 0.0; };
    return d;
  }
  if (name == "holey") {
    DgpSpec d;
    d.name = "holey";
    d.support = {{0.0, 0.4}, {0.6, 1.0}};
    d.density = [](const Row&, double a) {
      return (a >= 0.0 && a <= 0.4) || (a >= 0.6 && a <= 1.0) ? 1.25 : 0.0;
    };
    d.quantile = [](const Row&, double u) { return u < 0.5 ? 0.8 * u : 0.6 + 0.8 * (u - 0.5); };
    d.mean = [](const Row&, double a) { return a; };
    d.treatment_independent = true;
    d.mean_lipschitz = 1.0;
    d.bounds = DgpBounds{1.25, 1.25, d.noise_variance(), 2.0, 2, 0.4};
    return d;
  }
  throw Error(ErrorCode::UnknownDgp, "unknown DGP '" + std::string(name) + "'");
}

std::vector<std::string> builtin_dgp_names()
{
  return {"uniform", "uniform-null", "uniform-const", "logistic", "logistic-null", "holey"};
}

Dataset generate_dataset(const DgpSpec& dgp, std::size_t n, std::uint64_t seed)
{
  if (n == 0)
    throw Error(ErrorCode::InvalidArgument, "cannot generate an empty dataset");
  auto engine = make_engine(seed, {0x64617461});
  boost::random::uniform_real_distribution<double> cov(-1.0, 1.0);
  boost::random::uniform_real_distribution<double> unit(0.0, 1.0);
  boost::random::normal_distribution<double> noise(0.0, 1.0);

  const auto d = static_cast<Eigen::Index>(dgp.dim);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), d);
  Eigen::VectorXd a(static_cast<Eigen::Index>(n));
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));

  std::optional<SupportGrid> grid;
  std::vector<double> shared_cum;
  if (!dgp.quantile) {
    grid = SupportGrid::uniform(dgp.support, dgp.treatment_independent
                                               ? kSamplingPointsPerUnit
                                               : kPerUnitSamplingPointsPerUnit);
    if (dgp.treatment_independent)
      shared_cum = cumulative_mass(*grid, density_row(dgp, *grid, Eigen::RowVectorXd::Zero(d)));
  }

  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
    for (Eigen::Index j = 0; j < d; ++j)
      x(i, j) = cov(engine);
    const double u = unit(engine);
    if (dgp.quantile) {
      a(i) = dgp.quantile(x.row(i), u);
    } else if (dgp.treatment_independent) {
      a(i) = invert(*grid, shared_cum, u);
    } else {
      a(i) = invert(*grid, cumulative_mass(*grid, density_row(dgp, *grid, x.row(i))), u);
    }
    y(i) = dgp.mean(x.row(i), a(i)) + dgp.noise_sd * noise(engine);
  }
  return Dataset::create(std::move(x), std::move(a), std::move(y), false);
}

} // namespace tiltwise
