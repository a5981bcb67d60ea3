#include "tiltwise/simlab.hpp"

#include "tiltwise/error.hpp"
#include "tiltwise/parallel.hpp"
#include "tiltwise/random.hpp"
#include "tiltwise/stats.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace tiltwise {

namespace {

using Row = Eigen::Ref<const Eigen::RowVectorXd>;

constexpr std::size_t kDefaultMcDraws = 100000;

// Covariate nodes with weights summing to one.
struct CovariateRule
{
  Eigen::MatrixXd nodes;
  std::vector<double> weights;
  bool monte_carlo;
};

CovariateRule covariate_rule(const DgpSpec& dgp, std::size_t mc_x, std::uint64_t seed)
{
  CovariateRule rule;
  if (dgp.dim == 1 && mc_x == 0) {
    using Gauss = boost::math::quadrature::gauss<double, 64>;
    const auto& xs = Gauss::abscissa();
    const auto& ws = Gauss::weights();
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (xs[i] == 0.0) {
        pts.emplace_back(0.0, ws[i] / 2.0);
      } else {
        pts.emplace_back(-xs[i], ws[i] / 2.0);
        pts.emplace_back(xs[i], ws[i] / 2.0);
      }
    }
    std::sort(pts.begin(), pts.end());
    rule.nodes.resize(static_cast<Eigen::Index>(pts.size()), 1);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      rule.nodes(static_cast<Eigen::Index>(i), 0) = pts[i].first;
      rule.weights.push_back(pts[i].second);
    }
    rule.monte_carlo = false;
    return rule;
  }
  const std::size_t m = mc_x ? mc_x : kDefaultMcDraws;
  auto engine = make_engine(seed, {0x6f72616365});
  boost::random::uniform_real_distribution<double> cov(-1.0, 1.0);
  rule.nodes.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(dgp.dim));
  for (Eigen::Index i = 0; i < rule.nodes.rows(); ++i)
    for (Eigen::Index j = 0; j < rule.nodes.cols(); ++j)
      rule.nodes(i, j) = cov(engine);
  rule.weights.assign(m, 1.0 / static_cast<double>(m));
  rule.monte_carlo = true;
  return rule;
}

// Weighted mean of per-node values, with a Monte Carlo standard error.
OracleValue integrate(const CovariateRule& rule, const std::vector<double>& values)
{
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i)
    total += rule.weights[i] * values[i];
  double se = 0.0;
  if (rule.monte_carlo && values.size() > 1)
    se = std::sqrt(sample_variance(values) / static_cast<double>(values.size()));
  return {total, se};
}

std::vector<double> density_on(const DgpSpec& dgp, const SupportGrid& grid, const Row& x)
{
  std::vector<double> v(grid.size());
  for (std::size_t d = 0; d < grid.size(); ++d)
    v[d] = dgp.density(x, grid.points()[d]);
  return v;
}

std::vector<double> mean_on(const DgpSpec& dgp, const SupportGrid& grid, const Row& x)
{
  std::vector<double> v(grid.size());
  for (std::size_t d = 0; d < grid.size(); ++d)
    v[d] = dgp.mean(x, grid.points()[d]);
  return v;
}

// exp(delta (a_d - a_ref)) with a_ref the grid end the tilt points to.
std::vector<double> scaled_exponentials(const SupportGrid& grid, double delta)
{
  const double a_ref = delta >= 0.0 ? grid.hi() : grid.lo();
  std::vector<double> e(grid.size());
  for (std::size_t d = 0; d < grid.size(); ++d)
    e[d] = std::exp(delta * (grid.points()[d] - a_ref));
  return e;
}

struct SliceMoments
{
  double xi;   // E_Q[mu | x]
  double term; // E[(q/pi)^2 (sigma^2 + (mu - xi)^2) | x]
};

SliceMoments slice_moments(const SupportGrid& grid, const std::vector<double>& e,
                           const std::vector<double>& pi, const std::vector<double>& mu,
                           double noise_var)
{
  const auto w = grid.weights();
  double nu = 0.0;
  double num = 0.0;
  for (std::size_t d = 0; d < grid.size(); ++d) {
    nu += w[d] * e[d] * pi[d];
    num += w[d] * e[d] * pi[d] * mu[d];
  }
  if (!(nu > 0.0))
    throw Error(ErrorCode::IdenticallyZeroDensity, "DGP density vanishes at a covariate value");
  const double xi = num / nu;
  double term = 0.0;
  for (std::size_t d = 0; d < grid.size(); ++d) {
    const double r = e[d] / nu;
    const double dev = mu[d] - xi;
    term += w[d] * pi[d] * r * r * (noise_var + dev * dev);
  }
  return {xi, term};
}

template <typename Body>
void for_each_node(const CovariateRule& rule, Body&& body)
{
  const auto m = static_cast<std::size_t>(rule.nodes.rows());
  parallel_for(m, [&](std::size_t i) { body(i, rule.nodes.row(static_cast<Eigen::Index>(i))); });
}

const DgpBounds& require_bounds(const DgpSpec& dgp)
{
  if (!dgp.bounds)
    throw Error(ErrorCode::MissingBoundDeclaration,
                "DGP '" + dgp.name + "' does not declare its bounds");
  return *dgp.bounds;
}

double rmse_of(const std::vector<double>& errors)
{
  double ss = 0.0;
  for (double e : errors)
    ss += e * e;
  return std::sqrt(ss / static_cast<double>(errors.size()));
}

} // namespace

double density_bump(const Eigen::Ref<const Eigen::RowVectorXd>& x, double a)
{
  return std::sin(2.0 * std::numbers::pi * a) * (1.0 + x(0)) / 2.0;
}

double outcome_bump(const Eigen::Ref<const Eigen::RowVectorXd>& x, double a)
{
  return std::cos(std::numbers::pi * a) * x(0);
}

// -- oracle nuisances --------------------------------------------------------

OracleNuisances::OracleNuisances(DgpSpec dgp, OraclePerturbation perturbation)
  : dgp_(std::move(dgp))
  , perturbation_(perturbation)
{}

FoldNuisances OracleNuisances::fit(const Dataset& data, const FoldPlan& plan, std::size_t fold,
                                   const SharedGrid& grid) const
{
  if (data.dim() != dgp_.dim)
    throw Error(ErrorCode::InvalidArgument, "dataset and DGP disagree in covariate dimension");
  const auto& rec = data.rescale_record();
  const std::size_t nd = grid->size();
  const auto w = grid->weights();
  std::vector<double> src(nd);
  for (std::size_t d = 0; d < nd; ++d)
    src[d] = rec.to_source(grid->points()[d]);

  FoldNuisances out;
  out.fold = fold;
  out.held_out = plan.held_out(fold);
  const auto m = static_cast<Eigen::Index>(out.held_out.size());
  out.mu_grid.resize(m, static_cast<Eigen::Index>(nd));
  out.pi_grid.resize(m, static_cast<Eigen::Index>(nd));

  const auto& p = perturbation_;
  const bool shared_density = dgp_.treatment_independent && p.pi_bump == 0.0;
  Eigen::RowVectorXd cached;
  auto density_row = [&](const Row& x) {
    Eigen::RowVectorXd pi(static_cast<Eigen::Index>(nd));
    double mass = 0.0;
    for (std::size_t d = 0; d < nd; ++d) {
      double v = dgp_.density(x, src[d]) * rec.scale;
      if (p.pi_bump != 0.0)
        v *= 1.0 + p.pi_bump * density_bump(x, src[d]);
      pi(static_cast<Eigen::Index>(d)) = v;
      mass += w[d] * v;
    }
    if (mass > 0.0)
      pi /= mass;
    return pi;
  };
  if (shared_density)
    cached = density_row(Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(dgp_.dim)));

  for (Eigen::Index i = 0; i < m; ++i) {
    const auto row = static_cast<Eigen::Index>(out.held_out[static_cast<std::size_t>(i)]);
    const Eigen::RowVectorXd x = data.covariates().row(row);
    out.pi_grid.row(i) = shared_density ? cached : density_row(x);
    for (std::size_t d = 0; d < nd; ++d) {
      double mu = dgp_.mean(x, src[d]) + p.mu_offset;
      if (p.mu_bump != 0.0)
        mu += p.mu_bump * outcome_bump(x, src[d]);
      out.mu_grid(i, static_cast<Eigen::Index>(d)) = mu;
    }
  }
  return out;
}

EstimatorConfig simulation_config(const DgpSpec& dgp, bool oracle_nuisances, EstimatorConfig base)
{
  base.support = dgp.support;
  if (oracle_nuisances)
    base.nuisances = std::make_shared<const OracleNuisances>(dgp);
  return base;
}

// -- oracles -----------------------------------------------------------------

OracleValue oracle_psi(const DgpSpec& dgp, Tilt tilt, std::size_t mc_x, std::uint64_t seed)
{
  const auto grid = SupportGrid::uniform(dgp.support, kOraclePointsPerUnit);
  const auto e = scaled_exponentials(grid, tilt.delta());
  const auto rule = covariate_rule(dgp, mc_x, seed);
  std::vector<double> xi(rule.weights.size());
  for_each_node(rule, [&](std::size_t i, const Row& x) {
    xi[i] = slice_moments(grid, e, density_on(dgp, grid, x), mean_on(dgp, grid, x),
                          dgp.noise_variance())
              .xi;
  });
  return integrate(rule, xi);
}

OracleValue oracle_efficiency_bound(const DgpSpec& dgp, Tilt tilt, std::size_t mc_x,
                                    std::uint64_t seed)
{
  const auto grid = SupportGrid::uniform(dgp.support, kOraclePointsPerUnit);
  const auto e = scaled_exponentials(grid, tilt.delta());
  const auto rule = covariate_rule(dgp, mc_x, seed);
  std::vector<SliceMoments> per(rule.weights.size());
  for_each_node(rule, [&](std::size_t i, const Row& x) {
    per[i] = slice_moments(grid, e, density_on(dgp, grid, x), mean_on(dgp, grid, x),
                           dgp.noise_variance());
  });
  std::vector<double> xi(per.size());
  for (std::size_t i = 0; i < per.size(); ++i)
    xi[i] = per[i].xi;
  const double xi_mean = integrate(rule, xi).value;
  std::vector<double> total(per.size());
  for (std::size_t i = 0; i < per.size(); ++i)
    total[i] = per[i].term + (per[i].xi - xi_mean) * (per[i].xi - xi_mean);
  auto out = integrate(rule, total);
  if (rule.monte_carlo && per.size() > 1) {
    // unbiased variance of xi rather than the plug-in
    const auto m = static_cast<double>(per.size());
    double var_plugin = 0.0;
    for (std::size_t i = 0; i < per.size(); ++i)
      var_plugin += rule.weights[i] * (xi[i] - xi_mean) * (xi[i] - xi_mean);
    out.value += var_plugin / (m - 1.0);
  }
  return out;
}

double oracle_dose_edge(const DgpSpec& dgp, EdgeSide side)
{
  const double a = side == EdgeSide::upper ? dgp.support.back().hi : dgp.support.front().lo;
  const auto rule = covariate_rule(dgp, 0, 1);
  std::vector<double> mu(rule.weights.size());
  for (std::size_t i = 0; i < mu.size(); ++i)
    mu[i] = dgp.mean(rule.nodes.row(static_cast<Eigen::Index>(i)), a);
  return integrate(rule, mu).value;
}

double edge_bias_bound(const DgpSpec& dgp, Tilt tilt)
{
  const auto& b = require_bounds(dgp);
  if (tilt.delta() == 0.0)
    throw Error(ErrorCode::PositiveDeltaRequired, "edge bias bound needs delta != 0");
  return dgp.mean_lipschitz * b.pi_max / b.pi_min / std::abs(tilt.delta());
}

VarianceEnvelope variance_bounds(const DgpSpec& dgp, Tilt tilt)
{
  const auto& b = require_bounds(dgp);
  const double delta = tilt.delta();
  if (!(delta > 0.0))
    throw Error(ErrorCode::PositiveDeltaRequired, "variance envelopes need delta > 0");
  const double lower = delta * b.pi_min * b.sigma2_min /
                       (2.0 * b.pi_max * b.pi_max * static_cast<double>(b.intervals));
  const double upper = b.outcome_bound * b.outcome_bound *
                       (1.0 + 5.0 * b.pi_max / (2.0 * b.pi_min * b.pi_min) *
                                (2.0 / b.min_length + delta));
  return {lower, upper};
}

RemainderReport remainder_diagnostic(const DgpSpec& dgp, double epsilon, Tilt tilt,
                                     std::size_t mc_x, Perturb which)
{
  if (!(epsilon >= 0.0 && epsilon <= 0.5))
    throw Error(ErrorCode::InvalidArgument, "perturbation scale must lie in [0, 0.5]");
  const double eps_pi = which == Perturb::mu_only ? 0.0 : epsilon;
  const double eps_mu = which == Perturb::pi_only ? 0.0 : epsilon;

  const auto grid = SupportGrid::uniform(dgp.support, kOraclePointsPerUnit);
  const auto e = scaled_exponentials(grid, tilt.delta());
  const auto w = grid.weights();
  const auto pts = grid.points();
  const std::size_t nd = grid.size();
  const auto rule = covariate_rule(dgp, mc_x, 1);
  const std::size_t m = rule.weights.size();

  std::vector<double> r1(m), r2(m), direct(m);
  Eigen::MatrixXd pi_sq(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(nd));
  Eigen::MatrixXd mu_sq(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(nd));
  for_each_node(rule, [&](std::size_t i, const Row& x) {
    const auto pi = density_on(dgp, grid, x);
    const auto mu = mean_on(dgp, grid, x);
    std::vector<double> pih(nd), muh(nd);
    double mass = 0.0;
    for (std::size_t d = 0; d < nd; ++d) {
      pih[d] = pi[d] * (1.0 + eps_pi * density_bump(x, pts[d]));
      muh[d] = mu[d] + eps_mu * outcome_bump(x, pts[d]);
      mass += w[d] * pih[d];
    }
    double nu = 0.0, nuh = 0.0, xi_num = 0.0, xih_num = 0.0;
    for (std::size_t d = 0; d < nd; ++d) {
      pih[d] /= mass;
      nu += w[d] * e[d] * pi[d];
      nuh += w[d] * e[d] * pih[d];
      xi_num += w[d] * e[d] * pi[d] * mu[d];
      xih_num += w[d] * e[d] * pih[d] * muh[d];
    }
    double first = 0.0, second = 0.0, rem2 = 0.0;
    for (std::size_t d = 0; d < nd; ++d) {
      const double r = e[d] / nu;
      const double rh = e[d] / nuh;
      first += w[d] * r * muh[d] * pih[d];
      second += w[d] * rh * (pi[d] - pih[d]);
      rem2 += w[d] * (rh - r) * ((pi[d] - pih[d]) * muh[d] + (mu[d] - muh[d]) * pi[d]);
      pi_sq(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) =
        (pih[d] - pi[d]) * (pih[d] - pi[d]);
      mu_sq(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) =
        (muh[d] - mu[d]) * (muh[d] - mu[d]);
    }
    r1[i] = first * second * second;
    r2[i] = rem2;
    direct[i] = (xi_num / nu - xih_num / nuh) * (nu - nuh) / nuh;
  });

  const Eigen::Map<const Eigen::VectorXd> wx(rule.weights.data(), static_cast<Eigen::Index>(m));
  const double pi_error = std::sqrt((pi_sq.transpose() * wx).maxCoeff());
  const double mu_error = std::sqrt((mu_sq.transpose() * wx).maxCoeff());
  return {epsilon,
          integrate(rule, r1).value,
          integrate(rule, r2).value,
          integrate(rule, direct).value,
          pi_error,
          mu_error,
          pi_error * mu_error + pi_error * pi_error};
}

// -- experiments -------------------------------------------------------------

std::vector<Replication> replicate(const DgpSpec& dgp, std::span<const double> deltas,
                                   std::size_t n, std::size_t seeds,
                                   const EstimatorConfig& config, std::uint64_t master_seed)
{
  std::vector<Replication> reps(seeds);
  parallel_for(
    seeds,
    [&](std::size_t r) {
      const std::uint64_t seed = derive_seed(master_seed, {n, r});
      const Dataset data = generate_dataset(dgp, n, seed);
      EstimatorConfig cfg = config;
      cfg.seed = seed;
      reps[r] = {r, seed, estimate_curve(data, deltas, cfg).estimates};
    },
    config.threads);
  return reps;
}

RateReport run_rate_experiment(const DgpSpec& dgp, std::span<const double> deltas,
                               std::span<const std::size_t> ns, std::size_t seeds,
                               bool oracle_nuisances, const EstimatorConfig& base,
                               std::uint64_t master_seed)
{
  if (deltas.empty() || ns.empty() || seeds == 0)
    throw Error(ErrorCode::InvalidArgument, "rate experiment needs deltas, sizes and seeds");
  std::vector<double> sorted(deltas.begin(), deltas.end());
  std::sort(sorted.begin(), sorted.end());
  const auto config = simulation_config(dgp, oracle_nuisances, base);

  std::vector<double> truth(sorted.size());
  for (std::size_t j = 0; j < sorted.size(); ++j)
    truth[j] = oracle_psi(dgp, Tilt(sorted[j])).value;

  RateReport report;
  for (std::size_t n : ns) {
    const auto reps = replicate(dgp, sorted, n, seeds, config, master_seed);
    for (std::size_t j = 0; j < sorted.size(); ++j) {
      std::vector<double> errors(seeds);
      for (std::size_t r = 0; r < seeds; ++r)
        errors[r] = reps[r].estimates[j].psi_hat - truth[j];
      report.cells.push_back({n, sorted[j], truth[j], rmse_of(errors), mean(errors), seeds});
    }
  }

  auto rmse_at = [&](std::size_t n, double delta) {
    for (const auto& c : report.cells)
      if (c.n == n && c.delta == delta)
        return c.rmse;
    return 0.0;
  };
  if (sorted.size() >= 2 && sorted.front() > 0.0) {
    for (std::size_t n : ns) {
      std::vector<double> lx, ly;
      for (double d : sorted) {
        lx.push_back(std::log(d));
        ly.push_back(std::log(rmse_at(n, d)));
      }
      report.delta_slopes.push_back({static_cast<double>(n), fit_line(lx, ly).slope});
    }
  }
  if (ns.size() >= 2) {
    for (double d : sorted) {
      std::vector<double> lx, ly;
      for (std::size_t n : ns) {
        lx.push_back(std::log(static_cast<double>(n)));
        ly.push_back(std::log(rmse_at(n, d)));
      }
      report.n_slopes.push_back({d, fit_line(lx, ly).slope});
    }
  }
  return report;
}

CoverageReport run_coverage_experiment(const DgpSpec& dgp, Tilt tilt, std::size_t n,
                                       std::size_t seeds, const EstimatorConfig& config,
                                       std::uint64_t master_seed)
{
  if (seeds < 100)
    throw Error(ErrorCode::InvalidArgument, "coverage needs at least 100 replications");
  CoverageReport report;
  report.delta = tilt.delta();
  report.n = n;
  report.seeds = seeds;
  report.oracle_psi = oracle_psi(dgp, tilt).value;
  const double d = tilt.delta();
  report.replications = replicate(dgp, std::span<const double>(&d, 1), n, seeds, config, master_seed);

  std::size_t covered = 0;
  std::vector<double> psi(seeds), se(seeds);
  for (std::size_t r = 0; r < seeds; ++r) {
    const auto& est = report.replications[r].estimates.front();
    if (est.ci_lower <= report.oracle_psi && report.oracle_psi <= est.ci_upper)
      ++covered;
    psi[r] = est.psi_hat;
    se[r] = est.se;
  }
  report.coverage = static_cast<double>(covered) / static_cast<double>(seeds);
  report.mean_psi = mean(psi);
  report.mean_se = mean(se);
  report.empirical_sd = std::sqrt(sample_variance(psi));
  return report;
}

EdgeRateReport run_edge_experiment(const DgpSpec& dgp, EdgeSide side, double c,
                                   std::span<const std::size_t> ns, std::size_t seeds,
                                   const EstimatorConfig& config, std::uint64_t master_seed)
{
  if (ns.empty() || seeds == 0)
    throw Error(ErrorCode::InvalidArgument, "edge experiment needs sizes and seeds");
  EdgeRateReport report;
  report.truth = oracle_dose_edge(dgp, side);
  std::vector<double> lx, ly;
  for (std::size_t n : ns) {
    std::vector<double> errors(seeds);
    double delta = 0.0;
    parallel_for(
      seeds,
      [&](std::size_t r) {
        const std::uint64_t seed = derive_seed(master_seed, {n, r});
        const Dataset data = generate_dataset(dgp, n, seed);
        EstimatorConfig cfg = config;
        cfg.seed = seed;
        const auto est = estimate_edge(data, side, c, cfg);
        errors[r] = est.estimate - report.truth;
        if (r == 0)
          delta = est.delta_used;
      },
      config.threads);
    report.cells.push_back({n, delta, rmse_of(errors), mean(errors)});
    lx.push_back(std::log(static_cast<double>(n)));
    ly.push_back(std::log(report.cells.back().rmse));
  }
  report.slope = ns.size() >= 2 ? fit_line(lx, ly).slope : 0.0;
  return report;
}

} // namespace tiltwise
