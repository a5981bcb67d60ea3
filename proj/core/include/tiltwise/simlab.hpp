#pragma once

#include "tiltwise/dgp.hpp"
#include "tiltwise/dose_response.hpp"
#include "tiltwise/estimator.hpp"
#include "tiltwise/tilt.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace tiltwise {

//! Fixed bumps used to perturb nuisances.
double density_bump(const Eigen::Ref<const Eigen::RowVectorXd>& x, double a); // sin(2 pi a)(1 + x1)/2
double outcome_bump(const Eigen::Ref<const Eigen::RowVectorXd>& x, double a); // cos(pi a) x1

//! muhat = mu + mu_offset + mu_bump f, pihat proportional to pi (1 + pi_bump g).
struct OraclePerturbation
{
  double mu_offset = 0.0;
  double mu_bump = 0.0;
  double pi_bump = 0.0;
};

//! True nuisances of a DGP, optionally perturbed. Treatments are mapped back
//! through the dataset's rescale record and each density row is normalized by
//! the estimation grid's quadrature.
class OracleNuisances final : public NuisanceSource
{
public:
  explicit OracleNuisances(DgpSpec dgp, OraclePerturbation perturbation = {});

  std::string name() const override { return "oracle"; }
  FoldNuisances fit(const Dataset& data, const FoldPlan& plan, std::size_t fold,
                    const SharedGrid& grid) const override;

private:
  DgpSpec dgp_;
  OraclePerturbation perturbation_;
};

//! Estimator settings for runs on a DGP's native scale: support from the DGP,
//! nuisances from the oracle when requested.
EstimatorConfig simulation_config(const DgpSpec& dgp, bool oracle_nuisances,
                                  EstimatorConfig base = {});

struct OracleValue
{
  double value;
  double se; // Monte Carlo standard error; 0 under quadrature in x
};

inline constexpr double kOraclePointsPerUnit = 8000.0;

//! psi(delta) = E_X[ int mu(X, a) q_delta(a | X) da ]. With mc_x = 0 and one
//! covariate the X integral is Gauss-Legendre; otherwise mc_x Monte Carlo
//! draws (100000 when mc_x = 0).
OracleValue oracle_psi(const DgpSpec& dgp, Tilt tilt, std::size_t mc_x = 0,
                       std::uint64_t seed = 1);

//! E[(q/pi)^2 (var(Y|X,A) + (mu - E_Q mu)^2)] + var(E_Q[mu | X]).
OracleValue oracle_efficiency_bound(const DgpSpec& dgp, Tilt tilt, std::size_t mc_x = 0,
                                    std::uint64_t seed = 1);

//! E[Y^1] (upper) or E[Y^0] (lower), at the ends of the DGP support.
double oracle_dose_edge(const DgpSpec& dgp, EdgeSide side);

//! (L pi_max / pi_min) / delta.
double edge_bias_bound(const DgpSpec& dgp, Tilt tilt);

struct VarianceEnvelope
{
  double lower;
  double upper;
};

//! lower = delta pi_min sigma2_min / (2 pi_max^2 K),
//! upper = B^2 (1 + (5 pi_max / (2 pi_min^2)) (2 / L + delta)).
VarianceEnvelope variance_bounds(const DgpSpec& dgp, Tilt tilt);

enum class Perturb
{
  both,
  mu_only,
  pi_only
};

//! Von Mises remainder terms for pihat = renormalized pi (1 + eps g) and
//! muhat = mu + eps f. R1 and R2 are the two displayed integrals; the exact
//! remainder E[(xi - xihat)(nu - nuhat) / nuhat] equals R2 - R1.
struct RemainderReport
{
  double epsilon;
  double r1;
  double r2;
  double remainder;
  double pi_error;    // sup over a of the L2(P_X) norm of pihat - pi
  double mu_error;    // same for muhat - mu
  double mixed_bound; // pi_error mu_error + pi_error^2
};

RemainderReport remainder_diagnostic(const DgpSpec& dgp, double epsilon, Tilt tilt,
                                     std::size_t mc_x = 0, Perturb which = Perturb::both);

//! One simulated replication of a delta curve.
struct Replication
{
  std::size_t index;
  std::uint64_t seed;
  std::vector<IncrementalEstimate> estimates;
};

//! `seeds` independent datasets of size n, each run through estimate_curve.
//! Replication r draws its data and folds from derive_seed(master, {n, r}).
std::vector<Replication> replicate(const DgpSpec& dgp, std::span<const double> deltas,
                                   std::size_t n, std::size_t seeds,
                                   const EstimatorConfig& config, std::uint64_t master_seed);

struct RateCell
{
  std::size_t n;
  double delta;
  double oracle_psi;
  double rmse;
  double mean_error;
  std::size_t seeds;
};

struct RateSlope
{
  double fixed; // the n or delta held fixed
  double slope;
};

struct RateReport
{
  std::vector<RateCell> cells;
  std::vector<RateSlope> delta_slopes; // log rmse on log delta, per n
  std::vector<RateSlope> n_slopes;     // log rmse on log n, per delta
};

RateReport run_rate_experiment(const DgpSpec& dgp, std::span<const double> deltas,
                               std::span<const std::size_t> ns, std::size_t seeds,
                               bool oracle_nuisances, const EstimatorConfig& base = {},
                               std::uint64_t master_seed = 1);

struct CoverageReport
{
  double delta;
  std::size_t n;
  std::size_t seeds;
  double oracle_psi;
  double coverage;
  double mean_psi;
  double mean_se;
  double empirical_sd;
  std::vector<Replication> replications;
};

//! Share of replications whose Wald interval covers the oracle psi. Needs at
//! least 100 seeds.
CoverageReport run_coverage_experiment(const DgpSpec& dgp, Tilt tilt, std::size_t n,
                                       std::size_t seeds, const EstimatorConfig& config,
                                       std::uint64_t master_seed = 1);

struct EdgeCell
{
  std::size_t n;
  double delta;
  double rmse;
  double mean_error;
};

struct EdgeRateReport
{
  double truth;
  std::vector<EdgeCell> cells;
  double slope; // log rmse on log n
};

EdgeRateReport run_edge_experiment(const DgpSpec& dgp, EdgeSide side, double c,
                                   std::span<const std::size_t> ns, std::size_t seeds,
                                   const EstimatorConfig& config, std::uint64_t master_seed = 1);

} // namespace tiltwise
