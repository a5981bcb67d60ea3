#include "checks.hpp"
#include "oracle.hpp"

#include "tiltwise/dgp.hpp"
#include "tiltwise/estimator.hpp"
#include "tiltwise/random.hpp"
#include "tiltwise/simlab.hpp"
#include "tiltwise/stats.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <vector>

using namespace tiltwise;
using testing::check_error;
using testing::iota_rows;
using testing::share_of;

namespace {

const double e = std::numbers::e;

//! Predicts `value` for every output.
class ConstantFit final : public FittedRegressor
{
public:
  ConstantFit(std::size_t features, std::size_t outputs, double value)
    : features_(features), outputs_(outputs), value_(value)
  {
  }
  std::size_t feature_count() const override { return features_; }
  std::size_t output_count() const override { return outputs_; }
  Eigen::MatrixXd predict(const Eigen::MatrixXd& f) const override
  {
    return Eigen::MatrixXd::Constant(f.rows(), static_cast<Eigen::Index>(outputs_), value_);
  }

private:
  std::size_t features_, outputs_;
  double value_;
};

//! Predicts the last feature, i.e. mu(x, a) = a.
class TreatmentFit final : public FittedRegressor
{
public:
  explicit TreatmentFit(std::size_t features) : features_(features) {}
  std::size_t feature_count() const override { return features_; }
  std::size_t output_count() const override { return 1; }
  Eigen::MatrixXd predict(const Eigen::MatrixXd& f) const override { return f.rightCols(1); }

private:
  std::size_t features_;
};

DensityModel constant_density(SharedGrid grid, double value)
{
  const auto d = grid->size();
  return DensityModel(std::make_shared<ConstantFit>(1, d, value), grid, 0.1, Kernel::gaussian, 0, {});
}

Eigen::RowVectorXd row(double x)
{
  Eigen::RowVectorXd r(1);
  r << x;
  return r;
}

double oracle_uniform_psi(double delta)
{
  const double nu = testing::integrate_unit([=](double a) { return std::exp(delta * a); });
  return testing::integrate_unit([=](double a) { return a * std::exp(delta * a); }) / nu;
}

//! Injected nuisances with a fixed value per unit.
FoldNuisances manual_nuisances(const FoldPlan& plan, std::size_t k, const SupportGrid& grid,
                               const std::vector<double>& mu_per_unit, double pi)
{
  FoldNuisances f;
  f.fold = k;
  f.held_out = plan.held_out(k);
  const auto m = static_cast<Eigen::Index>(f.held_out.size());
  const auto d = static_cast<Eigen::Index>(grid.size());
  f.mu_grid.resize(m, d);
  for (Eigen::Index j = 0; j < m; ++j)
    f.mu_grid.row(j).setConstant(mu_per_unit[f.held_out[static_cast<std::size_t>(j)]]);
  f.pi_grid = Eigen::MatrixXd::Constant(m, d, pi);
  return f;
}

EstimatorConfig oracle_config(const DgpSpec& dgp, std::uint64_t seed = 0)
{
  EstimatorConfig base;
  base.seed = seed;
  return simulation_config(dgp, true, base);
}

EstimatorConfig learned_config(const DgpSpec& dgp, std::uint64_t seed = 0)
{
  EstimatorConfig base;
  base.seed = seed;
  return simulation_config(dgp, false, base);
}

} // namespace

TEST_SUITE("split_folds")
{
  TEST_CASE("sizes")
  {
    const auto p100 = split_folds(100, 5, 7);
    for (std::size_t k = 0; k < 5; ++k)
      CHECK(p100.held_out(k).size() == 20);
    const auto p101 = split_folds(101, 5, 7);
    std::vector<std::size_t> sizes;
    for (std::size_t k = 0; k < 5; ++k)
      sizes.push_back(p101.held_out(k).size());
    std::sort(sizes.begin(), sizes.end());
    CHECK(sizes == std::vector<std::size_t>{20, 20, 20, 20, 21});
  }

  TEST_CASE("held out and training partition the rows")
  {
    const auto plan = split_folds(233, 4, 3);
    for (std::size_t k = 0; k < 4; ++k) {
      auto h = plan.held_out(k);
      auto t = plan.training(k);
      CHECK(h.size() + t.size() == 233);
      std::vector<std::size_t> both;
      std::set_intersection(h.begin(), h.end(), t.begin(), t.end(), std::back_inserter(both));
      CHECK(both.empty());
    }
  }

  TEST_CASE("determinism")
  {
    CHECK(split_folds(500, 5, 11).assignment == split_folds(500, 5, 11).assignment);
    CHECK(split_folds(500, 5, 11).assignment != split_folds(500, 5, 12).assignment);
  }

  TEST_CASE("errors")
  {
    check_error([] { split_folds(99, 5, 1); }, ErrorCode::TooFewRows);
    check_error([] { split_folds(100, 1, 1); }, ErrorCode::InvalidArgument);
  }
}

TEST_SUITE("compute_nu_hat")
{
  TEST_CASE("uniform density")
  {
    auto grid = share(SupportGrid::unit());
    const auto dens = constant_density(grid, 1.0);
    const auto n0 = compute_nu_hat(dens, Tilt(0), row(0.2));
    CHECK(n0.value == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_FALSE(n0.floor_engaged);
    const double oracle = testing::integrate_unit([](double a) { return std::exp(a); });
    CHECK(std::abs(compute_nu_hat(dens, Tilt(1), row(0.2)).value - oracle) < 1e-5);
    CHECK(std::abs(oracle - 1.7183) < 1e-4);
  }

  TEST_CASE("zero density engages the floor")
  {
    auto grid = share(SupportGrid::unit());
    const auto dens = constant_density(grid, 0.0);
    for (double delta : {-3.0, 0.0, 2.0}) {
      const auto nu = compute_nu_hat(dens, Tilt(delta), row(0.0));
      CHECK(nu.floor_engaged);
      CHECK(nu.value == doctest::Approx(kNuFloor * std::exp(std::max(delta, 0.0))).epsilon(1e-12));
    }
  }

  TEST_CASE("negative predictions are clipped before integration")
  {
    auto grid = share(SupportGrid::unit());
    const auto dens = constant_density(grid, -2.0);
    CHECK(compute_nu_hat(dens, Tilt(1), row(0.0)).floor_engaged);
  }
}

TEST_SUITE("compute_xi_hat")
{
  TEST_CASE("constant outcome")
  {
    auto grid = share(SupportGrid::unit());
    const OutcomeModel mu(std::make_shared<ConstantFit>(2, 1, 3.25), 0, {});
    for (double pi : {1.0, 0.3})
      for (double delta : {-20.0, 0.0, 1.0, 15.0})
        CHECK(std::abs(compute_xi_hat(mu, constant_density(grid, pi), Tilt(delta), row(0.1)) - 3.25) <
              1e-9);
  }

  TEST_CASE("treatment mean under the tilt")
  {
    auto grid = share(SupportGrid::unit());
    const OutcomeModel mu(std::make_shared<TreatmentFit>(2), 0, {});
    const auto dens = constant_density(grid, 1.0);
    CHECK(compute_xi_hat(mu, dens, Tilt(0), row(0.0)) == doctest::Approx(0.5).epsilon(1e-12));
    const double oracle = oracle_uniform_psi(1.0);
    CHECK(std::abs(oracle - 1 / (e - 1)) < 1e-10);
    CHECK(std::abs(compute_xi_hat(mu, dens, Tilt(1), row(0.0)) - oracle) < 1e-5);
    CHECK(std::abs(oracle - 0.58198) < 1e-5);
  }

  TEST_CASE("batch quantities agree with the single-unit functions")
  {
    auto grid = share(SupportGrid::unit());
    const OutcomeModel mu(std::make_shared<TreatmentFit>(2), 0, {});
    const auto dens = constant_density(grid, 0.8);
    Eigen::MatrixXd x(3, 1);
    x << -0.5, 0.0, 0.5;
    const Eigen::MatrixXd pi = dens.evaluate(x);
    const Eigen::MatrixXd m = mu.predict_grid(x, *grid);
    for (double delta : {-4.0, 0.5, 6.0}) {
      const auto q = tilt_quantities(*grid, pi, m, Tilt(delta));
      for (int i = 0; i < 3; ++i) {
        const double nu = compute_nu_hat(dens, Tilt(delta), x.row(i)).value;
        CHECK(q.ratio_scale(i) * std::exp(delta * q.a_ref) == doctest::Approx(nu).epsilon(1e-12));
        CHECK(q.xi(i) == doctest::Approx(compute_xi_hat(mu, dens, Tilt(delta), x.row(i))).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("zero density falls back to the plain average")
  {
    auto grid = share(SupportGrid::unit());
    const OutcomeModel mu(std::make_shared<TreatmentFit>(2), 0, {});
    const double xi = compute_xi_hat(mu, constant_density(grid, 0.0), Tilt(5), row(0.0));
    CHECK(std::isfinite(xi));
    CHECK(xi == doctest::Approx(0.5).epsilon(1e-12));
  }
}

TEST_SUITE("fold_psi_hat")
{
  TEST_CASE("outcome equal to xi")
  {
    const auto data0 = generate_dataset(make_dgp("uniform"), 200, 1);
    std::vector<double> c(200);
    Eigen::VectorXd y(200);
    for (std::size_t i = 0; i < 200; ++i)
      y(i) = c[i] = 0.01 * static_cast<double>(i);
    const auto data = Dataset::create(data0.covariates(), data0.treatment(), y, false);
    const auto plan = split_folds(200, 4, 1);
    auto grid = share(SupportGrid::unit());
    for (std::size_t k = 0; k < 4; ++k) {
      const auto nuis = manual_nuisances(plan, k, *grid, c, 1.0);
      const auto fe = fold_psi_hat(data, *grid, nuis, Tilt(3));
      double mean_c = 0;
      for (auto r : nuis.held_out)
        mean_c += c[r];
      mean_c /= static_cast<double>(nuis.held_out.size());
      CHECK(fe.psi == doctest::Approx(mean_c).epsilon(1e-12));
      CHECK(fe.influence.size() == nuis.held_out.size());
    }
  }

  TEST_CASE("no tilt with uniform density gives the fold mean")
  {
    const auto data = generate_dataset(make_dgp("uniform"), 200, 2);
    const auto plan = split_folds(200, 5, 2);
    auto grid = share(SupportGrid::unit());
    std::vector<double> junk(200);
    for (std::size_t i = 0; i < 200; ++i)
      junk[i] = std::sin(static_cast<double>(i));
    for (std::size_t k = 0; k < 5; ++k) {
      const auto nuis = manual_nuisances(plan, k, *grid, junk, 1.0);
      double mean_y = 0;
      for (auto r : nuis.held_out)
        mean_y += data.outcome()(static_cast<Eigen::Index>(r));
      mean_y /= static_cast<double>(nuis.held_out.size());
      CHECK(fold_psi_hat(data, *grid, nuis, Tilt(0)).psi == doctest::Approx(mean_y).epsilon(1e-12));
    }
  }

  TEST_CASE("floor and ratio diagnostics")
  {
    const auto data = generate_dataset(make_dgp("uniform"), 100, 3);
    const auto plan = split_folds(100, 2, 3);
    auto grid = share(SupportGrid::unit());
    const auto nuis = manual_nuisances(plan, 0, *grid, std::vector<double>(100, 0.0), 1e-9);
    const auto fe = fold_psi_hat(data, *grid, nuis, Tilt(0));
    CHECK(fe.diagnostics.floor_engaged == nuis.held_out.size());
    CHECK(fe.diagnostics.max_ratio == doctest::Approx(1e6).epsilon(1e-12));
    CHECK(fe.diagnostics.large_ratios == 0);
  }

  TEST_CASE("units in a hole get no weight")
  {
    const auto data0 = generate_dataset(make_dgp("uniform"), 100, 4);
    Eigen::VectorXd a = data0.treatment();
    a(0) = 0.5;
    const auto data = Dataset::create(data0.covariates(), a, data0.outcome(), false);
    FoldPlan plan{2, std::vector<std::size_t>(100, 1), 0};
    plan.assignment[0] = 0;
    for (std::size_t i = 1; i < 30; ++i)
      plan.assignment[i] = 0;
    auto grid = share(SupportGrid::uniform({{0.0, 0.4}, {0.6, 1.0}}));
    const auto nuis = manual_nuisances(plan, 0, *grid, std::vector<double>(100, 0.25), 1.25);
    const auto fe = fold_psi_hat(data, *grid, nuis, Tilt(2));
    CHECK(fe.rows.front() == 0);
    CHECK(fe.influence.front() == doctest::Approx(0.25).epsilon(1e-12));
  }

  TEST_CASE("empty fold")
  {
    const auto data = generate_dataset(make_dgp("uniform"), 100, 5);
    auto grid = share(SupportGrid::unit());
    FoldNuisances empty;
    check_error([&] { fold_psi_hat(data, *grid, empty, Tilt(1)); }, ErrorCode::EmptyFold);
  }

  TEST_CASE("true nuisances at delta two, large n")
  {
    const auto dgp = make_dgp("uniform");
    const double oracle = oracle_uniform_psi(2.0);
    CHECK(std::abs(oracle - (e * e + 1) / (2 * (e * e - 1))) < 1e-10);
    CHECK(std::abs(oracle - 0.656518) < 1e-6);
    const auto data = generate_dataset(dgp, 100000, 6);
    const auto est = cross_fit_psi(data, Tilt(2), oracle_config(dgp, 6));
    CHECK(std::abs(est.psi_hat - oracle) < 3 * est.se);
  }
}

TEST_SUITE("cross_fit_psi")
{
  TEST_CASE("no tilt reproduces the outcome mean on every built-in design")
  {
    for (const auto& name : builtin_dgp_names()) {
      CAPTURE(name);
      const auto dgp = make_dgp(name);
      const auto data = generate_dataset(dgp, 2000, 71);
      const auto est = cross_fit_psi(data, Tilt(0), learned_config(dgp, 71));
      CHECK(std::abs(est.psi_hat - data.outcome().mean()) < 0.02);
      CHECK(est.ci_lower <= est.psi_hat);
      CHECK(est.psi_hat <= est.ci_upper);
      CHECK(est.sigma2_hat >= 0.0);
      CHECK(est.fold_psi.size() == 5);
    }
  }

  TEST_CASE("oracle density gives the outcome mean exactly at zero tilt")
  {
    const auto dgp = make_dgp("logistic");
    const auto data = generate_dataset(dgp, 1000, 72);
    const auto est = cross_fit_psi(data, Tilt(0), oracle_config(dgp, 72));
    CHECK(std::abs(est.psi_hat - data.outcome().mean()) < 1e-9);
  }

  TEST_CASE("learned nuisances are close to the truth on average at delta one")
  {
    const auto dgp = make_dgp("uniform");
    const std::size_t seeds = 200;
    double total = 0;
    for (std::size_t s = 0; s < seeds; ++s) {
      const auto data = generate_dataset(dgp, 4000, derive_seed(73, {s}));
      total += cross_fit_psi(data, Tilt(1), learned_config(dgp, s)).psi_hat;
    }
    CHECK(std::abs(total / seeds - 1 / (e - 1)) < 0.01);
  }

  TEST_CASE("interval and fold bookkeeping")
  {
    const auto dgp = make_dgp("uniform");
    const auto data = generate_dataset(dgp, 500, 74);
    auto cfg = oracle_config(dgp, 74);
    cfg.alpha = 0.1;
    const auto est = cross_fit_psi(data, Tilt(1.5), cfg);
    const double z = normal_quantile(0.95);
    CHECK(est.ci_upper - est.psi_hat == doctest::Approx(z * est.se).epsilon(1e-12));
    CHECK(est.se == doctest::Approx(std::sqrt(est.sigma2_hat / 500)).epsilon(1e-12));
    double m = 0;
    for (double p : est.fold_psi)
      m += p;
    CHECK(est.psi_hat == doctest::Approx(m / 5).epsilon(1e-12));
    CHECK(est.n == 500);
  }

  TEST_CASE("too few rows")
  {
    const auto dgp = make_dgp("uniform");
    const auto data = generate_dataset(dgp, 50, 75);
    check_error([&] { cross_fit_psi(data, Tilt(1), learned_config(dgp)); }, ErrorCode::TooFewRows);
  }

  TEST_CASE("learned folds never see their own rows")
  {
    const auto dgp = make_dgp("uniform");
    const auto data = generate_dataset(dgp, 400, 76);
    const auto plan = split_folds(400, 4, 76);
    auto grid = share(SupportGrid::unit());
    const LearnedNuisances source({}, 76);
    for (std::size_t k = 0; k < 4; ++k) {
      const auto f = source.fit(data, plan, k, grid);
      REQUIRE(f.mu);
      REQUIRE(f.density);
      for (auto r : f.held_out) {
        CHECK_FALSE(f.mu->trained_on(r));
        CHECK_FALSE(f.density->trained_on(r));
      }
      for (auto r : plan.training(k))
        CHECK(f.mu->trained_on(r));
    }
  }
}

TEST_SUITE("estimate_curve")
{
  TEST_CASE("single delta equals cross_fit_psi")
  {
    const auto dgp = make_dgp("uniform");
    const auto data = generate_dataset(dgp, 600, 81);
    const std::vector<double> deltas = {0.0};
    const auto cfg = learned_config(dgp, 81);
    const auto curve = estimate_curve(data, deltas, cfg);
    REQUIRE(curve.estimates.size() == 1);
    const auto single = cross_fit_psi(data, Tilt(0), cfg);
    CHECK(curve.estimates[0].psi_hat == single.psi_hat);
    CHECK(curve.estimates[0].sigma2_hat == single.sigma2_hat);
  }

  TEST_CASE("increasing on a monotone design")
  {
    const auto dgp = make_dgp("uniform");
    const std::vector<double> deltas = {0.0, 1.0, 2.0};
    std::vector<bool> monotone;
    for (std::size_t s = 0; s < 20; ++s) {
      const auto data = generate_dataset(dgp, 4000, derive_seed(82, {s}));
      const auto c = estimate_curve(data, deltas, learned_config(dgp, s)).estimates;
      monotone.push_back(c[0].psi_hat <= c[1].psi_hat && c[1].psi_hat <= c[2].psi_hat);
    }
    CHECK(share_of(monotone, [](bool b) { return b; }) >= 0.95);
  }

  TEST_CASE("grid validation")
  {
    const auto dgp = make_dgp("uniform");
    const auto data = generate_dataset(dgp, 300, 83);
    const std::vector<double> unsorted = {2.0, 1.0};
    check_error([&] { estimate_curve(data, unsorted, learned_config(dgp)); }, ErrorCode::UnsortedDeltaGrid);
    const std::vector<double> empty;
    check_error([&] { estimate_curve(data, empty, learned_config(dgp)); }, ErrorCode::InvalidArgument);
    const std::vector<double> bad = {0.0, INFINITY};
    check_error([&] { estimate_curve(data, bad, learned_config(dgp)); }, ErrorCode::NonFiniteTilt);
  }

  TEST_CASE("negative deltas")
  {
    const auto dgp = make_dgp("uniform");
    const auto data = generate_dataset(dgp, 4000, 84);
    const std::vector<double> deltas = {-2.0, 0.0, 2.0};
    const auto c = estimate_curve(data, deltas, oracle_config(dgp, 84)).estimates;
    CHECK(std::abs(c[0].psi_hat - (1 - oracle_uniform_psi(2.0))) < 4 * c[0].se);
    CHECK(c[0].psi_hat < c[1].psi_hat);
  }

  TEST_CASE("identical runs are bit-identical, whatever the thread count")
  {
    const auto dgp = make_dgp("logistic");
    const auto data = generate_dataset(dgp, 800, 85);
    const std::vector<double> deltas = {0.0, 0.5, 3.0};
    auto cfg = learned_config(dgp, 85);
    const auto a = estimate_curve(data, deltas, cfg);
    cfg.threads = 1;
    const auto b = estimate_curve(data, deltas, cfg);
    CHECK(a.plan.assignment == b.plan.assignment);
    for (std::size_t i = 0; i < deltas.size(); ++i) {
      CHECK(a.estimates[i].psi_hat == b.estimates[i].psi_hat);
      CHECK(a.estimates[i].sigma2_hat == b.estimates[i].sigma2_hat);
      CHECK(a.estimates[i].fold_psi == b.estimates[i].fold_psi);
    }
    CHECK(a.bandwidths == b.bandwidths);
  }
}

TEST_SUITE("influence_variance")
{
  TEST_CASE("examples")
  {
    CHECK(influence_variance({{1.5, 1.5, 1.5}, {0, 1, 2}}) == 0.0);
    CHECK(influence_variance({{0.0, 2.0}, {0, 1}}) == doctest::Approx(2.0));
    check_error([] { influence_variance({{1.0}, {0}}); }, ErrorCode::TooFewValues);
  }

  TEST_CASE("matches the efficiency bound with true nuisances")
  {
    const auto dgp = make_dgp("uniform");
    const auto data = generate_dataset(dgp, 100000, 91);
    const auto est = cross_fit_psi(data, Tilt(4), oracle_config(dgp, 91));
    const double bound = oracle_efficiency_bound(dgp, Tilt(4)).value;
    CHECK(std::abs(est.sigma2_hat / bound - 1.0) < 0.1);
  }

  TEST_CASE("grows with delta inside the envelopes")
  {
    const auto dgp = make_dgp("uniform");
    const auto data = generate_dataset(dgp, 20000, 92);
    const std::vector<double> deltas = {1.0, 2.0, 4.0, 8.0, 16.0};
    const auto c = estimate_curve(data, deltas, oracle_config(dgp, 92)).estimates;
    for (std::size_t i = 0; i < c.size(); ++i) {
      const auto env = variance_bounds(dgp, Tilt(deltas[i]));
      CHECK(c[i].sigma2_hat >= env.lower);
      CHECK(c[i].sigma2_hat <= env.upper);
      if (i > 0)
        CHECK(c[i].sigma2_hat > c[i - 1].sigma2_hat);
    }
  }
}

TEST_SUITE("influence_function")
{
  TEST_CASE("mean zero at the truth")
  {
    const auto dgp = make_dgp("logistic");
    const double truth = oracle_psi(dgp, Tilt(2)).value;
    std::vector<bool> ok;
    for (std::size_t s = 0; s < 40; ++s) {
      const auto data = generate_dataset(dgp, 2000, derive_seed(93, {s}));
      const auto est = cross_fit_psi(data, Tilt(2), oracle_config(dgp, s));
      ok.push_back(std::abs(est.psi_hat - truth) < 3 * est.se);
    }
    CHECK(share_of(ok, [](bool b) { return b; }) >= 0.95);
  }
}
