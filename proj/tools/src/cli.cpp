#include "tiltwise/cli.hpp"

#include "tiltwise/dgp.hpp"
#include "tiltwise/dose_response.hpp"
#include "tiltwise/error.hpp"
#include "tiltwise/estimator.hpp"
#include "tiltwise/simlab.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#ifndef TILTWISE_VERSION
#define TILTWISE_VERSION "unknown"
#endif

namespace tiltwise::cli {

using nlohmann::json;

namespace {

std::string fmt(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

[[noreturn]] void bad_config(const std::string& what)
{
  throw Error(ErrorCode::InvalidConfig, what);
}

template <typename T>
void take(const json& j, const char* key, T& field)
{
  if (j.contains(key) && !j.at(key).is_null())
    field = j.at(key).get<T>();
}

std::vector<double> parse_doubles(const std::string& text)
{
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty())
      continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size())
      bad_config("'" + item + "' is not a number");
    out.push_back(v);
  }
  return out;
}

std::vector<std::size_t> parse_sizes(const std::string& text)
{
  std::vector<std::size_t> out;
  for (double v : parse_doubles(text)) {
    if (!(v >= 1.0) || v != std::floor(v))
      bad_config("sizes must be positive integers");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::vector<std::string> parse_names(const std::string& text)
{
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty())
      out.push_back(item);
  }
  return out;
}

EstimatorConfig estimator_config(const RunConfig& c)
{
  EstimatorConfig e;
  e.folds = c.folds;
  e.seed = c.seed;
  e.alpha = c.alpha;
  e.design_points = c.design_points;
  e.learned.outcome_learner = c.outcome_learner;
  e.learned.density_learner = c.density_learner;
  e.learned.bandwidths = c.bandwidths.empty() ? default_bandwidths() : c.bandwidths;
  return e;
}

json rescale_json(const RescaleRecord& r)
{
  return {{"applied", r.applied}, {"origin", r.origin}, {"scale", r.scale}};
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

} // namespace

// -- configuration -----------------------------------------------------------

std::vector<double> default_bandwidths() { return log_spaced(0.05, 1.0, 50); }

RunConfig load_run_config(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorCode::IoFailure, "cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    bad_config("config '" + path + "' is not valid JSON: " + e.what());
  }
  if (!j.is_object())
    bad_config("config must be a JSON object");
  RunConfig c;
  try {
    take(j, "input", c.input);
    take(j, "outcome", c.outcome);
    take(j, "treatment", c.treatment);
    if (j.contains("covariates")) {
      if (j["covariates"].is_string() && j["covariates"] == "rest")
        c.covariates.clear();
      else
        take(j, "covariates", c.covariates);
    }
    if (j.contains("deltas") && !j["deltas"].is_null())
      c.deltas = j["deltas"].get<std::vector<double>>();
    take(j, "delta_min", c.delta_min);
    take(j, "delta_max", c.delta_max);
    take(j, "delta_steps", c.delta_steps);
    take(j, "folds", c.folds);
    take(j, "bandwidths", c.bandwidths);
    if (j.contains("design_points") && !j["design_points"].is_null())
      c.design_points = j["design_points"].get<std::size_t>();
    take(j, "outcome_learner", c.outcome_learner);
    take(j, "density_learner", c.density_learner);
    take(j, "seed", c.seed);
    take(j, "alpha", c.alpha);
    take(j, "rescale", c.rescale);
    take(j, "out", c.out);
  } catch (const json::exception& e) {
    bad_config(std::string("config field has the wrong type: ") + e.what());
  }
  return c;
}

std::string run_config_json(const RunConfig& c)
{
  json j{{"input", c.input},
         {"outcome", c.outcome},
         {"treatment", c.treatment},
         {"covariates", c.covariates.empty() ? json("rest") : json(c.covariates)},
         {"deltas", c.deltas ? json(*c.deltas) : json(nullptr)},
         {"delta_min", c.delta_min},
         {"delta_max", c.delta_max},
         {"delta_steps", c.delta_steps},
         {"folds", c.folds},
         {"bandwidths", c.bandwidths},
         {"design_points", c.design_points ? json(*c.design_points) : json(nullptr)},
         {"outcome_learner", c.outcome_learner},
         {"density_learner", c.density_learner},
         {"seed", c.seed},
         {"alpha", c.alpha},
         {"rescale", c.rescale},
         {"out", c.out}};
  return j.dump(2);
}

std::vector<double> delta_grid(const RunConfig& c)
{
  if (c.deltas)
    return *c.deltas;
  std::vector<double> out(c.delta_steps);
  for (std::size_t i = 0; i < c.delta_steps; ++i)
    out[i] = c.delta_steps == 1 ? c.delta_min
                                : c.delta_min + (c.delta_max - c.delta_min) *
                                                  static_cast<double>(i) /
                                                  static_cast<double>(c.delta_steps - 1);
  return out;
}

void validate(const RunConfig& c)
{
  if (c.input.empty())
    bad_config("an input file is required");
  if (c.outcome.empty() || c.treatment.empty())
    bad_config("outcome and treatment columns are required");
  std::set<std::string> seen{c.outcome};
  if (!seen.insert(c.treatment).second)
    bad_config("outcome and treatment must be different columns");
  for (const auto& name : c.covariates)
    if (!seen.insert(name).second)
      bad_config("column '" + name + "' is listed twice");
  if (c.deltas && c.deltas->empty())
    bad_config("delta list is empty");
  if (!c.deltas && c.delta_steps == 0)
    bad_config("delta grid needs at least one step");
  if (!std::isfinite(c.delta_min) || !std::isfinite(c.delta_max) || c.delta_max < c.delta_min)
    bad_config("delta grid bounds must be finite with min <= max");
  for (double d : delta_grid(c))
    if (!std::isfinite(d))
      bad_config("delta values must be finite");
  if (c.folds < 2)
    bad_config("at least two folds are required");
  for (double h : c.bandwidths)
    if (!(h > 0.0) || !std::isfinite(h))
      bad_config("candidate bandwidths must be positive");
  if (c.design_points && *c.design_points < 2)
    bad_config("design points must be at least 2");
  if (!(c.alpha > 0.0 && c.alpha < 1.0))
    bad_config("alpha must lie in (0, 1)");
  for (const auto& l : {c.outcome_learner, c.density_learner})
    make_learner(l);
}

// -- analyze -----------------------------------------------------------------

void run_analysis(const RunConfig& config, std::ostream& log)
{
  validate(config);
  if (config.out.empty())
    bad_config("an output directory is required");
  auto deltas = delta_grid(config);
  const auto ingested = ingest_csv(config.input, config);
  const auto& data = ingested.data;
  log << "read " << data.size() << " rows, dropped " << ingested.dropped_lines.size() << "\n";

  const auto est_config = estimator_config(config);
  const auto result = estimate_curve(data, deltas, est_config);

  std::ostringstream curve;
  curve << "delta,psi_hat,se,ci_lower,ci_upper\n";
  for (const auto& e : result.estimates)
    curve << fmt(e.delta) << ',' << fmt(e.psi_hat) << ',' << fmt(e.se) << ',' << fmt(e.ci_lower)
          << ',' << fmt(e.ci_upper) << '\n';

  json diagnostics = json::array();
  std::size_t floors = 0;
  double max_ratio = 0.0;
  for (const auto& e : result.estimates) {
    diagnostics.push_back({{"delta", e.delta},
                           {"floor_engaged", e.diagnostics.floor_engaged},
                           {"large_ratios", e.diagnostics.large_ratios},
                           {"max_ratio", e.diagnostics.max_ratio},
                           {"fold_psi", e.fold_psi},
                           {"sigma2_hat", e.sigma2_hat}});
    floors += e.diagnostics.floor_engaged;
    max_ratio = std::max(max_ratio, e.diagnostics.max_ratio);
  }
  json bandwidths = json::array();
  for (const auto& b : result.bandwidths)
    bandwidths.push_back(b ? json(*b) : json(nullptr));

  const json run{{"tool", "tiltwise"},
                 {"version", TILTWISE_VERSION},
                 {"command", "analyze"},
                 {"config", json::parse(run_config_json(config))},
                 {"seed", config.seed},
                 {"n", data.size()},
                 {"covariates", ingested.covariates},
                 {"dropped_rows", ingested.dropped_lines.size()},
                 {"dropped_lines", ingested.dropped_lines},
                 {"rescale", rescale_json(data.rescale_record())},
                 {"grid", {{"points", result.grid->size()},
                           {"lo", result.grid->lo()},
                           {"hi", result.grid->hi()}}},
                 {"nuisances", {{"bandwidth_per_fold", bandwidths},
                                {"floor_engaged_total", floors},
                                {"max_likelihood_ratio", max_ratio},
                                {"per_delta", diagnostics}}}};

  const std::filesystem::path dir(config.out);
  write_atomic((dir / "curve.csv").string(), curve.str());
  write_atomic((dir / "run.json").string(), dump(run));
  log << "wrote " << (dir / "curve.csv").string() << "\n";
}

// -- simulate ----------------------------------------------------------------

bool run_simulation(const SimulationConfig& c, std::ostream& log)
{
  const auto dgp = make_dgp(c.dgp);
  if (c.out.empty())
    bad_config("an output directory is required");
  std::ostringstream report;
  json results;
  bool pass = true;

  if (c.kind == "bounds") {
    const auto deltas = c.deltas.empty() ? std::vector<double>{1, 2, 4, 8, 16} : c.deltas;
    report << "delta,lower,efficiency_bound,upper,pass\n";
    results = json::array();
    for (double d : deltas) {
      const auto env = variance_bounds(dgp, Tilt(d));
      const double bound = oracle_efficiency_bound(dgp, Tilt(d)).value;
      const bool ok = env.lower <= bound && bound <= env.upper;
      pass = pass && ok;
      report << fmt(d) << ',' << fmt(env.lower) << ',' << fmt(bound) << ',' << fmt(env.upper) << ','
             << (ok ? "true" : "false") << '\n';
      results.push_back({{"delta", d}, {"lower", env.lower}, {"efficiency_bound", bound},
                         {"upper", env.upper}, {"pass", ok}});
      log << "delta " << d << ": " << env.lower << " <= " << bound << " <= " << env.upper
          << (ok ? "  pass" : "  FAIL") << "\n";
    }
  } else if (c.kind == "remainder") {
    const auto eps = c.epsilons.empty() ? std::vector<double>{0.2, 0.1} : c.epsilons;
    const double delta = c.deltas.empty() ? 2.0 : c.deltas.front();
    report << "epsilon,r1,r2,remainder,ratio_r1,ratio_r2,pass\n";
    results = json::array();
    for (double e : eps) {
      const auto full = remainder_diagnostic(dgp, e, Tilt(delta));
      const auto half = remainder_diagnostic(dgp, e / 2.0, Tilt(delta));
      const double q1 = std::abs(full.r1) / std::abs(half.r1);
      const double q2 = std::abs(full.r2) / std::abs(half.r2);
      const bool ok = q1 >= 3.5 && q1 <= 4.5 && q2 >= 3.5 && q2 <= 4.5;
      pass = pass && ok;
      report << fmt(e) << ',' << fmt(full.r1) << ',' << fmt(full.r2) << ',' << fmt(full.remainder)
             << ',' << fmt(q1) << ',' << fmt(q2) << ',' << (ok ? "true" : "false") << '\n';
      results.push_back({{"epsilon", e}, {"delta", delta}, {"r1", full.r1}, {"r2", full.r2},
                         {"remainder", full.remainder}, {"ratio_r1", q1}, {"ratio_r2", q2},
                         {"mixed_bound", full.mixed_bound}, {"pass", ok}});
      log << "epsilon " << e << ": R1 ratio " << q1 << ", R2 ratio " << q2
          << (ok ? "  pass" : "  FAIL") << "\n";
    }
  } else if (c.kind == "rate") {
    const auto deltas = c.deltas.empty() ? std::vector<double>{1, 2, 4, 8, 16} : c.deltas;
    const auto ns = c.ns.empty() ? std::vector<std::size_t>{4000} : c.ns;
    const std::size_t seeds = c.seeds ? c.seeds : 300;
    const auto r = run_rate_experiment(dgp, deltas, ns, seeds, c.oracle, {}, c.seed);
    report << "n,delta,oracle_psi,rmse,mean_error,seeds\n";
    for (const auto& cell : r.cells)
      report << cell.n << ',' << fmt(cell.delta) << ',' << fmt(cell.oracle_psi) << ','
             << fmt(cell.rmse) << ',' << fmt(cell.mean_error) << ',' << cell.seeds << '\n';
    json slopes_d = json::array(), slopes_n = json::array();
    for (const auto& s : r.delta_slopes) {
      const bool ok = std::abs(s.slope - 0.5) <= 0.15;
      pass = pass && ok;
      slopes_d.push_back({{"n", s.fixed}, {"slope", s.slope}, {"target", 0.5}, {"pass", ok}});
      log << "n " << s.fixed << ": slope in log delta " << s.slope << (ok ? "  pass" : "  FAIL")
          << "\n";
    }
    for (const auto& s : r.n_slopes) {
      const bool ok = std::abs(s.slope + 0.5) <= 0.1;
      pass = pass && ok;
      slopes_n.push_back({{"delta", s.fixed}, {"slope", s.slope}, {"target", -0.5}, {"pass", ok}});
      log << "delta " << s.fixed << ": slope in log n " << s.slope << (ok ? "  pass" : "  FAIL")
          << "\n";
    }
    results = {{"delta_slopes", slopes_d}, {"n_slopes", slopes_n}, {"seeds", seeds},
               {"oracle_nuisances", c.oracle}};
  } else if (c.kind == "coverage") {
    const double delta = c.deltas.empty() ? 1.0 : c.deltas.front();
    const std::size_t n = c.ns.empty() ? 2000 : c.ns.front();
    const std::size_t seeds = c.seeds ? c.seeds : 500;
    const auto cov = run_coverage_experiment(dgp, Tilt(delta), n, seeds,
                                             simulation_config(dgp, c.oracle), c.seed);
    report << "replication,psi_hat,se,ci_lower,ci_upper,covered\n";
    for (const auto& rep : cov.replications) {
      const auto& e = rep.estimates.front();
      const bool covered = e.ci_lower <= cov.oracle_psi && cov.oracle_psi <= e.ci_upper;
      report << rep.index << ',' << fmt(e.psi_hat) << ',' << fmt(e.se) << ',' << fmt(e.ci_lower)
             << ',' << fmt(e.ci_upper) << ',' << (covered ? "true" : "false") << '\n';
    }
    const double lo = c.oracle ? 0.93 : 0.92;
    const double hi = c.oracle ? 0.97 : 0.98;
    pass = cov.coverage >= lo && cov.coverage <= hi;
    results = {{"delta", delta}, {"n", n}, {"seeds", seeds}, {"oracle_psi", cov.oracle_psi},
               {"coverage", cov.coverage}, {"target", {lo, hi}}, {"mean_psi", cov.mean_psi},
               {"mean_se", cov.mean_se}, {"empirical_sd", cov.empirical_sd},
               {"oracle_nuisances", c.oracle}, {"pass", pass}};
    log << "coverage " << cov.coverage << " over " << seeds << " replications"
        << (pass ? "  pass" : "  FAIL") << "\n";
  } else {
    bad_config("unknown simulation '" + c.kind + "'");
  }

  const json run{{"tool", "tiltwise"}, {"version", TILTWISE_VERSION},
                 {"command", "simulate " + c.kind}, {"dgp", c.dgp},
                 {"seed", c.seed}, {"results", results}, {"pass", pass}};
  const std::filesystem::path dir(c.out);
  write_atomic((dir / "report.csv").string(), report.str());
  write_atomic((dir / "run.json").string(), dump(run));
  return pass;
}

// -- dose --------------------------------------------------------------------

void run_dose(const DoseConfig& c, std::ostream& log)
{
  std::optional<Dataset> data;
  EstimatorConfig config;
  json source;
  if (!c.data.input.empty()) {
    RunConfig rc = c.data;
    rc.deltas = std::vector<double>{0.0};
    validate(rc);
    auto ingested = ingest_csv(rc.input, rc);
    data = std::move(ingested.data);
    config = estimator_config(rc);
    source = {{"input", rc.input}, {"dropped_rows", ingested.dropped_lines.size()}};
  } else {
    if (c.dgp.empty())
      bad_config("dose needs --input or --dgp");
    const auto dgp = make_dgp(c.dgp);
    data = generate_dataset(dgp, c.n, c.data.seed);
    RunConfig rc = c.data;
    config = simulation_config(dgp, c.oracle, estimator_config(rc));
    source = {{"dgp", c.dgp}, {"n", c.n}, {"oracle_nuisances", c.oracle}};
  }
  const auto& rec = data->rescale_record();

  DoseResponseEstimate est;
  if (c.target == "edge-upper") {
    est = estimate_edge(*data, EdgeSide::upper, c.c, config);
  } else if (c.target == "edge-lower") {
    est = estimate_edge(*data, EdgeSide::lower, c.c, config);
  } else if (c.target == "point") {
    if (!c.at)
      bad_config("dose point needs --at");
    est = estimate_at_point(*data, rec.from_source(*c.at), c.c, config);
  } else {
    bad_config("unknown dose target '" + c.target + "'");
  }

  auto half = [&](const std::optional<HalfSampleEstimate>& h) -> json {
    if (!h)
      return nullptr;
    return {{"n", h->n}, {"support", {rec.to_source(h->support_lo), rec.to_source(h->support_hi)}},
            {"delta", h->delta}, {"estimate", h->estimate}, {"se", h->se}};
  };
  const json out{{"tool", "tiltwise"},
                 {"version", TILTWISE_VERSION},
                 {"command", "dose " + c.target},
                 {"source", source},
                 {"seed", c.data.seed},
                 {"c", c.c},
                 {"a_prime", rec.to_source(est.a_prime)},
                 {"delta_used", est.delta_used},
                 {"estimate", est.estimate},
                 {"se", est.se},
                 {"lower_half", half(est.lower_half)},
                 {"upper_half", half(est.upper_half)}};
  log << out.dump() << "\n";
  if (!c.data.out.empty())
    write_atomic((std::filesystem::path(c.data.out) / "run.json").string(), dump(out));
}

// -- entry point -------------------------------------------------------------

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
  CLI::App app{"Incremental effects of continuous exposures under exponential tilts", "tiltwise"};
  app.require_subcommand(1);
  app.set_version_flag("--version", TILTWISE_VERSION);

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Estimate psi(delta) over a delta grid from CSV");
  std::string a_config, a_input, a_outcome, a_treatment, a_covariates, a_deltas, a_bandwidths,
    a_out, a_outcome_learner, a_density_learner;
  double a_dmin = 0, a_dmax = 0, a_alpha = 0;
  std::size_t a_steps = 0, a_folds = 0, a_design = 0;
  std::uint64_t a_seed = 0;
  bool a_no_rescale = false;
  std::vector<CLI::Option*> given;
  auto* o_config = analyze->add_option("--config", a_config, "JSON config; flags override it");
  auto* o_input = analyze->add_option("--input", a_input, "CSV file with a header row");
  auto* o_outcome = analyze->add_option("--outcome", a_outcome, "Outcome column");
  auto* o_treatment = analyze->add_option("--treatment", a_treatment, "Treatment column");
  auto* o_cov = analyze->add_option("--covariates", a_covariates,
                                    "Comma-separated covariate columns, or 'rest'");
  auto* o_dmin = analyze->add_option("--delta-min", a_dmin);
  auto* o_dmax = analyze->add_option("--delta-max", a_dmax);
  auto* o_steps = analyze->add_option("--delta-steps", a_steps);
  auto* o_deltas = analyze->add_option("--deltas", a_deltas, "Comma-separated delta values");
  auto* o_folds = analyze->add_option("--folds", a_folds);
  auto* o_bw = analyze->add_option("--bandwidths", a_bandwidths, "Comma-separated candidates");
  auto* o_design = analyze->add_option("--design-points", a_design);
  auto* o_ol = analyze->add_option("--outcome-learner", a_outcome_learner, "nw, knn or ridge");
  auto* o_dl = analyze->add_option("--density-learner", a_density_learner, "nw, knn or ridge");
  auto* o_seed = analyze->add_option("--seed", a_seed);
  auto* o_alpha = analyze->add_option("--alpha", a_alpha);
  auto* o_norescale = analyze->add_flag("--no-rescale", a_no_rescale, "Keep the treatment scale");
  auto* o_out = analyze->add_option("--out", a_out, "Output directory");

  auto assemble = [&]() {
    RunConfig c = o_config->count() ? load_run_config(a_config) : RunConfig{};
    if (o_input->count()) c.input = a_input;
    if (o_outcome->count()) c.outcome = a_outcome;
    if (o_treatment->count()) c.treatment = a_treatment;
    if (o_cov->count()) c.covariates = a_covariates == "rest" ? std::vector<std::string>{}
                                                              : parse_names(a_covariates);
    if (o_dmin->count()) c.delta_min = a_dmin;
    if (o_dmax->count()) c.delta_max = a_dmax;
    if (o_steps->count()) c.delta_steps = a_steps;
    if (o_dmin->count() || o_dmax->count() || o_steps->count()) c.deltas.reset();
    if (o_deltas->count()) c.deltas = parse_doubles(a_deltas);
    if (o_folds->count()) c.folds = a_folds;
    if (o_bw->count()) c.bandwidths = parse_doubles(a_bandwidths);
    if (o_design->count()) c.design_points = a_design;
    if (o_ol->count()) c.outcome_learner = a_outcome_learner;
    if (o_dl->count()) c.density_learner = a_density_learner;
    if (o_seed->count()) c.seed = a_seed;
    if (o_alpha->count()) c.alpha = a_alpha;
    if (o_norescale->count()) c.rescale = false;
    if (o_out->count()) c.out = a_out;
    return c;
  };

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Simulation lab");
  simulate->require_subcommand(1);
  SimulationConfig sim;
  std::string s_deltas, s_ns, s_eps;
  bool s_assert = false, s_estimated = false;
  for (const char* kind : {"rate", "coverage", "bounds", "remainder"}) {
    auto* sub = simulate->add_subcommand(kind);
    sub->add_option("--dgp", sim.dgp, "uniform, uniform-null, uniform-const, logistic, "
                                      "logistic-null or holey");
    sub->add_option("--deltas", s_deltas);
    sub->add_option("--ns", s_ns);
    sub->add_option("--seeds", sim.seeds);
    sub->add_option("--epsilons", s_eps);
    sub->add_option("--seed", sim.seed);
    sub->add_flag("--estimated", s_estimated, "Learned nuisances instead of the oracle");
    sub->add_flag("--assert", s_assert, "Exit nonzero when a check fails");
    sub->add_option("--out", sim.out)->required();
    sub->callback([&sim, kind] { sim.kind = kind; });
  }

  // dose
  auto* dose = app.add_subcommand("dose", "Dose response at an edge or interior point");
  dose->require_subcommand(1);
  DoseConfig dc;
  std::string d_input, d_outcome, d_treatment, d_covariates, d_out;
  std::uint64_t d_seed = 0;
  std::size_t d_folds = 5;
  bool d_no_rescale = false;
  for (const char* kind : {"edge-upper", "edge-lower", "point"}) {
    auto* sub = dose->add_subcommand(kind);
    sub->add_option("--at", dc.at, "Interior treatment value (data scale)");
    sub->add_option("--c", dc.c, "Schedule constant in delta = c n^(1/3)");
    sub->add_option("--input", d_input);
    sub->add_option("--outcome", d_outcome);
    sub->add_option("--treatment", d_treatment);
    sub->add_option("--covariates", d_covariates);
    sub->add_flag("--no-rescale", d_no_rescale);
    sub->add_option("--dgp", dc.dgp, "Simulate from a built-in DGP instead of reading CSV");
    sub->add_option("--n", dc.n);
    sub->add_flag("--oracle", dc.oracle, "Use true nuisances (with --dgp)");
    sub->add_option("--folds", d_folds);
    sub->add_option("--seed", d_seed);
    sub->add_option("--out", d_out);
    sub->callback([&dc, kind] { dc.target = kind; });
  }

  // generate
  auto* generate = app.add_subcommand("generate", "Write a simulated dataset as CSV");
  std::string g_dgp = "uniform", g_out;
  std::size_t g_n = 2000;
  std::uint64_t g_seed = 0;
  generate->add_option("--dgp", g_dgp);
  generate->add_option("--n", g_n);
  generate->add_option("--seed", g_seed);
  generate->add_option("--out", g_out, "CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0)
      return app.exit(e, out, err);
    err << json{{"error", "UsageError"}, {"message", e.what()}}.dump() << "\n";
    return 2;
  }

  try {
    if (analyze->parsed()) {
      run_analysis(assemble(), out);
    } else if (simulate->parsed()) {
      sim.deltas = parse_doubles(s_deltas);
      sim.ns = parse_sizes(s_ns);
      sim.epsilons = parse_doubles(s_eps);
      sim.oracle = !s_estimated;
      const bool pass = run_simulation(sim, out);
      if (s_assert && !pass) {
        err << json{{"error", "AssertionFailed"},
                    {"message", "simulate " + sim.kind + " failed its checks"}}.dump()
            << "\n";
        return 3;
      }
    } else if (dose->parsed()) {
      dc.data.input = d_input;
      dc.data.outcome = d_outcome;
      dc.data.treatment = d_treatment;
      dc.data.covariates = parse_names(d_covariates == "rest" ? "" : d_covariates);
      dc.data.rescale = !d_no_rescale;
      dc.data.folds = d_folds;
      dc.data.seed = d_seed;
      dc.data.out = d_out;
      run_dose(dc, out);
    } else if (generate->parsed()) {
      write_dataset_csv(g_out, generate_dataset(make_dgp(g_dgp), g_n, g_seed));
    }
  } catch (const Error& e) {
    err << json{{"error", std::string(to_string(e.code()))}, {"message", e.what()}}.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << json{{"error", "Internal"}, {"message", e.what()}}.dump() << "\n";
    return 1;
  }
  return 0;
}

} // namespace tiltwise::cli
