#pragma once

#include "tiltwise/dataset.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace tiltwise::cli {

//! Everything an `analyze` run needs. JSON keys match the field names.
struct RunConfig
{
  std::string input;
  std::string outcome;
  std::string treatment;
  std::vector<std::string> covariates; // empty: every other column
  std::optional<std::vector<double>> deltas; // explicit grid; overrides min/max/steps
  double delta_min = 0.0;
  double delta_max = 10.0;
  std::size_t delta_steps = 100;
  std::size_t folds = 5;
  std::vector<double> bandwidths; // empty: 50 log-spaced in [0.05, 1]
  std::optional<std::size_t> design_points;
  std::string outcome_learner = "nw";
  std::string density_learner = "nw";
  std::uint64_t seed = 0;
  double alpha = 0.05;
  bool rescale = true;
  std::string out;
};

RunConfig load_run_config(const std::string& path);
std::string run_config_json(const RunConfig& config);
//! Throws InvalidConfig.
void validate(const RunConfig& config);
std::vector<double> delta_grid(const RunConfig& config);
std::vector<double> default_bandwidths();

struct Ingested
{
  Dataset data;
  std::vector<std::string> covariates;
  std::vector<std::size_t> dropped_lines; // 1-based file lines
};

//! Header row required. Rows with a missing cell (empty, NA, NaN, null) in a
//! used column are dropped and reported; any other non-numeric cell is an error.
Ingested ingest_csv(const std::string& path, const RunConfig& config);

//! Columns y, a, x1..xd (or the dataset's covariate names), treatment on the
//! source scale, 17 significant digits.
void write_dataset_csv(const std::string& path, const Dataset& data);

//! Write to a sibling temporary file, then rename over the target.
void write_atomic(const std::string& path, const std::string& content);

//! curve.csv and run.json under config.out.
void run_analysis(const RunConfig& config, std::ostream& log);

struct SimulationConfig
{
  std::string kind; // rate, coverage, bounds, remainder
  std::string dgp = "uniform";
  std::vector<double> deltas;
  std::vector<std::size_t> ns;
  std::size_t seeds = 0;
  bool oracle = true;
  std::vector<double> epsilons;
  std::uint64_t seed = 1;
  std::string out;
};

//! Writes report.csv and run.json; returns whether every check passed.
bool run_simulation(const SimulationConfig& config, std::ostream& log);

struct DoseConfig
{
  std::string target; // edge-upper, edge-lower, point
  std::optional<double> at;
  double c = 1.0;
  RunConfig data;       // used when data.input is set
  std::string dgp;      // otherwise simulate
  std::size_t n = 8000;
  bool oracle = false;
};

void run_dose(const DoseConfig& config, std::ostream& log);

//! Entry point shared by the executable and the tests. Failures print one
//! JSON line {"error": code, "message": text} to `err` and return nonzero.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace tiltwise::cli
