#pragma once

// Monte-Carlo experiment harness: repeated sequential-design campaigns over a
// benchmark problem, with every strategy in a repetition sharing the same
// field data and the same initial simulator design.  Records stream to a CSV
// (resumable at repetition granularity) with a JSON sidecar capturing the
// fully resolved configuration.

#include <optional>
#include <string>
#include <vector>

#include "acquisition.hpp"
#include "problems.hpp"

namespace kohdesign::harness {

struct TestSpec {
  int n = 0;  // 0: use the problem default
  bool noiseless = true;
};

struct ExperimentConfig {
  std::string problem;
  problems::ProblemOptions problem_options;
  std::vector<acq::Strategy> strategies;
  int n_m0 = 0;
  int n_m_final = 0;
  int mc_reps = 0;
  std::uint64_t seed = 0;
  double bias_scale = 1.0;
  std::optional<problems::FieldSpec> field;  // unset: problem default
  TestSpec test;
  std::optional<koh::Priors> priors;  // unset: problem default
  acq::Options acquisition;
  int fit_starts = 5;
  double jitter = 1e-8;
  bool warm_start = true;  // carry hyperparameters across sequential rounds
  bool record_walltime = true;  // false writes 0, keeping runs byte-comparable
  int threads = 1;
};

// Parses and validates a config document; unknown keys are errors.
ExperimentConfig parse_config(const std::string& json_text);

// Resolved configuration (defaults filled in) as a JSON document.
std::string config_to_json(const ExperimentConfig& cfg);

struct Record {
  std::string strategy;
  int mc_iter = 0;  // 1-based repetition index
  int n_m = 0;      // simulator budget when the snapshot was taken
  double rmse = 0.0;
  VectorXd u_hat;   // calibration estimate at this budget
  VectorXd acq;     // point acquired from this state (NaN row at the final budget)
  double wall_s = 0.0;  // acquisition wall time
};

double rmse(const VectorXd& pred, const VectorXd& truth);

// Runs the campaign, appending to out_csv.  If the file already holds records
// from an earlier identical run, complete repetitions are kept and the rest
// recomputed, yielding the same bytes as an uninterrupted run.
void run_campaign(const ExperimentConfig& cfg, const std::string& out_csv);

// Aggregates a record CSV into per-(strategy, n_m) summary rows: mean and
// 5/95 quantiles of RMSE, the mean squared distance between acquired u and
// u_hat, and mean acquisition time.
void summarize(const std::string& in_csv, const std::string& out_csv);

}  // namespace kohdesign::harness
