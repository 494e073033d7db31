#pragma once

#include "rfp/config.hpp"
#include "rfp/discretization.hpp"
#include "rfp/indicators.hpp"

#include <Eigen/Core>

#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace rfp::cli {

struct StepRecord {
  int step = 0;  // index of the accepted step this attempt belongs to
  double t = 0.0;  // time after the attempt (unchanged when rejected)
  double dt = 0.0;
  bool accepted = false;
  double error_estimate = 0.0;
  int newton_iters = 0;
  int gmres_iters = 0;
  int rhs_evals = 0;
  int leaves = 0;
  double mass = 0.0;
  double min_f = 0.0;  // min f~ before any clamping
};

struct RegridRecord {
  int step = 0;
  double t = 0.0;
  int leaves = 0;  // after the regrid
  int fv_cells = 0;
  amr::ChiStats chi;  // on the mesh before the regrid
  mesh::AdaptSummary totals;
  int passes = 0;
};

// Indicator statistics after an accepted step; dt is that step's length.
struct MetricSample {
  double t = 0.0;
  double dt = 0.0;
  int leaves = 0;
  amr::ChiStats chi;
};

struct RunSummary {
  int steps = 0;     // accepted
  int attempts = 0;  // accepted + rejected
  int rejected = 0;
  int newton_failures = 0;
  int newton_iters = 0;
  int gmres_iters = 0;
  int rhs_evals = 0;
  int regrids = 0;
  double t_end = 0.0;
  double wall_seconds = 0.0;
  double min_raw_f = std::numeric_limits<double>::infinity();
  double mass_initial = 0.0;
  double mass_final = 0.0;
  int max_leaves = 0;
  std::vector<StepRecord> step_log;
  std::vector<RegridRecord> regrid_log;
  std::vector<MetricSample> metrics;
};

struct RunResult {
  RunSummary summary;
  amr::AdaptState state;
};

// Called after every step attempt with the current state.
using StepObserver = std::function<void(const StepRecord&, const amr::AdaptState&)>;

// Exact f(p, xi, t) of the selected manufactured solution.
std::function<double(double, double, double)> mms_exact(const RunConfig& cfg);

disc::OperatorConfig make_operator_config(const RunConfig& cfg);

// f~ = p * f0 sampled at the FV centers.
Eigen::VectorXd sample_initial(const RunConfig& cfg, const mesh::QuadMesh& mesh);

// Uniform min_level mesh refined against the sampled initial condition, with
// the initial condition re-sampled after every pass.
amr::AdaptState initial_state(const RunConfig& cfg);

// init, then [adapt_cycle every n_adapt steps, step, dt control] until
// t_final. Writes steps.csv, regrid.csv, metrics.csv, summary.json and
// snapshots under cfg.output_dir unless disabled. Throws SolverError when a
// step cannot be completed above dt_min, after dumping the state.
RunResult run_simulation(const RunConfig& cfg, const StepObserver& observer = {});

// Time average over samples with t in (t_from, t_to], weighted by dt.
amr::ChiStats time_average(const std::vector<MetricSample>& samples, double t_from, double t_to,
                           double* mean_leaves = nullptr);

}  // namespace rfp::cli
