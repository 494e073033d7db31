#pragma once

#include "rfp/config.hpp"
#include "rfp/diagnostics.hpp"
#include "rfp/driver.hpp"

#include <vector>

namespace rfp::cli {

struct MmsRow {
  MmsSetup setup;
  std::vector<int> fv_cells_per_level;  // index = level - setup.min_level, at t_final
  int total_fv_cells = 0;
  int steps = 0;
  int refine_frequency = 0;
  diag::ErrorReport error;
  double wall_seconds = 0.0;
};

// One run per entry of cfg.mms_setups (or the configured levels and dt_init
// when the list is empty). Writes mms_convergence.csv under cfg.output_dir.
std::vector<MmsRow> run_mms_convergence(const RunConfig& cfg);

struct PredictionRun {
  int frequency = 0;
  bool prediction = false;
  amr::ChiStats average;  // over (study_average_from, t_final]
  double mean_leaves = 0.0;
  RunSummary summary;
};

// RF in cfg.study_frequencies, each with and without prediction (n_pred = RF).
// Writes prediction_study.csv plus one subdirectory per run.
std::vector<PredictionRun> run_prediction_study(const RunConfig& cfg);

// A single study entry; exposed for the acceptance suite.
PredictionRun run_prediction_case(const RunConfig& cfg, int frequency, bool prediction);

}  // namespace rfp::cli
