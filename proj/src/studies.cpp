#include "rfp/studies.hpp"

#include "rfp/errors.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

namespace rfp::cli {

namespace fs = std::filesystem;

std::vector<MmsRow> run_mms_convergence(const RunConfig& cfg) {
  if (cfg.boundary != BoundaryMode::Mms)
    throw ConfigError("the convergence study requires boundary.mode = mms");
  std::vector<MmsSetup> setups = cfg.mms_setups;
  if (setups.empty()) setups.push_back({cfg.levels.min_level, cfg.levels.max_level, cfg.dt_init});

  const auto exact = mms_exact(cfg);
  std::vector<MmsRow> rows;
  double scale = 1.0;
  for (const auto& s : setups) {
    RunConfig c = cfg;
    c.amr.chi_min = cfg.amr.chi_min * scale;
    c.amr.chi_max = cfg.amr.chi_max * scale;
    scale *= cfg.mms_threshold_scale;
    c.levels = {s.min_level, s.max_level};
    c.dt_init = s.dt;
    c.adaptive_dt = false;
    const int n_adapt = std::max(1, static_cast<int>(std::lround(cfg.mms_adapt_interval / s.dt)));
    c.amr.n_pred = static_cast<int>(
        std::lround(static_cast<double>(cfg.amr.n_pred) * n_adapt / cfg.amr.n_adapt));
    c.amr.n_adapt = n_adapt;
    char sub[64];
    std::snprintf(sub, sizeof sub, "mms_L%d-%d", s.min_level, s.max_level);
    c.output_dir = (fs::path(cfg.output_dir) / sub).string();

    RunResult r = run_simulation(c);
    MmsRow row;
    row.setup = s;
    row.steps = r.summary.steps;
    row.refine_frequency = n_adapt;
    row.wall_seconds = r.summary.wall_seconds;
    row.fv_cells_per_level.assign(static_cast<std::size_t>(s.max_level - s.min_level + 1), 0);
    for (const auto& leaf : r.state.mesh.leaves())
      row.fv_cells_per_level[static_cast<std::size_t>(leaf.level - s.min_level)] += 4;
    row.total_fv_cells = r.state.mesh.num_fv();
    row.error = diag::mms_error(r.state.field, exact, r.state.mesh, r.summary.t_end,
                                diag::NormKind::RelativeL2);
    rows.push_back(row);
  }

  fs::create_directories(cfg.output_dir);
  const std::string path = (fs::path(cfg.output_dir) / "mms_convergence.csv").string();
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw SolverError("cannot write " + path);
  std::fprintf(f, "min_level,max_level,cells_per_level,total_cells,dt,steps,refine_freq,rel_l2_error\n");
  for (const auto& r : rows) {
    std::string cells;
    for (int n : r.fv_cells_per_level) cells += (cells.empty() ? "" : ";") + std::to_string(n);
    std::fprintf(f, "%d,%d,%s,%d,%.17g,%d,%d,%.17g\n", r.setup.min_level, r.setup.max_level,
                 cells.c_str(), r.total_fv_cells, r.setup.dt, r.steps, r.refine_frequency,
                 r.error.value);
  }
  std::fclose(f);
  return rows;
}

PredictionRun run_prediction_case(const RunConfig& cfg, int frequency, bool prediction) {
  RunConfig c = cfg;
  c.amr_enabled = true;
  c.amr.n_adapt = frequency;
  c.amr.n_pred = prediction ? frequency : 0;
  char sub[64];
  std::snprintf(sub, sizeof sub, "RF%d%s", frequency, prediction ? "-pred" : "");
  c.output_dir = (fs::path(cfg.output_dir) / sub).string();
  PredictionRun run;
  run.frequency = frequency;
  run.prediction = prediction;
  RunResult r = run_simulation(c);
  run.average = time_average(r.summary.metrics, cfg.study_average_from, r.summary.t_end,
                             &run.mean_leaves);
  run.summary = std::move(r.summary);
  return run;
}

std::vector<PredictionRun> run_prediction_study(const RunConfig& cfg) {
  std::vector<PredictionRun> runs;
  for (int rf : cfg.study_frequencies)
    for (bool pred : {false, true}) runs.push_back(run_prediction_case(cfg, rf, pred));

  fs::create_directories(cfg.output_dir);
  const std::string path = (fs::path(cfg.output_dir) / "prediction_study.csv").string();
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw SolverError("cannot write " + path);
  std::fprintf(f, "frequency,prediction,mean_chi,std_chi,max_chi,mean_leaves,mean_fv_cells,steps\n");
  for (const auto& r : runs)
    std::fprintf(f, "%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n", r.frequency, r.prediction ? 1 : 0,
                 r.average.mean, r.average.stddev, r.average.max, r.mean_leaves,
                 4.0 * r.mean_leaves, r.summary.steps);
  std::fclose(f);
  return runs;
}

}  // namespace rfp::cli
