// rfp: command line front end for the drift-kinetic solver.
//
//   rfp run <cfg>            single simulation
//   rfp mms <cfg>            manufactured-solution convergence table
//   rfp predict-study <cfg>  regrid frequency x prediction grid
//
// Exit codes: 0 success, 2 configuration error, 3 solver failure.

#include "rfp/config.hpp"
#include "rfp/driver.hpp"
#include "rfp/errors.hpp"
#include "rfp/studies.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <vector>

namespace {

rfp::cli::RunConfig load(const std::string& path, const std::vector<std::string>& overrides,
                         int threads, const std::string& output_dir) {
  rfp::cli::RunConfig cfg = rfp::cli::load_config(path);
  for (const auto& o : overrides) rfp::cli::apply_override(cfg, o);
  if (threads > 0) cfg.threads = threads;
  if (!output_dir.empty()) cfg.output_dir = output_dir;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relativistic drift-kinetic Fokker-Planck solver with adaptive quadtree meshes"};
  app.require_subcommand(1);

  int threads = 0;
  std::string output_dir;
  std::vector<std::string> overrides;
  app.add_option("--threads", threads, "OpenMP threads (0 keeps the default)")->check(CLI::NonNegativeNumber);
  app.add_option("--output-dir", output_dir, "Override output.dir");
  app.add_option("--override", overrides, "key=value, repeatable")->take_all();

  std::string cfg_path;
  auto* run = app.add_subcommand("run", "Run one simulation");
  run->add_option("config", cfg_path, "Config file")->required();
  auto* mms = app.add_subcommand("mms", "Manufactured-solution convergence study");
  mms->add_option("config", cfg_path, "Config file")->required();
  auto* pred = app.add_subcommand("predict-study", "Regrid frequency and prediction study");
  pred->add_option("config", cfg_path, "Config file")->required();
  for (auto* sub : {run, mms, pred}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const rfp::cli::RunConfig cfg = load(cfg_path, overrides, threads, output_dir);
    if (run->parsed()) {
      const auto r = rfp::cli::run_simulation(cfg);
      const auto& s = r.summary;
      std::printf("steps %d  rejected %d  newton %d  gmres %d  rhs %d  regrids %d  leaves %d  wall %.2fs\n",
                  s.steps, s.rejected, s.newton_iters, s.gmres_iters, s.rhs_evals, s.regrids,
                  r.state.mesh.size(), s.wall_seconds);
    } else if (mms->parsed()) {
      const auto rows = rfp::cli::run_mms_convergence(cfg);
      std::printf("%-10s %8s %10s %7s %6s %12s\n", "levels", "cells", "dt", "steps", "RF", "rel L2");
      for (const auto& r : rows)
        std::printf("(%d..%d)    %8d %10.4g %7d %6d %12.4e\n", r.setup.min_level, r.setup.max_level,
                    r.total_fv_cells, r.setup.dt, r.steps, r.refine_frequency, r.error.value);
    } else if (pred->parsed()) {
      const auto runs = rfp::cli::run_prediction_study(cfg);
      std::printf("%-10s %10s %10s %10s %12s\n", "run", "<mean>", "<std>", "<max>", "<fv cells>");
      for (const auto& r : runs)
        std::printf("RF%-3d%-5s %10.4f %10.4f %10.4f %12.1f\n", r.frequency,
                    r.prediction ? "-pred" : "", r.average.mean, r.average.stddev, r.average.max,
                    4.0 * r.mean_leaves);
    }
  } catch (const rfp::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const rfp::SolverError& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    return 3;
  } catch (const rfp::DomainError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }
  return 0;
}
