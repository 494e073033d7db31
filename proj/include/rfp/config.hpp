#pragma once

#include "rfp/discretization.hpp"
#include "rfp/indicators.hpp"
#include "rfp/integrators.hpp"
#include "rfp/physics.hpp"
#include "rfp/quadmesh.hpp"

#include <string>
#include <vector>

namespace rfp::cli {

// physical: Dirichlet Maxwellian at p_min, Neumann at p_max.
// mms: exact time-dependent Dirichlet data on both momentum edges.
// zero_flux: closed momentum edges.
enum class BoundaryMode { Physical, Mms, ZeroFlux };
enum class IntegratorKind { SspRk3, Esdirk2 };
enum class InitialKind { Maxwellian, MaxwellianTail, Bump, Mms };
enum class MmsSolution { SinExp, Sin, Cos2, Exponential };
enum class PreconditionerKind { None, Jacobi, LowOrderLu };
enum class OutputFormat { None, Csv, Vtk, Both };

struct TailParams {
  double amplitude = 1e-15;
  double p0 = 40.0;
  double p_width2 = 25.0;
  double xi0 = -0.9;
  double xi_width2 = 0.0025;

  bool operator==(const TailParams&) const = default;
};

struct MmsSetup {
  int min_level = 2;
  int max_level = 4;
  double dt = 0.08;

  bool operator==(const MmsSetup&) const = default;
};

struct RunConfig {
  mesh::DomainBox box;
  int n_p = 3;
  int n_xi = 1;
  mesh::LevelBounds levels{2, 6};
  disc::SchemeConfig scheme;
  BoundaryMode boundary = BoundaryMode::Physical;
  physics::PlasmaParams params;  // gamma0 is derived from box.p_min
  disc::CollisionModel collisions = disc::CollisionModel::Physical;
  double collision_eps = 0.05;

  InitialKind initial = InitialKind::Maxwellian;
  TailParams tail;

  MmsSolution mms_solution = MmsSolution::SinExp;
  std::vector<MmsSetup> mms_setups;
  // Simulated time between regrids in the convergence study; the per-setup
  // step count is this divided by the setup's dt.
  double mms_adapt_interval = 1.28;
  // amr.chi_min and amr.chi_max are multiplied by this once per setup, so
  // the refinement tolerance tightens along with the level shift.
  double mms_threshold_scale = 0.5;

  IntegratorKind integrator = IntegratorKind::SspRk3;
  double t_final = 0.0;
  double dt_init = 1e-3;
  bool adaptive_dt = true;  // ESDIRK2 only
  time::SolverConfig solver;
  PreconditionerKind preconditioner = PreconditionerKind::LowOrderLu;
  // Clamp negative f~ to 0 after every accepted step; the raw minimum is still logged.
  bool clamp_after_step = false;

  bool amr_enabled = true;
  amr::AdaptPolicy amr;
  int initial_passes = -1;  // -1: max_level - min_level

  std::string output_dir = "out";
  int snapshot_every = 0;  // steps; 0 writes initial and final only
  OutputFormat output_format = OutputFormat::Csv;
  bool write_logs = true;

  std::vector<int> study_frequencies{32, 16, 8, 4};
  double study_average_from = 0.5;

  int threads = 0;  // 0 keeps the OpenMP default

  bool operator==(const RunConfig&) const = default;
};

// Parses `key = value` lines. Throws ConfigError with the line number on
// syntax errors or unknown keys and with the violated constraint on
// validation failure.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

// Applies one `key=value` override and revalidates.
void apply_override(RunConfig& cfg, const std::string& assignment);

// Every key with its current value; parse_config(serialize_config(c)) == c.
std::string serialize_config(const RunConfig& cfg);

void validate(const RunConfig& cfg);

// Keys accepted by parse_config, in serialization order.
std::vector<std::string> config_keys();

std::string to_string(BoundaryMode m);
std::string to_string(IntegratorKind k);
std::string to_string(MmsSolution s);

}  // namespace rfp::cli
