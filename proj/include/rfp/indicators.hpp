#pragma once

#include "rfp/physics.hpp"
#include "rfp/quadmesh.hpp"

#include <Eigen/Core>

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rfp::amr {

enum class IndicatorVariant { GS, LGS, LDR };

struct IndicatorField {
  Eigen::VectorXd chi;  // one value per leaf
  IndicatorVariant variant = IndicatorVariant::LDR;
  std::optional<Eigen::VectorXd> chi_pred;
};

struct AdaptPolicy {
  double chi_min = 0.1;
  double chi_max = 1.0;
  int n_adapt = 32;
  int n_pred = 0;  // 0 disables prediction
  double epsilon = 1e-30;
  IndicatorVariant variant = IndicatorVariant::LDR;
  double cfl = 0.9;

  void validate() const;
  bool operator==(const AdaptPolicy&) const = default;
};

double indicator_GS(std::span<const double> values);
double indicator_LGS(std::span<const double> values);
double indicator_LDR(std::span<const double> values, double epsilon);

// Indicator of every leaf from its 2x2 samples |f| + epsilon, f = f~/p.
// LDR applies epsilon inside its own formula instead.
IndicatorField compute_indicators(const mesh::QuadMesh& mesh, const Eigen::VectorXd& field,
                                  IndicatorVariant variant, double epsilon);

// Uses chi_pred when present. Flags are clipped to the level bounds.
std::vector<mesh::RefineFlag> flag_cells(const IndicatorField& ind, const AdaptPolicy& policy,
                                         const mesh::QuadMesh& mesh);

// Running max of chi transported by the phase-space velocity with first-order
// upwind and forward Euler substeps over dt_pred.
Eigen::VectorXd predict_indicators(const IndicatorField& ind, const mesh::QuadMesh& mesh,
                                   const physics::PlasmaParams& params, double dt_pred,
                                   double cfl);

struct AdaptState {
  mesh::QuadMesh mesh;
  Eigen::VectorXd field;
};

struct CycleSummary {
  mesh::AdaptSummary totals;
  int passes = 0;
  bool changed = false;
  IndicatorField indicators;  // on the input mesh, before adaptation
};

// One regrid: indicators on the current mesh, optional prediction over
// dt_pred = n_pred * dt, flagging, refinement with balance, transfer. A single
// refine_and_balance call moves a leaf by at most one level, so the cycle
// repeats refine-only passes (recomputing chi on the transferred field) until
// nothing more is flagged or max_level - min_level passes are done.
CycleSummary adapt_cycle(AdaptState& state, const AdaptPolicy& policy,
                         const physics::PlasmaParams& params, double dt, bool positivity = true);

// Per-regrid statistics of chi: mean, standard deviation, max.
struct ChiStats {
  double mean = 0.0;
  double stddev = 0.0;
  double max = 0.0;
};
ChiStats chi_stats(const Eigen::VectorXd& chi);

IndicatorVariant parse_variant(const std::string& s);
std::string to_string(IndicatorVariant v);

}  // namespace rfp::amr
