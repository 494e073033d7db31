#pragma once

#include "rfp/boundary.hpp"
#include "rfp/quadmesh.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <vector>

namespace rfp::mesh {

// Guard storage: 16 slots per leaf, one strip of two FV cells along each side.
// depth 0 touches the leaf; t indexes the row (p sides) or column (xi sides).
inline int guard_slot(int leaf, Side s, int depth, int t) {
  return 16 * leaf + 4 * static_cast<int>(s) + 2 * depth + t;
}

enum class GuardSource {
  Interior,  // copy, interpolation or averaging of interior values
  Boundary,  // outside the domain
};

// A guard outside the domain: g = c0*u[u0] + c1*u[u1] + scale*value(p, xi, t).
struct BoundaryGuard {
  int slot = 0;
  Side side = Side::PMinus;
  int depth = 0;
  double c0 = 0.0;
  double c1 = 0.0;
  int u0 = 0;
  int u1 = 0;
  double scale = 0.0;  // multiplies the bc callback; 0 when none is used
  double p_eval = 0.0;
  double xi_eval = 0.0;
};

// Slots interpolated from one coarser leaf for one strip of one leaf. After a
// fill they are clamped at 0 and rescaled to the pre-clamp p-weighted mass.
struct PositivityGroup {
  std::vector<int> slots;
  std::vector<double> weights;  // p at the guard centers
};

struct GuardPlan {
  int n_leaves = 0;
  // Linear part of every guard, 16*n_leaves rows by 4*n_leaves columns,
  // including the homogeneous part of the boundary rules.
  Eigen::SparseMatrix<double, Eigen::RowMajor> linear;
  std::vector<BoundaryGuard> boundary;
  std::vector<PositivityGroup> groups;
  BoundarySpec bc;
  bool positivity = true;
};

GuardPlan build_guard_plan(const QuadMesh& mesh, const BoundarySpec& bc, bool positivity);

// Fills all guard slots from the interior field. Throws InternalError when the
// field size does not match or contains NaN.
void fill_guards(const GuardPlan& plan, const Eigen::VectorXd& field, double t,
                 Eigen::VectorXd& guards);

Eigen::VectorXd fill_guard_layers(const QuadMesh& mesh, const Eigen::VectorXd& field,
                                  const BoundarySpec& bc, double t, bool positivity = true);

}  // namespace rfp::mesh
