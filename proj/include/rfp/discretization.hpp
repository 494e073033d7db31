#pragma once

#include "rfp/boundary.hpp"
#include "rfp/guards.hpp"
#include "rfp/physics.hpp"
#include "rfp/quadmesh.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <memory>
#include <vector>

namespace rfp::disc {

enum class AdvectionScheme { MUSCL, QUICK };
enum class Limiter { Minmod, VanLeer };

struct SchemeConfig {
  AdvectionScheme advection = AdvectionScheme::MUSCL;
  Limiter limiter = Limiter::Minmod;
  // Clamp-and-restore on guards interpolated across hanging faces. Must be
  // off for signed fields such as oscillating manufactured solutions.
  bool positivity = true;

  bool operator==(const SchemeConfig&) const = default;
};

// Physical: Chandrasekhar-based coefficients. Constant: C_F = 0 and
// C_A = C_B = eps, the diffusion used by manufactured solutions.
enum class CollisionModel { Physical, Constant, Off };

struct OperatorConfig {
  physics::PlasmaParams params;
  CollisionModel collisions = CollisionModel::Physical;
  double collision_eps = 0.0;
  SchemeConfig scheme;
  BoundarySpec bc;
};

double advective_face_value(double u_UU, double u_U, double u_D, AdvectionScheme scheme,
                            Limiter limiter);
double collisional_face_flux(double f_L, double f_R, double delta, double coeff);

physics::CollisionCoeffs model_coeffs(double p, const OperatorConfig& cfg);

// Semi-discrete operator d f~/dt = rhs(f~, t) on one mesh. Coefficients, guard
// rules and knock-on kinematics are cached at construction.
class SemiDiscretization {
 public:
  SemiDiscretization(const mesh::QuadMesh& mesh, const OperatorConfig& cfg);

  const mesh::QuadMesh& mesh() const { return *mesh_; }
  const OperatorConfig& config() const { return cfg_; }
  const mesh::GuardPlan& guard_plan() const { return plan_; }

  void rhs(const Eigen::VectorXd& u, double t, Eigen::VectorXd& out) const;
  Eigen::VectorXd rhs(const Eigen::VectorXd& u, double t) const;

  // Final (matched) face fluxes from the last rhs call: Gamma_p on p-faces and
  // p * Gamma_xi on xi-faces, 6 per leaf each, ordered (row or column)*3 + face.
  const Eigen::VectorXd& p_fluxes() const { return flux_p_; }
  const Eigen::VectorXd& xi_fluxes() const { return flux_x_; }

  // Jacobian of the linear part of rhs. QUICK uses its own stencil, MUSCL the
  // first-order upwind stencil. Guard positivity and the knock-on gain term
  // are left out.
  Eigen::SparseMatrix<double> low_order_jacobian() const;

 private:
  void raw_fluxes(const Eigen::VectorXd& u, const Eigen::VectorXd& g, int leaf) const;
  void match_fluxes(int leaf) const;

  const mesh::QuadMesh* mesh_;
  OperatorConfig cfg_;
  mesh::GuardPlan plan_;
  // Per leaf and face: advective velocity and diffusion coefficient divided by
  // the face-normal spacing. xi entries already carry the p_c factor.
  std::vector<double> vel_p_, dif_p_, vel_x_, dif_x_;
  std::unique_ptr<physics::KnockOnOperator> knock_on_;

  mutable Eigen::VectorXd guards_;
  mutable Eigen::VectorXd raw_p_, raw_x_, flux_p_, flux_x_, source_;
};

Eigen::VectorXd compute_rhs(const Eigen::VectorXd& field, const mesh::QuadMesh& mesh,
                            const OperatorConfig& cfg, double t);

// Guard values with the boundary rules applied; interior-sourced slots are
// filled as well so the result is directly usable as a stencil workspace.
Eigen::VectorXd apply_boundary_conditions(const Eigen::VectorXd& field, const mesh::QuadMesh& mesh,
                                          const OperatorConfig& cfg, double t);

}  // namespace rfp::disc
