#pragma once

#include "rfp/diagnostics.hpp"
#include "rfp/quadmesh.hpp"

#include <Eigen/Core>

#include <cmath>
#include <vector>

namespace rfp::physics {

inline constexpr double kPi = 3.14159265358979323846;

struct PlasmaParams {
  double E = 0.0;        // parallel field in units of the critical field
  double alpha = 0.0;    // radiation damping strength
  double vt_hat = 0.1;   // thermal speed over c
  double Z = 1.0;
  double lnLambda = 15.0;
  bool knock_on_enabled = false;
  double gamma0 = 1.0;   // sqrt(1 + p_min^2); set from the domain

  void validate() const;
  bool operator==(const PlasmaParams&) const = default;
};

struct CollisionCoeffs {
  double C_F = 0.0;
  double C_A = 0.0;
  double C_B = 0.0;
};

struct AdvectionCoeffs {
  double a_p = 0.0;
  double a_xi = 0.0;
};

struct KnockOnKinematics {
  double gamma = 1.0;
  double gamma_star = 0.0;  // NaN outside the band
  double p_star = 0.0;      // NaN outside the band
  double band_lo = 0.0;     // -sqrt(gamma/(gamma+1))
  double band_hi = 0.0;     // -p/(gamma+1)
  bool in_band = false;
};

inline double lorentz(double p) { return std::sqrt(1.0 + p * p); }

double chandrasekhar(double x);
CollisionCoeffs collision_coeffs(double p, const PlasmaParams& params);
AdvectionCoeffs advection_coeffs(double p, double xi, const PlasmaParams& params);
double maxwell_juttner(double p, const PlasmaParams& params);

KnockOnKinematics knock_on_kinematics(double p, double xi);
// Bracket of the Moller cross section for primary gamma_prime and secondary gamma.
double moller_bracket(double gamma_prime, double gamma);
double moller_dsigma(double gamma_prime, double gamma);
double moller_sigma_integrated(double gamma, double gamma0);

// Knock-on source with the per-cell kinematics cached for one mesh.
class KnockOnOperator {
 public:
  KnockOnOperator(const mesh::QuadMesh& mesh, const PlasmaParams& params);

  // S = S1 + S2, the source for f at every FV center. `field` holds f~ = f*p;
  // negative values are clamped before use.
  void apply(const Eigen::VectorXd& field, Eigen::VectorXd& source) const;

  // Per-cell sink rate sigma(gamma, gamma0)/lnLambda, so that S2 = -rate * f.
  const Eigen::VectorXd& sink_rate() const { return sink_; }

 private:
  struct Gated {
    int dof;
    double p_star;
    double prefactor;  // p*^4 / (p^2 |xi|) * dsigma/dp / lnLambda
  };
  const mesh::QuadMesh* mesh_;
  diag::LineIntegrator lines_;
  std::vector<Gated> gated_;
  Eigen::VectorXd sink_;
};

// Knock-on source for f on the FV centers of `mesh`. `field` holds f~ = f*p.
Eigen::VectorXd knock_on_source(const Eigen::VectorXd& field, const mesh::QuadMesh& mesh,
                                const PlasmaParams& params);

}  // namespace rfp::physics
