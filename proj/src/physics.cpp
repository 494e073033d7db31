#include "rfp/physics.hpp"

#include "rfp/errors.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

namespace rfp::physics {

namespace {

constexpr double kSqrtPi = 1.7724538509055160273;

}  // namespace

void PlasmaParams::validate() const {
  if (!std::isfinite(E)) throw ConfigError("physics.E must be finite");
  if (!(alpha >= 0.0)) throw ConfigError("physics.alpha must be >= 0");
  if (!(vt_hat > 0.0 && vt_hat < 1.0)) throw ConfigError("physics.vt_hat must lie in (0, 1)");
  if (!(Z >= 0.0)) throw ConfigError("physics.Z must be >= 0");
  if (!(lnLambda > 0.0)) throw ConfigError("physics.lnLambda must be > 0");
  if (!(gamma0 >= 1.0)) throw ConfigError("gamma0 must be >= 1");
}

double chandrasekhar(double x) {
  if (!(x >= 0.0)) throw DomainError("chandrasekhar: negative argument");
  if (x < 0.1) {
    // psi = (1/sqrt(pi)) * sum_{n>=1} (-1)^(n+1) 2n / ((2n+1) n!) x^(2n-1)
    const double x2 = x * x;
    double term = x;  // x^(2n-1) / n!
    double sum = 0.0;
    for (int n = 1; n <= 8; ++n) {
      const double c = 2.0 * n / (2.0 * n + 1.0);
      sum += (n % 2 == 1 ? c : -c) * term;
      term *= x2 / (n + 1);
    }
    return sum / kSqrtPi;
  }
  const double derf = 2.0 / kSqrtPi * std::exp(-x * x);
  return (std::erf(x) - x * derf) / (2.0 * x * x);
}

CollisionCoeffs collision_coeffs(double p, const PlasmaParams& params) {
  if (!(p > 0.0)) throw DomainError("collision_coeffs: p must be > 0");
  const double g = lorentz(p);
  const double vt = params.vt_hat;
  const double x = p / (g * vt);
  const double psi = chandrasekhar(x);
  CollisionCoeffs c;
  c.C_F = 2.0 / (vt * vt) * psi;
  c.C_A = g / p * psi;
  c.C_B = g / (2.0 * p) * (params.Z + std::erf(x) - psi + 0.5 * vt * vt * p * p / (g * g));
  return c;
}

AdvectionCoeffs advection_coeffs(double p, double xi, const PlasmaParams& params) {
  const double g = lorentz(p);
  const double s = 1.0 - xi * xi;
  return {-(params.E * xi + params.alpha * p * g * s), -s * (params.E / p - params.alpha * xi / g)};
}

double maxwell_juttner(double p, const PlasmaParams& params) {
  const double vt = params.vt_hat;
  return std::exp((1.0 - lorentz(p)) / (0.5 * vt * vt)) / (vt * vt * vt * kPi * kSqrtPi);
}

KnockOnKinematics knock_on_kinematics(double p, double xi) {
  KnockOnKinematics k;
  const double g = lorentz(p);
  k.gamma = g;
  k.band_lo = -std::sqrt(g / (g + 1.0));
  k.band_hi = -p / (g + 1.0);
  const double a = (g + 1.0) / (g - 1.0) * xi * xi;
  if (xi < 0.0 && a > 1.0) {
    k.gamma_star = (a + 1.0) / (a - 1.0);
    k.p_star = std::sqrt(k.gamma_star * k.gamma_star - 1.0);
  } else {
    k.gamma_star = std::numeric_limits<double>::quiet_NaN();
    k.p_star = std::numeric_limits<double>::quiet_NaN();
  }
  // xi^2 <= g/(g+1) is the same condition as gamma* >= 2g - 1.
  k.in_band = xi < 0.0 && a > 1.0 && xi * xi <= g / (g + 1.0);
  return k;
}

double moller_bracket(double gamma_prime, double gamma) {
  const double nu = (gamma - 1.0) / (gamma_prime - 1.0);
  const double x = 1.0 / (nu * (1.0 - nu));
  const double r = (gamma_prime - 1.0) / gamma_prime;
  return x * x - 3.0 * x + r * r * (1.0 + x);
}

double moller_dsigma(double gamma_prime, double gamma) {
  const double nu = (gamma - 1.0) / (gamma_prime - 1.0);
  if (!(nu > 0.0 && nu < 1.0)) {
    std::ostringstream os;
    os << "moller_dsigma: nu = " << nu << " outside (0, 1)";
    throw DomainError(os.str());
  }
  if (nu < 1e-8 || 1.0 - nu < 1e-8) return 0.0;
  const double p = std::sqrt(gamma * gamma - 1.0);
  const double gm = gamma_prime - 1.0;
  const double pref = 2.0 * kPi * gamma_prime * gamma_prime / (gm * gm * gm * (gamma_prime + 1.0));
  return p / gamma * pref * moller_bracket(gamma_prime, gamma);
}

double moller_sigma_integrated(double gamma, double gamma0) {
  if (!(gamma > 1.0)) throw DomainError("moller_sigma_integrated: gamma must be > 1");
  if (!(gamma0 > 1.0)) throw DomainError("moller_sigma_integrated: gamma0 must be > 1");
  if (gamma < 2.0 * gamma0 - 1.0) return 0.0;
  const double g2 = gamma * gamma;
  const double t1 = 0.5 * (gamma + 1.0) - gamma0;
  const double t2 = g2 * (1.0 / (gamma - gamma0) - 1.0 / (gamma0 - 1.0));
  const double t3 = (2.0 * gamma - 1.0) / (gamma - 1.0) * std::log((gamma0 - 1.0) / (gamma - gamma0));
  return 2.0 * kPi / (g2 - 1.0) * (t1 - t2 + t3);
}

KnockOnOperator::KnockOnOperator(const mesh::QuadMesh& mesh, const PlasmaParams& params)
    : mesh_(&mesh), lines_(mesh, diag::default_p_samples(mesh)), sink_(mesh.num_fv()) {
  const double p_max = mesh.box().p_max;
  for (int i = 0; i < mesh.size(); ++i) {
    for (int bb = 0; bb < 2; ++bb) {
      for (int a = 0; a < 2; ++a) {
        const int d = mesh::dof(i, a, bb);
        const double p = mesh.fv_p(i, a);
        const double xi = mesh.fv_xi(i, bb);
        const double g = lorentz(p);
        sink_[d] = moller_sigma_integrated(g, params.gamma0) / params.lnLambda;
        const KnockOnKinematics k = knock_on_kinematics(p, xi);
        if (!k.in_band || !(k.p_star <= p_max)) continue;
        const double ds = moller_dsigma(k.gamma_star, g);
        if (ds == 0.0) continue;
        const double ps2 = k.p_star * k.p_star;
        gated_.push_back({d, k.p_star, ps2 * ps2 / (p * p * std::abs(xi)) * ds / params.lnLambda});
      }
    }
  }
}

void KnockOnOperator::apply(const Eigen::VectorXd& field, Eigen::VectorXd& source) const {
  const mesh::QuadMesh& mesh = *mesh_;
  source.resize(mesh.num_fv());
  for (int d = 0; d < mesh.num_fv(); ++d) {
    const double f = std::max(0.0, field[d]) / mesh.fv_p(d / 4, d % 2);
    source[d] = -sink_[d] * f;
  }
  if (gated_.empty()) return;
  Eigen::VectorXd clamped = field.cwiseMax(0.0);
  const std::vector<double> F = lines_.evaluate(clamped, true);
  const std::vector<double>& ps = lines_.samples();
  for (const Gated& gc : gated_) {
    // Piecewise-linear interpolation of F with constant extension past the ends.
    double Fq;
    auto it = std::upper_bound(ps.begin(), ps.end(), gc.p_star);
    if (it == ps.begin()) {
      Fq = F.front();
    } else if (it == ps.end()) {
      Fq = F.back();
    } else {
      const std::size_t k = static_cast<std::size_t>(it - ps.begin());
      const double w = (gc.p_star - ps[k - 1]) / (ps[k] - ps[k - 1]);
      Fq = (1.0 - w) * F[k - 1] + w * F[k];
    }
    source[gc.dof] += gc.prefactor * Fq;
  }
}

Eigen::VectorXd knock_on_source(const Eigen::VectorXd& field, const mesh::QuadMesh& mesh,
                                const PlasmaParams& params) {
  Eigen::VectorXd s;
  KnockOnOperator(mesh, params).apply(field, s);
  return s;
}

}  // namespace rfp::physics
