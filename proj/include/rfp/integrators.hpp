#pragma once

#include "rfp/errors.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <vector>

namespace rfp::time {

using Vector = Eigen::VectorXd;
// y = A x
using LinearOp = std::function<void(const Vector&, Vector&)>;

struct SolverConfig {
  double newton_rtol = 1e-8;
  double newton_atol = 1e-14;
  int newton_max_iters = 12;
  double gmres_rtol = 1e-6;
  int gmres_restart = 40;
  int gmres_max_iters = 400;
  double jfnk_perturbation_scale = 1.4901161193847656e-08;  // sqrt(machine epsilon)
  double step_tol = 1e-4;
  double step_atol = 1e-12;
  double step_safety = 0.9;
  double dt_min = 1e-10;
  double dt_max = 1.0;

  void validate() const {
    auto pos = [](double v, const char* name) {
      if (!(v > 0.0)) throw ConfigError(std::string("solver.") + name + " must be > 0");
    };
    pos(newton_rtol, "newton_rtol");
    pos(newton_atol, "newton_atol");
    pos(gmres_rtol, "gmres_rtol");
    pos(jfnk_perturbation_scale, "jfnk_perturbation_scale");
    pos(step_tol, "step_tol");
    pos(step_atol, "step_atol");
    pos(step_safety, "step_safety");
    pos(dt_min, "dt_min");
    pos(dt_max, "dt_max");
    if (newton_max_iters < 1) throw ConfigError("solver.newton_max_iters must be >= 1");
    if (gmres_restart < 1) throw ConfigError("solver.gmres_restart must be >= 1");
    if (gmres_max_iters < 1) throw ConfigError("solver.gmres_max_iters must be >= 1");
    if (!(dt_min <= dt_max)) throw ConfigError("solver.dt_min must not exceed solver.dt_max");
  }

  bool operator==(const SolverConfig&) const = default;
};

struct GmresResult {
  Vector x;
  int iterations = 0;
  double residual = 0.0;  // final ||b - A x||
  bool converged = false;
};

struct NewtonResult {
  Vector u;
  int iterations = 0;
  int gmres_iterations = 0;
  int residual_evals = 0;
  double residual_norm = 0.0;
  bool converged = false;
};

struct StepResult {
  Vector u;
  double error_estimate = 0.0;
  int newton_iters = 0;
  int gmres_iters = 0;
  int rhs_evals = 0;
  bool accepted = false;
};

// Restarted GMRES with modified Gram-Schmidt, right preconditioned by
// `precond` (which applies M^{-1}; may be empty). Stops at
// ||b - A x|| <= rtol * ||b||. Throws SolverError when three consecutive
// restart cycles fail to reduce the residual by 1%.
inline GmresResult gmres(const LinearOp& apply, const Vector& b, const Vector& x0, double rtol,
                         int restart, int max_iters, const LinearOp& precond = {}) {
  const Eigen::Index n = b.size();
  GmresResult res;
  res.x = x0.size() == n ? x0 : Vector::Zero(n);
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    res.x.setZero();
    res.converged = true;
    return res;
  }
  const double target = rtol * bnorm;
  const int m = std::max(1, restart);
  Vector r(n), w(n), z(n), tmp(n);
  apply(res.x, tmp);
  r = b - tmp;
  double beta = r.norm();
  res.residual = beta;
  if (beta <= target) {
    res.converged = true;
    return res;
  }
  std::vector<Vector> V(static_cast<std::size_t>(m + 1), Vector(n));
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m + 1, m);
  Eigen::VectorXd cs(m), sn(m), g(m + 1);
  int stalled = 0;
  while (res.iterations < max_iters) {
    const double cycle_start = beta;
    V[0] = r / beta;
    g.setZero();
    g[0] = beta;
    H.setZero();
    int j = 0;
    for (; j < m && res.iterations < max_iters; ++j) {
      if (precond) {
        precond(V[static_cast<std::size_t>(j)], z);
        apply(z, w);
      } else {
        apply(V[static_cast<std::size_t>(j)], w);
      }
      ++res.iterations;
      for (int i = 0; i <= j; ++i) {
        H(i, j) = w.dot(V[static_cast<std::size_t>(i)]);
        w -= H(i, j) * V[static_cast<std::size_t>(i)];
      }
      H(j + 1, j) = w.norm();
      if (H(j + 1, j) > 0.0) V[static_cast<std::size_t>(j + 1)] = w / H(j + 1, j);
      for (int i = 0; i < j; ++i) {
        const double t = cs[i] * H(i, j) + sn[i] * H(i + 1, j);
        H(i + 1, j) = -sn[i] * H(i, j) + cs[i] * H(i + 1, j);
        H(i, j) = t;
      }
      const double den = std::hypot(H(j, j), H(j + 1, j));
      cs[j] = den > 0.0 ? H(j, j) / den : 1.0;
      sn[j] = den > 0.0 ? H(j + 1, j) / den : 0.0;
      H(j, j) = den;
      H(j + 1, j) = 0.0;
      g[j + 1] = -sn[j] * g[j];
      g[j] = cs[j] * g[j];
      if (std::abs(g[j + 1]) <= target || H(j, j) == 0.0) {
        ++j;
        break;
      }
    }
    // Solve the small upper triangular system and update x.
    Vector y = Vector::Zero(j);
    for (int i = j - 1; i >= 0; --i) {
      double s = g[i];
      for (int k = i + 1; k < j; ++k) s -= H(i, k) * y[k];
      y[i] = H(i, i) != 0.0 ? s / H(i, i) : 0.0;
    }
    Vector update = Vector::Zero(n);
    for (int i = 0; i < j; ++i) update += y[i] * V[static_cast<std::size_t>(i)];
    if (precond) {
      precond(update, z);
      res.x += z;
    } else {
      res.x += update;
    }
    apply(res.x, tmp);
    r = b - tmp;
    beta = r.norm();
    res.residual = beta;
    if (beta <= target) {
      res.converged = true;
      return res;
    }
    stalled = beta > 0.99 * cycle_start ? stalled + 1 : 0;
    if (stalled >= 3) {
      std::ostringstream os;
      os << "GMRES stagnated over 3 restarts, residual " << beta << " vs target " << target;
      throw SolverError(os.str(), beta);
    }
  }
  return res;
}

// Newton's method with finite-difference Jacobian-vector products.
// `precond` (optional) applies an approximation of J^{-1}.
inline NewtonResult newton_krylov_solve(const std::function<void(const Vector&, Vector&)>& residual,
                                        const Vector& u0, const SolverConfig& cfg,
                                        const LinearOp& precond = {}) {
  NewtonResult out;
  out.u = u0;
  Vector F(u0.size()), Fp(u0.size()), up(u0.size());
  residual(out.u, F);
  ++out.residual_evals;
  const double f0 = F.norm();
  out.residual_norm = f0;
  if (!std::isfinite(f0)) {
    out.converged = false;
    return out;
  }
  const double tol = cfg.newton_atol + cfg.newton_rtol * f0;
  if (f0 <= cfg.newton_atol || f0 == 0.0) {
    out.converged = true;
    return out;
  }
  while (out.iterations < cfg.newton_max_iters) {
    const double unorm = out.u.norm();
    const LinearOp jv = [&](const Vector& v, Vector& y) {
      const double vn = v.norm();
      if (vn == 0.0) {
        y.setZero(v.size());
        return;
      }
      const double sigma = cfg.jfnk_perturbation_scale * (1.0 + unorm) / vn;
      up = out.u + sigma * v;
      residual(up, Fp);
      ++out.residual_evals;
      y = (Fp - F) / sigma;
    };
    Vector rhs = -F;
    GmresResult g;
    try {
      g = gmres(jv, rhs, Vector::Zero(F.size()), cfg.gmres_rtol, cfg.gmres_restart,
                cfg.gmres_max_iters, precond);
    } catch (const SolverError&) {
      return out;
    }
    out.gmres_iterations += g.iterations;
    out.u += g.x;
    ++out.iterations;
    residual(out.u, F);
    ++out.residual_evals;
    out.residual_norm = F.norm();
    if (!std::isfinite(out.residual_norm)) return out;
    if (out.residual_norm <= tol) {
      out.converged = true;
      return out;
    }
  }
  return out;
}

// Shu-Osher three-stage SSP-RK3.
template <class Rhs>
Vector ssp_rk3_step(Rhs&& rhs, const Vector& u, double t, double dt) {
  if (!(dt > 0.0)) throw SolverError("ssp_rk3_step: dt must be > 0");
  Vector k(u.size());
  rhs(t, u, k);
  Vector u1 = u + dt * k;
  rhs(t + dt, u1, k);
  Vector u2 = 0.75 * u + 0.25 * (u1 + dt * k);
  rhs(t + 0.5 * dt, u2, k);
  Vector out = (1.0 / 3.0) * u + (2.0 / 3.0) * (u2 + dt * k);
  if (!out.allFinite()) throw SolverError("ssp_rk3_step produced non-finite values");
  return out;
}

// TR-BDF2 written as a stiffly accurate ESDIRK with an explicit first stage.
struct Esdirk2Tableau {
  static constexpr double gamma = 1.0 - 0.70710678118654752440;  // 1 - 1/sqrt(2)
  static constexpr double w = 0.35355339059327376220;             // sqrt(2)/4
  static constexpr double c2 = 2.0 * gamma;
};

// Builds M^{-1} for the stage matrix I - gamma*dt*J, given gamma*dt.
using PrecondFactory = std::function<LinearOp(double)>;

inline double weighted_rms(const Vector& e, const Vector& u, double atol) {
  if (e.size() == 0) return 0.0;
  const double s = (e.array() / (atol + u.array().abs())).square().sum();
  return std::sqrt(s / static_cast<double>(e.size()));
}

// One ESDIRK2 step. The error estimate is gamma*dt*(k3 - k2), the difference
// to the first-order companion with weights (w, w + gamma, 0), measured as a
// weighted RMS relative to step_atol + |u|. `rhs(t, u, out)`.
template <class Rhs>
StepResult esdirk2_step(Rhs&& rhs, const Vector& u, double t, double dt, const SolverConfig& cfg,
                        const PrecondFactory& precond_factory = {}) {
  using T = Esdirk2Tableau;
  if (!(dt > 0.0)) throw SolverError("esdirk2_step: dt must be > 0");
  StepResult res;
  res.u = u;
  const double gdt = T::gamma * dt;
  const LinearOp precond = precond_factory ? precond_factory(gdt) : LinearOp{};

  Vector k1(u.size());
  rhs(t, u, k1);
  ++res.rhs_evals;

  auto solve_stage = [&](double t_stage, const Vector& known, const Vector& guess, Vector& U) {
    const auto F = [&](const Vector& x, Vector& r) {
      Vector f(x.size());
      rhs(t_stage, x, f);
      r = x - known - gdt * f;
    };
    // The preconditioner approximates (I - gdt J)^{-1}.
    NewtonResult nr = newton_krylov_solve(F, guess, cfg, precond);
    res.newton_iters += nr.iterations;
    res.gmres_iters += nr.gmres_iterations;
    res.rhs_evals += nr.residual_evals;
    U = nr.u;
    return nr.converged;
  };

  // Stage 2: U2 = u + dt*gamma*(k1 + k2).
  const Vector known2 = u + gdt * k1;
  Vector U2;
  if (!solve_stage(t + T::c2 * dt, known2, u + T::c2 * dt * k1, U2)) return res;
  const Vector k2 = (U2 - known2) / gdt;

  // Stage 3: U3 = u + dt*(w*k1 + w*k2 + gamma*k3).
  const Vector known3 = u + dt * T::w * (k1 + k2);
  Vector U3;
  if (!solve_stage(t + dt, known3, U2 + (1.0 - T::c2) * dt * k2, U3)) return res;
  const Vector k3 = (U3 - known3) / gdt;

  if (!U3.allFinite()) return res;
  res.error_estimate = weighted_rms(gdt * (k3 - k2), u, cfg.step_atol);
  res.u = U3;
  res.accepted = true;
  return res;
}

// Step size proposal. Rejected steps are halved before the error formula is
// applied; a zero error estimate jumps to dt_max.
inline double adapt_timestep(double error_estimate, double dt, const SolverConfig& cfg,
                             bool accepted = true) {
  if (!(error_estimate >= 0.0)) throw SolverError("adapt_timestep: negative or NaN error estimate");
  if (!accepted) dt *= 0.5;
  double next;
  if (error_estimate == 0.0) {
    next = cfg.dt_max;
  } else {
    next = dt * cfg.step_safety * std::sqrt(cfg.step_tol / error_estimate);
  }
  return std::clamp(next, cfg.dt_min, cfg.dt_max);
}

// Point-Jacobi preconditioner for I - gdt*J with diag(J) estimated by probing
// with vectors that are 1 on every index congruent to q modulo `stride`.
template <class Rhs>
PrecondFactory probing_jacobi(Rhs rhs, const Vector& u, double t, int stride) {
  Vector f0(u.size());
  rhs(t, u, f0);
  Vector diag(u.size());
  const double sigma = 1.4901161193847656e-08 * (1.0 + u.cwiseAbs().maxCoeff());
  Vector up(u.size()), f1(u.size());
  for (int q = 0; q < stride; ++q) {
    up = u;
    for (Eigen::Index i = q; i < u.size(); i += stride) up[i] += sigma;
    rhs(t, up, f1);
    for (Eigen::Index i = q; i < u.size(); i += stride) diag[i] = (f1[i] - f0[i]) / sigma;
  }
  return [diag](double gdt) -> LinearOp {
    Vector inv = (1.0 - gdt * diag.array()).inverse().matrix();
    for (Eigen::Index i = 0; i < inv.size(); ++i)
      if (!std::isfinite(inv[i])) inv[i] = 1.0;
    return [inv](const Vector& x, Vector& y) { y = inv.cwiseProduct(x); };
  };
}

}  // namespace rfp::time
