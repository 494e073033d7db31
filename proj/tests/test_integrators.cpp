#include "rfp/errors.hpp"
#include "rfp/integrators.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <vector>

using namespace rfp::time;
using doctest::Approx;

namespace {

Vector scalar(double v) { return Vector::Constant(1, v); }

// Fixed-step integration of u' = rhs(t, u) over [0, T].
template <class Step>
Vector integrate(Step&& step, Vector u, double T, int n) {
  const double dt = T / n;
  for (int k = 0; k < n; ++k) u = step(u, k * dt, dt);
  return u;
}

template <class Err>
double observed_order(Err&& err, int n0) {
  const double e1 = err(n0), e2 = err(2 * n0);
  return std::log2(e1 / e2);
}

// Finite-difference Jacobian products limit each Newton update to about
// 1e-8 relative accuracy; GMRES cannot be asked for much more than that on a
// nonlinear residual.
SolverConfig tight() {
  SolverConfig c;
  c.newton_rtol = 1e-10;
  c.newton_atol = 1e-13;
  c.gmres_rtol = 1e-7;
  return c;
}

SolverConfig loose() {
  SolverConfig c;
  c.newton_rtol = 1e-6;
  c.gmres_rtol = 1e-10;
  return c;
}

template <class Rhs>
Vector accepted_step(Rhs&& f, const Vector& u, double t, double dt, const SolverConfig& cfg) {
  const StepResult r = esdirk2_step(f, u, t, dt, cfg);
  REQUIRE(r.accepted);
  return r.u;
}

}  // namespace

TEST_SUITE("integrators") {

TEST_CASE("ssp-rk3 single steps") {
  auto zero = [](double, const Vector& u, Vector& out) { out = Vector::Zero(u.size()); };
  const Vector u = Vector::LinSpaced(3, 1.0, 3.0);
  CHECK(ssp_rk3_step(zero, u, 0.0, 0.5) == u);
  auto decay = [](double, const Vector& u, Vector& out) { out = -u; };
  CHECK(ssp_rk3_step(decay, scalar(1.0), 0.0, 0.1)[0] ==
        Approx(1.0 - 0.1 + 0.005 - 0.001 / 6.0).epsilon(1e-15));
  CHECK(ssp_rk3_step(decay, scalar(1.0), 0.0, 0.1)[0] == Approx(0.9048333333).epsilon(1e-10));
  auto bad = [](double, const Vector& u, Vector& out) { out = Vector::Constant(u.size(), std::nan("")); };
  CHECK_THROWS_AS(ssp_rk3_step(bad, u, 0.0, 0.1), rfp::SolverError);
}

TEST_CASE("ssp-rk3 is third order") {
  auto f = [](double t, const Vector&, Vector& out) { out = scalar(std::cos(t)); };
  auto err = [&](int n) {
    const Vector u = integrate([&](const Vector& v, double t, double dt) { return ssp_rk3_step(f, v, t, dt); },
                               scalar(0.0), 2.0, n);
    return std::abs(u[0] - std::sin(2.0));
  };
  CHECK(observed_order(err, 20) >= 2.9);

  // Harmonic oscillator as a small system.
  auto osc = [](double, const Vector& u, Vector& out) {
    out.resize(2);
    out << u[1], -u[0];
  };
  auto err2 = [&](int n) {
    Vector u0(2);
    u0 << 1.0, 0.0;
    const Vector u = integrate([&](const Vector& v, double t, double dt) { return ssp_rk3_step(osc, v, t, dt); },
                               u0, 3.0, n);
    return std::hypot(u[0] - std::cos(3.0), u[1] + std::sin(3.0));
  };
  CHECK(observed_order(err2, 40) >= 2.9);
}

TEST_CASE("esdirk2 on linear problems") {
  const SolverConfig cfg = tight();
  auto decay = [](double, const Vector& u, Vector& out) { out = -u; };
  const StepResult r = esdirk2_step(decay, scalar(1.0), 0.0, 0.1, loose());
  CHECK(r.accepted);
  // Affine residual: one Newton iteration per implicit stage.
  CHECK(r.newton_iters == 2);
  CHECK(r.rhs_evals >= r.newton_iters);
  CHECK(r.error_estimate >= 0.0);
  // TR-BDF2 stability function at z = -0.1.
  const double g = 1.0 - 1.0 / std::sqrt(2.0), w = std::sqrt(2.0) / 4.0, z = -0.1;
  const double u2 = (1.0 + g * z) / (1.0 - g * z);
  const double u3 = (1.0 + w * z + w * z * u2) / (1.0 - g * z);
  CHECK(r.u[0] == Approx(u3).epsilon(1e-7));
  CHECK(esdirk2_step(decay, scalar(1.0), 0.0, 0.1, cfg).u[0] == Approx(u3).epsilon(1e-12));

  auto err = [&](int n) {
    const Vector u = integrate(
        [&](const Vector& v, double t, double dt) { return accepted_step(decay, v, t, dt, cfg); },
        scalar(1.0), 1.0, n);
    return std::abs(u[0] - std::exp(-1.0));
  };
  CHECK(observed_order(err, 16) >= 1.9);
}

TEST_CASE("esdirk2 order on a nonlinear system") {
  const SolverConfig cfg = tight();
  // Logistic growth coupled to a forced decay; smooth solution.
  auto f = [](double t, const Vector& u, Vector& out) {
    out.resize(2);
    out << u[0] * (1.0 - u[0]), -2.0 * u[1] + std::sin(t);
  };
  auto exact = [](double t) {
    Vector e(2);
    const double a = 0.2;
    e << a * std::exp(t) / (1.0 - a + a * std::exp(t)),
        (1.0 + 0.2) * std::exp(-2.0 * t) + (2.0 * std::sin(t) - std::cos(t)) / 5.0;
    return e;
  };
  auto err = [&](int n) {
    const Vector u = integrate([&](const Vector& v, double t, double dt) { return accepted_step(f, v, t, dt, cfg); },
                               exact(0.0), 2.0, n);
    return (u - exact(2.0)).norm();
  };
  CHECK(observed_order(err, 20) >= 1.9);
}

TEST_CASE("esdirk2 is stable on stiff problems") {
  SolverConfig cfg = tight();
  // Keep the absolute Newton floor below the decaying solution.
  cfg.newton_atol = 1e-200;
  for (double lambda : {-1e6, -1e5 / 0.1}) {
    auto f = [lambda](double, const Vector& u, Vector& out) { out = lambda * u; };
    Vector u = scalar(1.0);
    for (int k = 0; k < 5; ++k) {
      const StepResult r = esdirk2_step(f, u, k * 0.1, 0.1, cfg);
      REQUIRE(r.accepted);
      CHECK(std::abs(r.u[0]) < std::abs(u[0]));
      u = r.u;
    }
  }
}

TEST_CASE("gmres") {
  const Eigen::Matrix3d D = Eigen::Vector3d(1.0, 2.0, 4.0).asDiagonal();
  const LinearOp dop = [&](const Vector& x, Vector& y) { y = D * x; };
  const Vector b = Vector::Ones(3);
  const GmresResult r = gmres(dop, b, Vector(), 1e-12, 10, 50);
  CHECK(r.converged);
  CHECK(r.iterations <= 3);
  CHECK(r.x[0] == Approx(1.0));
  CHECK(r.x[1] == Approx(0.5));
  CHECK(r.x[2] == Approx(0.25));

  const LinearOp id = [](const Vector& x, Vector& y) { y = x; };
  const GmresResult ri = gmres(id, b, Vector(), 1e-12, 10, 50);
  CHECK(ri.iterations == 1);
  CHECK((ri.x - b).norm() < 1e-14);

  Eigen::Matrix2d A;
  A << 2.0, 1.0, 0.0, 3.0;
  const LinearOp aop = [&](const Vector& x, Vector& y) { y = A * x; };
  const GmresResult r2 = gmres(aop, Vector::Ones(2), Vector(), 1e-10, 5, 20);
  CHECK(r2.x[0] == Approx(1.0 / 3.0).epsilon(1e-9));
  CHECK(r2.x[1] == Approx(1.0 / 3.0).epsilon(1e-9));
  CHECK(r2.residual <= 1e-10 * std::sqrt(2.0));

  // Restarted on a larger nonsymmetric system, with a Jacobi preconditioner.
  const int n = 60;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    M(i, i) = 4.0 + i;
    if (i > 0) M(i, i - 1) = -1.0;
    if (i + 1 < n) M(i, i + 1) = -2.0;
  }
  const LinearOp mop = [&](const Vector& x, Vector& y) { y = M * x; };
  const LinearOp jac = [&](const Vector& x, Vector& y) { y = x.cwiseQuotient(M.diagonal()); };
  const Vector bb = Vector::LinSpaced(n, -1.0, 2.0);
  const Vector direct = M.partialPivLu().solve(bb);
  const GmresResult r3 = gmres(mop, bb, Vector(), 1e-10, 8, 500);
  CHECK(r3.converged);
  CHECK((r3.x - direct).norm() <= 1e-8 * direct.norm());
  const GmresResult r4 = gmres(mop, bb, Vector(), 1e-10, 8, 500, jac);
  CHECK(r4.converged);
  CHECK(r4.iterations <= r3.iterations);
  CHECK((r4.x - direct).norm() <= 1e-8 * direct.norm());

  const LinearOp zero = [](const Vector& x, Vector& y) { y = Vector::Zero(x.size()); };
  CHECK_THROWS_AS(gmres(zero, b, Vector(), 1e-8, 2, 100), rfp::SolverError);
}

TEST_CASE("newton-krylov") {
  SolverConfig cfg = loose();
  Eigen::Matrix3d A;
  A << 4.0, 1.0, 0.0, -1.0, 3.0, 0.5, 0.0, 2.0, 5.0;
  const Eigen::Vector3d b(1.0, -2.0, 0.5);
  auto affine = [&](const Vector& u, Vector& r) { r = A * u - Vector(b); };
  const NewtonResult nr = newton_krylov_solve(affine, Vector::Zero(3), cfg);
  CHECK(nr.converged);
  CHECK(nr.iterations == 1);
  CHECK((nr.u - Vector(A.lu().solve(b))).norm() <= 1e-6);
  CHECK(nr.residual_evals >= nr.iterations);

  std::vector<double> history;
  auto quad = [&](const Vector& u, Vector& r) {
    r = scalar(u[0] * u[0] - 4.0);
  };
  cfg.newton_rtol = 1e-14;
  cfg.newton_atol = 1e-13;
  Vector u = scalar(3.0);
  for (int it = 0; it < 6; ++it) {
    history.push_back(std::abs(u[0] * u[0] - 4.0));
    SolverConfig one = cfg;
    one.newton_max_iters = 1;
    u = newton_krylov_solve(quad, u, one).u;
  }
  CHECK(u[0] == Approx(2.0).epsilon(1e-12));
  // Quadratic decay: each residual at most C times the square of the last.
  for (std::size_t k = 1; k + 1 < history.size() && history[k] > 1e-6; ++k)
    CHECK(history[k + 1] <= 1.0 * history[k] * history[k]);

  auto solved = [](const Vector& u, Vector& r) { r = u - Vector::Constant(u.size(), 2.0); };
  const NewtonResult z = newton_krylov_solve(solved, Vector::Constant(4, 2.0), cfg);
  CHECK(z.converged);
  CHECK(z.iterations == 0);

  SolverConfig few = cfg;
  few.newton_max_iters = 1;
  auto hard = [](const Vector& u, Vector& r) { r = scalar(std::atan(u[0]) - 0.3); };
  const NewtonResult h = newton_krylov_solve(hard, scalar(10.0), few);
  CHECK_FALSE(h.converged);
  CHECK(h.residual_norm > 0.0);
}

TEST_CASE("step size controller") {
  SolverConfig cfg;
  cfg.step_tol = 1e-4;
  cfg.step_safety = 0.9;
  cfg.dt_min = 1e-8;
  cfg.dt_max = 0.5;
  CHECK(adapt_timestep(1e-4, 0.01, cfg) == Approx(0.009));
  CHECK(adapt_timestep(4e-4, 0.01, cfg) == Approx(0.0045));
  CHECK(adapt_timestep(0.0, 0.01, cfg) == 0.5);
  CHECK(adapt_timestep(4e-4, 0.01, cfg, false) == Approx(0.00225));
  CHECK(adapt_timestep(1e10, 0.01, cfg) == 1e-8);
  CHECK_THROWS_AS(adapt_timestep(-1.0, 0.01, cfg), rfp::SolverError);
}

TEST_CASE("solver config validation") {
  SolverConfig c;
  CHECK_NOTHROW(c.validate());
  c.gmres_restart = 0;
  CHECK_THROWS_AS(c.validate(), rfp::ConfigError);
  c = SolverConfig{};
  c.dt_min = 2.0;
  CHECK_THROWS_AS(c.validate(), rfp::ConfigError);
}

}  // TEST_SUITE
