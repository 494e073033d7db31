#include "rfp/driver.hpp"

#include "rfp/diagnostics.hpp"
#include "rfp/errors.hpp"
#include "rfp/integrators.hpp"
#include "rfp/parallel.hpp"

#include <json.hpp>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>

namespace rfp::cli {

namespace fs = std::filesystem;
using Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

std::function<double(double, double, double)> mms_exact(const RunConfig& cfg) {
  const double E = cfg.params.E;
  const double eps = cfg.collision_eps;
  switch (cfg.mms_solution) {
    case MmsSolution::SinExp:
      return [E, eps](double p, double xi, double t) {
        return std::sin(p * xi + E * t) * std::exp(-eps * t);
      };
    case MmsSolution::Sin:
      return [E](double p, double xi, double t) { return std::sin(p * xi + E * t); };
    case MmsSolution::Cos2:
      return [E](double p, double xi, double t) {
        const double c = std::cos(p * xi + E * t);
        return c * c;
      };
    case MmsSolution::Exponential:
      return [E](double p, double xi, double t) {
        const double et = E * t;
        return std::exp(-p * p - 2.0 * p * xi * et - et * et);
      };
  }
  throw InternalError("unknown manufactured solution");
}

namespace {

// Initial distribution f0(p, xi).
std::function<double(double, double)> initial_f(const RunConfig& cfg) {
  physics::PlasmaParams params = cfg.params;
  const TailParams tail = cfg.tail;
  auto gauss = [tail](double p, double xi) {
    const double dp = p - tail.p0;
    const double dx = xi - tail.xi0;
    return tail.amplitude * std::exp(-dp * dp / tail.p_width2 - dx * dx / tail.xi_width2);
  };
  switch (cfg.initial) {
    case InitialKind::Maxwellian:
      return [params](double p, double) { return physics::maxwell_juttner(p, params); };
    case InitialKind::MaxwellianTail:
      return [params, gauss](double p, double xi) {
        return physics::maxwell_juttner(p, params) + gauss(p, xi);
      };
    case InitialKind::Bump:
      return gauss;
    case InitialKind::Mms: {
      auto exact = mms_exact(cfg);
      return [exact](double p, double xi) { return exact(p, xi, 0.0); };
    }
  }
  throw InternalError("unknown initial condition");
}

void write_snapshots(const RunConfig& cfg, const amr::AdaptState& st, const std::string& tag) {
  if (cfg.output_format == OutputFormat::None) return;
  const fs::path dir = fs::path(cfg.output_dir) / "snapshots";
  fs::create_directories(dir);
  if (cfg.output_format == OutputFormat::Csv || cfg.output_format == OutputFormat::Both)
    diag::write_snapshot(st.field, st.mesh, (dir / (tag + ".csv")).string(), diag::SnapshotFormat::Csv);
  if (cfg.output_format == OutputFormat::Vtk || cfg.output_format == OutputFormat::Both)
    diag::write_snapshot(st.field, st.mesh, (dir / (tag + ".vtk")).string(), diag::SnapshotFormat::Vtk);
}

std::string step_tag(int step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%06d", step);
  return buf;
}

void write_logs(const RunConfig& cfg, const RunSummary& s) {
  if (!cfg.write_logs) return;
  fs::create_directories(cfg.output_dir);
  const fs::path dir(cfg.output_dir);
  {
    std::FILE* f = std::fopen((dir / "steps.csv").string().c_str(), "w");
    if (!f) throw SolverError("cannot write steps.csv");
    std::fprintf(f, "step,t,dt,accepted,error_estimate,newton_iters,gmres_iters,rhs_evals,leaves,mass,min_f\n");
    for (const auto& r : s.step_log)
      std::fprintf(f, "%d,%.17g,%.17g,%d,%.17g,%d,%d,%d,%d,%.17g,%.17g\n", r.step, r.t, r.dt,
                   r.accepted ? 1 : 0, r.error_estimate, r.newton_iters, r.gmres_iters, r.rhs_evals,
                   r.leaves, r.mass, r.min_f);
    std::fclose(f);
  }
  {
    std::FILE* f = std::fopen((dir / "regrid.csv").string().c_str(), "w");
    if (!f) throw SolverError("cannot write regrid.csv");
    std::fprintf(f, "step,t,leaves,fv_cells,chi_mean,chi_std,chi_max,refined,coarsened,balance_refined,passes\n");
    for (const auto& r : s.regrid_log)
      std::fprintf(f, "%d,%.17g,%d,%d,%.17g,%.17g,%.17g,%d,%d,%d,%d\n", r.step, r.t, r.leaves,
                   r.fv_cells, r.chi.mean, r.chi.stddev, r.chi.max, r.totals.refined,
                   r.totals.coarsened, r.totals.balance_refined, r.passes);
    std::fclose(f);
  }
  {
    std::FILE* f = std::fopen((dir / "metrics.csv").string().c_str(), "w");
    if (!f) throw SolverError("cannot write metrics.csv");
    std::fprintf(f, "t,dt,leaves,chi_mean,chi_std,chi_max\n");
    for (const auto& m : s.metrics)
      std::fprintf(f, "%.17g,%.17g,%d,%.17g,%.17g,%.17g\n", m.t, m.dt, m.leaves, m.chi.mean,
                   m.chi.stddev, m.chi.max);
    std::fclose(f);
  }
  nlohmann::json j;
  j["steps"] = s.steps;
  j["attempts"] = s.attempts;
  j["rejected"] = s.rejected;
  j["newton_failures"] = s.newton_failures;
  j["newton_iters"] = s.newton_iters;
  j["gmres_iters"] = s.gmres_iters;
  j["rhs_evals"] = s.rhs_evals;
  j["regrids"] = s.regrids;
  j["t_end"] = s.t_end;
  j["wall_seconds"] = s.wall_seconds;
  j["min_raw_f"] = std::isfinite(s.min_raw_f) ? s.min_raw_f : 0.0;
  j["mass_initial"] = s.mass_initial;
  j["mass_final"] = s.mass_final;
  j["max_leaves"] = s.max_leaves;
  std::ofstream((dir / "summary.json").string()) << j.dump(2) << "\n";
}

double min_f(const mesh::QuadMesh& m, const VectorXd& u) {
  double lo = std::numeric_limits<double>::infinity();
  for (int i = 0; i < m.size(); ++i)
    for (int k = 0; k < 4; ++k) lo = std::min(lo, u[4 * i + k] / m.fv_p(i, k % 2));
  return lo;
}

// Sparse LU of I - gdt*J_low, refactored when gdt drifts by more than 30% or
// the mesh changes.
class LowOrderPreconditioner {
 public:
  LowOrderPreconditioner(PreconditionerKind kind) : kind_(kind) {}

  void reset(const disc::SemiDiscretization& d) {
    if (kind_ == PreconditionerKind::None) return;
    J_ = d.low_order_jacobian();
    diag_ = J_.diagonal();
    gdt_ = -1.0;
  }

  time::LinearOp get(double gdt) {
    if (kind_ == PreconditionerKind::None) return {};
    if (kind_ == PreconditionerKind::Jacobi) {
      VectorXd inv = (1.0 - gdt * diag_.array()).inverse().matrix();
      return [inv](const VectorXd& x, VectorXd& y) { y = inv.cwiseProduct(x); };
    }
    if (gdt_ < 0.0 || std::abs(gdt / gdt_ - 1.0) > 0.3) {
      SpMat I(J_.rows(), J_.cols());
      I.setIdentity();
      SpMat M = I - gdt * J_;
      M.makeCompressed();
      lu_ = std::make_shared<Eigen::SparseLU<SpMat>>();
      lu_->compute(M);
      ok_ = lu_->info() == Eigen::Success;
      gdt_ = gdt;
      ++factorizations_;
    }
    if (!ok_) return {};
    auto lu = lu_;
    return [lu](const VectorXd& x, VectorXd& y) { y = lu->solve(x); };
  }

 private:
  PreconditionerKind kind_;
  SpMat J_;
  VectorXd diag_;
  std::shared_ptr<Eigen::SparseLU<SpMat>> lu_;
  double gdt_ = -1.0;
  bool ok_ = false;
  int factorizations_ = 0;
};

}  // namespace

disc::OperatorConfig make_operator_config(const RunConfig& cfg) {
  disc::OperatorConfig op;
  op.params = cfg.params;
  op.params.gamma0 = physics::lorentz(cfg.box.p_min);
  op.collisions = cfg.collisions;
  op.collision_eps = cfg.collision_eps;
  op.scheme = cfg.scheme;
  switch (cfg.boundary) {
    case BoundaryMode::Physical: {
      auto f0 = initial_f(cfg);
      op.bc.left = PBoundaryKind::Dirichlet;
      op.bc.right = PBoundaryKind::Neumann;
      op.bc.left_value = [f0](double p, double xi, double) { return p * f0(p, xi); };
      break;
    }
    case BoundaryMode::Mms: {
      auto exact = mms_exact(cfg);
      auto ft = [exact](double p, double xi, double t) { return p * exact(p, xi, t); };
      op.bc.left = PBoundaryKind::Exact;
      op.bc.right = PBoundaryKind::Exact;
      op.bc.left_value = ft;
      op.bc.right_value = ft;
      break;
    }
    case BoundaryMode::ZeroFlux:
      op.bc.left = PBoundaryKind::ZeroFlux;
      op.bc.right = PBoundaryKind::ZeroFlux;
      break;
  }
  return op;
}

VectorXd sample_initial(const RunConfig& cfg, const mesh::QuadMesh& m) {
  auto f0 = initial_f(cfg);
  VectorXd u(m.num_fv());
  for (int i = 0; i < m.size(); ++i)
    for (int b = 0; b < 2; ++b)
      for (int a = 0; a < 2; ++a) {
        const double p = m.fv_p(i, a);
        u[mesh::dof(i, a, b)] = p * f0(p, m.fv_xi(i, b));
      }
  return u;
}

amr::AdaptState initial_state(const RunConfig& cfg) {
  mesh::QuadMesh m =
      mesh::build_uniform_mesh(cfg.n_p, cfg.n_xi, cfg.box, cfg.levels, cfg.levels.min_level);
  if (cfg.amr_enabled) {
    const int passes =
        cfg.initial_passes >= 0 ? cfg.initial_passes : cfg.levels.max_level - cfg.levels.min_level;
    for (int pass = 0; pass < passes; ++pass) {
      const VectorXd u = sample_initial(cfg, m);
      const auto ind = amr::compute_indicators(m, u, cfg.amr.variant, cfg.amr.epsilon);
      auto flags = amr::flag_cells(ind, cfg.amr, m);
      for (auto& f : flags)
        if (f == mesh::RefineFlag::Coarsen) f = mesh::RefineFlag::Keep;
      auto [next, summary] = mesh::refine_and_balance(m, flags);
      if (next == m) break;
      m = std::move(next);
    }
  }
  VectorXd u = sample_initial(cfg, m);
  return {std::move(m), std::move(u)};
}

amr::ChiStats time_average(const std::vector<MetricSample>& samples, double t_from, double t_to,
                           double* mean_leaves) {
  amr::ChiStats avg;
  double wsum = 0.0, leaves = 0.0;
  for (const auto& s : samples) {
    if (!(s.t > t_from && s.t <= t_to)) continue;
    avg.mean += s.dt * s.chi.mean;
    avg.stddev += s.dt * s.chi.stddev;
    avg.max += s.dt * s.chi.max;
    leaves += s.dt * s.leaves;
    wsum += s.dt;
  }
  if (wsum > 0.0) {
    avg.mean /= wsum;
    avg.stddev /= wsum;
    avg.max /= wsum;
    leaves /= wsum;
  }
  if (mean_leaves) *mean_leaves = leaves;
  return avg;
}

RunResult run_simulation(const RunConfig& cfg, const StepObserver& observer) {
  validate(cfg);
  par::set_threads(cfg.threads);
  const auto wall0 = std::chrono::steady_clock::now();

  const disc::OperatorConfig op = make_operator_config(cfg);
  RunResult result{RunSummary{}, initial_state(cfg)};
  RunSummary& S = result.summary;
  amr::AdaptState& st = result.state;

  auto op_ptr = std::make_unique<disc::SemiDiscretization>(st.mesh, op);
  LowOrderPreconditioner pre(cfg.integrator == IntegratorKind::Esdirk2 ? cfg.preconditioner
                                                                       : PreconditionerKind::None);
  pre.reset(*op_ptr);

  S.mass_initial = diag::total_mass(st.field, st.mesh);
  S.max_leaves = st.mesh.size();
  write_snapshots(cfg, st, step_tag(0));

  const double t_final = cfg.t_final;
  const double t_eps = 1e-12 * std::max(1.0, t_final);
  double t = 0.0;
  double dt = cfg.integrator == IntegratorKind::Esdirk2 && cfg.adaptive_dt
                  ? std::clamp(cfg.dt_init, cfg.solver.dt_min, cfg.solver.dt_max)
                  : cfg.dt_init;
  int regridded_at = -1;

  auto rhs = [&](double tt, const VectorXd& u, VectorXd& out) { op_ptr->rhs(u, tt, out); };
  auto factory = [&](double gdt) { return pre.get(gdt); };

  auto abort_run = [&](const std::string& why) {
    S.t_end = t;
    S.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    try {
      write_logs(cfg, S);
      if (cfg.output_format != OutputFormat::None || cfg.write_logs) {
        fs::create_directories(cfg.output_dir);
        diag::write_snapshot(st.field, st.mesh, (fs::path(cfg.output_dir) / "abort_state.csv").string(),
                             diag::SnapshotFormat::Csv);
      }
    } catch (const std::exception&) {
    }
    throw SolverError(why);
  };

  while (t < t_final - t_eps) {
    if (cfg.amr_enabled && S.steps % cfg.amr.n_adapt == 0 && regridded_at != S.steps) {
      regridded_at = S.steps;
      auto cyc = amr::adapt_cycle(st, cfg.amr, op.params, dt, cfg.scheme.positivity);
      RegridRecord rr;
      rr.step = S.steps;
      rr.t = t;
      rr.leaves = st.mesh.size();
      rr.fv_cells = st.mesh.num_fv();
      rr.chi = amr::chi_stats(cyc.indicators.chi);
      rr.totals = cyc.totals;
      rr.passes = cyc.passes;
      S.regrid_log.push_back(rr);
      ++S.regrids;
      if (cyc.changed) {
        op_ptr = std::make_unique<disc::SemiDiscretization>(st.mesh, op);
        pre.reset(*op_ptr);
      }
      S.max_leaves = std::max(S.max_leaves, st.mesh.size());
    }

    const double dt_step = std::min(dt, t_final - t);
    StepRecord rec;
    rec.step = S.steps + 1;
    rec.dt = dt_step;
    rec.leaves = st.mesh.size();
    VectorXd u_new;
    bool accepted = false;
    bool converged = true;
    try {
      if (cfg.integrator == IntegratorKind::SspRk3) {
        u_new = time::ssp_rk3_step(rhs, st.field, t, dt_step);
        rec.rhs_evals = 3;
        accepted = true;
      } else {
        time::StepResult r = time::esdirk2_step(rhs, st.field, t, dt_step, cfg.solver, factory);
        rec.newton_iters = r.newton_iters;
        rec.gmres_iters = r.gmres_iters;
        rec.rhs_evals = r.rhs_evals;
        rec.error_estimate = r.error_estimate;
        converged = r.accepted;
        accepted = converged && (!cfg.adaptive_dt || r.error_estimate <= cfg.solver.step_tol);
        if (accepted) u_new = std::move(r.u);
      }
    } catch (const SolverError& e) {
      rec.accepted = false;
      rec.t = t;
      S.step_log.push_back(rec);
      ++S.attempts;
      abort_run(std::string("step failed at t = ") + std::to_string(t) + ": " + e.what());
    }

    ++S.attempts;
    S.newton_iters += rec.newton_iters;
    S.gmres_iters += rec.gmres_iters;
    S.rhs_evals += rec.rhs_evals;

    if (!accepted) {
      ++S.rejected;
      if (!converged) ++S.newton_failures;
      rec.accepted = false;
      rec.t = t;
      rec.mass = diag::total_mass(st.field, st.mesh);
      rec.min_f = min_f(st.mesh, st.field);
      S.step_log.push_back(rec);
      if (observer) observer(rec, st);
      if (dt_step <= cfg.solver.dt_min * (1.0 + 1e-12))
        abort_run("no convergence with dt at dt_min, t = " + std::to_string(t));
      dt = converged ? time::adapt_timestep(rec.error_estimate, dt_step, cfg.solver, false)
                     : std::max(0.5 * dt_step, cfg.solver.dt_min);
      continue;
    }

    rec.min_f = min_f(st.mesh, u_new);
    S.min_raw_f = std::min(S.min_raw_f, rec.min_f);
    if (cfg.clamp_after_step) u_new = u_new.cwiseMax(0.0);
    st.field = std::move(u_new);
    t += dt_step;
    ++S.steps;
    rec.accepted = true;
    rec.t = t;
    rec.mass = diag::total_mass(st.field, st.mesh);
    S.step_log.push_back(rec);

    const auto ind = amr::compute_indicators(st.mesh, st.field, cfg.amr.variant, cfg.amr.epsilon);
    S.metrics.push_back({t, dt_step, st.mesh.size(), amr::chi_stats(ind.chi)});

    if (observer) observer(rec, st);
    if (cfg.snapshot_every > 0 && S.steps % cfg.snapshot_every == 0)
      write_snapshots(cfg, st, step_tag(S.steps));

    if (cfg.integrator == IntegratorKind::Esdirk2 && cfg.adaptive_dt)
      dt = time::adapt_timestep(rec.error_estimate, dt_step, cfg.solver, true);
  }

  S.t_end = t;
  S.mass_final = diag::total_mass(st.field, st.mesh);
  S.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  if (!(cfg.snapshot_every > 0 && S.steps % cfg.snapshot_every == 0) || S.steps == 0) {
    if (S.steps > 0) write_snapshots(cfg, st, step_tag(S.steps));
  }
  write_logs(cfg, S);
  if (cfg.write_logs) mesh::write_mesh_csv(st.mesh, (fs::path(cfg.output_dir) / "mesh_final.csv").string());
  return result;
}

}  // namespace rfp::cli
