#include "rfp/discretization.hpp"

#include "rfp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rfp::disc {

using mesh::dof;
using mesh::guard_slot;
using mesh::NeighborKind;
using mesh::Side;

double advective_face_value(double u_UU, double u_U, double u_D, AdvectionScheme scheme,
                            Limiter limiter) {
  if (scheme == AdvectionScheme::QUICK) return 0.75 * u_U + 0.375 * u_D - 0.125 * u_UU;
  const double up = u_U - u_UU;
  if (up == 0.0) return u_U;
  const double r = (u_D - u_U) / up;
  double phi;
  if (limiter == Limiter::Minmod) {
    phi = std::max(0.0, std::min(1.0, r));
  } else {
    phi = (r + std::abs(r)) / (1.0 + std::abs(r));
  }
  return u_U + 0.5 * phi * up;
}

double collisional_face_flux(double f_L, double f_R, double delta, double coeff) {
  return -coeff * (f_R - f_L) / delta;
}

physics::CollisionCoeffs model_coeffs(double p, const OperatorConfig& cfg) {
  switch (cfg.collisions) {
    case CollisionModel::Physical: return physics::collision_coeffs(p, cfg.params);
    case CollisionModel::Constant: return {0.0, cfg.collision_eps, cfg.collision_eps};
    case CollisionModel::Off: break;
  }
  return {};
}

namespace {

// Line of six values through a leaf: two guards, two interior, two guards.
struct Line {
  int idx[6];       // index into u (>= 0) or guard slot encoded as -(slot + 1)
};

Line p_line(int i, int b) {
  return {{-(guard_slot(i, Side::PMinus, 1, b) + 1), -(guard_slot(i, Side::PMinus, 0, b) + 1),
           dof(i, 0, b), dof(i, 1, b), -(guard_slot(i, Side::PPlus, 0, b) + 1),
           -(guard_slot(i, Side::PPlus, 1, b) + 1)}};
}

Line xi_line(int i, int a) {
  return {{-(guard_slot(i, Side::XiMinus, 1, a) + 1), -(guard_slot(i, Side::XiMinus, 0, a) + 1),
           dof(i, a, 0), dof(i, a, 1), -(guard_slot(i, Side::XiPlus, 0, a) + 1),
           -(guard_slot(i, Side::XiPlus, 1, a) + 1)}};
}

inline double value(const Line& l, int k, const Eigen::VectorXd& u, const Eigen::VectorXd& g) {
  const int x = l.idx[k];
  return x >= 0 ? u[x] : g[-x - 1];
}

inline double face_flux(const double* line, int k, double v, double d, const SchemeConfig& sc) {
  // Face k sits between line[k+1] and line[k+2].
  double fv;
  if (v > 0.0) {
    fv = advective_face_value(line[k], line[k + 1], line[k + 2], sc.advection, sc.limiter);
  } else if (v < 0.0) {
    fv = advective_face_value(line[k + 3], line[k + 2], line[k + 1], sc.advection, sc.limiter);
  } else {
    fv = 0.5 * (advective_face_value(line[k], line[k + 1], line[k + 2], sc.advection, sc.limiter) +
                advective_face_value(line[k + 3], line[k + 2], line[k + 1], sc.advection,
                                     sc.limiter));
  }
  return v * fv - d * (line[k + 2] - line[k + 1]);
}

}  // namespace

SemiDiscretization::SemiDiscretization(const mesh::QuadMesh& mesh, const OperatorConfig& cfg)
    : mesh_(&mesh), cfg_(cfg), plan_(mesh::build_guard_plan(mesh, cfg.bc, cfg.scheme.positivity)) {
  const int n = mesh.size();
  vel_p_.assign(static_cast<std::size_t>(6 * n), 0.0);
  dif_p_ = vel_p_;
  vel_x_ = vel_p_;
  dif_x_ = vel_p_;
  const auto& prm = cfg.params;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    const auto& bd = mesh.leaf(i).bounds;
    const double hp = mesh.h_p(i);
    const double hx = mesh.h_xi(i);
    for (int r = 0; r < 2; ++r) {
      for (int k = 0; k < 3; ++k) {
        const std::size_t f = static_cast<std::size_t>(6 * i + 3 * r + k);
        // p-face k of row r.
        const double pf = k == 0 ? bd.p_lo : (k == 2 ? bd.p_hi : bd.p_lo + hp);
        const double xc = mesh.fv_xi(i, r);
        const auto cp = model_coeffs(pf, cfg);
        vel_p_[f] = pf * physics::advection_coeffs(pf, xc, prm).a_p - (pf * cp.C_F - cp.C_A);
        dif_p_[f] = pf * cp.C_A / hp;
        // Nothing enters through a Neumann p_max face: f = 0 beyond the domain.
        if (k == 2 && vel_p_[f] < 0.0 && cfg.bc.right == PBoundaryKind::Neumann &&
            mesh.neighbor(i, Side::PPlus).kind == NeighborKind::Boundary)
          vel_p_[f] = 0.0;
        // xi-face k of column r.
        const double xf = k == 0 ? bd.xi_lo : (k == 2 ? bd.xi_hi : bd.xi_lo + hx);
        const double pc = mesh.fv_p(i, r);
        const auto cc = model_coeffs(pc, cfg);
        vel_x_[f] = pc * physics::advection_coeffs(pc, xf, prm).a_xi;
        dif_x_[f] = (1.0 - xf * xf) * cc.C_B / pc / hx;
      }
    }
  }
  if (prm.knock_on_enabled) knock_on_ = std::make_unique<physics::KnockOnOperator>(mesh, prm);
  raw_p_.setZero(6 * n);
  raw_x_.setZero(6 * n);
  flux_p_.setZero(6 * n);
  flux_x_.setZero(6 * n);
}

void SemiDiscretization::raw_fluxes(const Eigen::VectorXd& u, const Eigen::VectorXd& g,
                                    int i) const {
  const SchemeConfig& sc = cfg_.scheme;
  for (int r = 0; r < 2; ++r) {
    double lp[6], lx[6];
    const Line Lp = p_line(i, r);
    const Line Lx = xi_line(i, r);
    for (int k = 0; k < 6; ++k) {
      lp[k] = value(Lp, k, u, g);
      lx[k] = value(Lx, k, u, g);
    }
    for (int k = 0; k < 3; ++k) {
      const std::size_t f = static_cast<std::size_t>(6 * i + 3 * r + k);
      raw_p_[static_cast<Eigen::Index>(f)] = face_flux(lp, k, vel_p_[f], dif_p_[f], sc);
      raw_x_[static_cast<Eigen::Index>(f)] = face_flux(lx, k, vel_x_[f], dif_x_[f], sc);
    }
  }
}

void SemiDiscretization::match_fluxes(int i) const {
  const mesh::QuadMesh& m = *mesh_;
  auto at = [](int leaf, int r, int k) { return 6 * leaf + 3 * r + k; };
  for (int r = 0; r < 2; ++r) {
    flux_p_[at(i, r, 1)] = raw_p_[at(i, r, 1)];
    flux_x_[at(i, r, 1)] = raw_x_[at(i, r, 1)];
  }
  for (Side s : mesh::kSides) {
    const bool along_p = s == Side::PMinus || s == Side::PPlus;
    const bool minus = s == Side::PMinus || s == Side::XiMinus;
    const int k = minus ? 0 : 2;
    const int k_other = minus ? 2 : 0;
    const Eigen::VectorXd& raw = along_p ? raw_p_ : raw_x_;
    Eigen::VectorXd& out = along_p ? flux_p_ : flux_x_;
    const mesh::Neighbor& nb = m.neighbor(i, s);
    for (int r = 0; r < 2; ++r) {
      double v = 0.0;
      switch (nb.kind) {
        case NeighborKind::Boundary: {
          bool zero = !along_p;
          if (along_p) {
            const PBoundaryKind kind = minus ? cfg_.bc.left : cfg_.bc.right;
            zero = kind == PBoundaryKind::ZeroFlux;
          }
          v = zero ? 0.0 : raw[at(i, r, k)];
          break;
        }
        case NeighborKind::SameLevel:
          // The face belongs to the leaf on its minus side.
          v = minus ? raw[at(nb.leaf, r, k_other)] : raw[at(i, r, k)];
          break;
        case NeighborKind::Coarser: v = raw[at(i, r, k)]; break;
        case NeighborKind::Finer: {
          const int fine = r == 0 ? nb.leaf : nb.leaf2;
          v = 0.5 * (raw[at(fine, 0, k_other)] + raw[at(fine, 1, k_other)]);
          break;
        }
      }
      out[at(i, r, k)] = v;
    }
  }
}

void SemiDiscretization::rhs(const Eigen::VectorXd& u, double t, Eigen::VectorXd& out) const {
  const mesh::QuadMesh& m = *mesh_;
  const int n = m.size();
  if (u.size() != m.num_fv()) throw InternalError("field size does not match the mesh");
  if (!u.allFinite()) {
    for (int d = 0; d < u.size(); ++d) {
      if (!std::isfinite(u[d])) {
        std::ostringstream os;
        os << "non-finite value in leaf " << d / 4 << " at p = " << m.fv_p(d / 4, d % 2)
           << ", xi = " << m.fv_xi(d / 4, (d % 4) / 2);
        throw SolverError(os.str());
      }
    }
  }
  mesh::fill_guards(plan_, u, t, guards_);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) raw_fluxes(u, guards_, i);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) match_fluxes(i);
  const bool ko = knock_on_ != nullptr;
  if (ko) knock_on_->apply(u, source_);
  out.resize(m.num_fv());
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    const double hp = m.h_p(i);
    const double hx = m.h_xi(i);
    for (int b = 0; b < 2; ++b) {
      for (int a = 0; a < 2; ++a) {
        const double pc = m.fv_p(i, a);
        const double dp = flux_p_[6 * i + 3 * b + a + 1] - flux_p_[6 * i + 3 * b + a];
        const double dx = flux_x_[6 * i + 3 * a + b + 1] - flux_x_[6 * i + 3 * a + b];
        double v = -dp / (pc * hp) - dx / (pc * hx);
        if (ko) v += pc * source_[dof(i, a, b)];
        out[dof(i, a, b)] = v;
      }
    }
  }
}

Eigen::VectorXd SemiDiscretization::rhs(const Eigen::VectorXd& u, double t) const {
  Eigen::VectorXd out;
  rhs(u, t, out);
  return out;
}

Eigen::SparseMatrix<double> SemiDiscretization::low_order_jacobian() const {
  using Trip = Eigen::Triplet<double>;
  const mesh::QuadMesh& m = *mesh_;
  const int n = m.size();
  const int nd = m.num_fv();
  const bool quick = cfg_.scheme.advection == AdvectionScheme::QUICK;

  // Raw face fluxes as combinations of extended values: columns [0, nd) are
  // interior dofs, columns nd + slot are guard slots.
  std::vector<Trip> tp, tx;
  auto emit = [&](std::vector<Trip>& out, int row, const Line& l, int k, double v, double d) {
    auto col = [&](int pos) {
      const int x = l.idx[pos];
      return x >= 0 ? x : nd + (-x - 1);
    };
    auto upwind = [&](double w, int uu, int uc, int ud) {
      if (quick) {
        out.emplace_back(row, col(uc), w * 0.75);
        out.emplace_back(row, col(ud), w * 0.375);
        out.emplace_back(row, col(uu), -w * 0.125);
      } else {
        out.emplace_back(row, col(uc), w);
      }
    };
    if (v > 0.0) {
      upwind(v, k, k + 1, k + 2);
    } else if (v < 0.0) {
      upwind(v, k + 3, k + 2, k + 1);
    } else {
      upwind(0.5 * v, k, k + 1, k + 2);
      upwind(0.5 * v, k + 3, k + 2, k + 1);
    }
    out.emplace_back(row, col(k + 2), -d);
    out.emplace_back(row, col(k + 1), d);
  };
  for (int i = 0; i < n; ++i) {
    for (int r = 0; r < 2; ++r) {
      const Line Lp = p_line(i, r);
      const Line Lx = xi_line(i, r);
      for (int k = 0; k < 3; ++k) {
        const int f = 6 * i + 3 * r + k;
        emit(tp, f, Lp, k, vel_p_[static_cast<std::size_t>(f)], dif_p_[static_cast<std::size_t>(f)]);
        emit(tx, f, Lx, k, vel_x_[static_cast<std::size_t>(f)], dif_x_[static_cast<std::size_t>(f)]);
      }
    }
  }
  Eigen::SparseMatrix<double> raw_p_ext(6 * n, nd + 16 * n), raw_x_ext(6 * n, nd + 16 * n);
  raw_p_ext.setFromTriplets(tp.begin(), tp.end());
  raw_x_ext.setFromTriplets(tx.begin(), tx.end());

  // Extension operator: interior identity stacked on the guard rules.
  std::vector<Trip> te;
  te.reserve(static_cast<std::size_t>(nd + plan_.linear.nonZeros()));
  for (int d = 0; d < nd; ++d) te.emplace_back(d, d, 1.0);
  for (int row = 0; row < plan_.linear.outerSize(); ++row)
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(plan_.linear, row); it; ++it)
      te.emplace_back(nd + row, static_cast<int>(it.col()), it.value());
  Eigen::SparseMatrix<double> ext(nd + 16 * n, nd);
  ext.setFromTriplets(te.begin(), te.end());

  // Flux matching as a linear map on raw fluxes, mirroring match_fluxes.
  auto matching = [&](bool along_p) {
    std::vector<Trip> tm;
    auto at = [](int leaf, int r, int k) { return 6 * leaf + 3 * r + k; };
    for (int i = 0; i < n; ++i) {
      for (int r = 0; r < 2; ++r) tm.emplace_back(at(i, r, 1), at(i, r, 1), 1.0);
      for (Side s : mesh::kSides) {
        if ((s == Side::PMinus || s == Side::PPlus) != along_p) continue;
        const bool minus = s == Side::PMinus || s == Side::XiMinus;
        const int k = minus ? 0 : 2;
        const int k_other = minus ? 2 : 0;
        const mesh::Neighbor& nb = m.neighbor(i, s);
        for (int r = 0; r < 2; ++r) {
          const int row = at(i, r, k);
          switch (nb.kind) {
            case NeighborKind::Boundary: {
              bool zero = !along_p;
              if (along_p) zero = (minus ? cfg_.bc.left : cfg_.bc.right) == PBoundaryKind::ZeroFlux;
              if (!zero) tm.emplace_back(row, row, 1.0);
              break;
            }
            case NeighborKind::SameLevel:
              tm.emplace_back(row, minus ? at(nb.leaf, r, k_other) : row, 1.0);
              break;
            case NeighborKind::Coarser: tm.emplace_back(row, row, 1.0); break;
            case NeighborKind::Finer: {
              const int fine = r == 0 ? nb.leaf : nb.leaf2;
              tm.emplace_back(row, at(fine, 0, k_other), 0.5);
              tm.emplace_back(row, at(fine, 1, k_other), 0.5);
              break;
            }
          }
        }
      }
    }
    Eigen::SparseMatrix<double> M(6 * n, 6 * n);
    M.setFromTriplets(tm.begin(), tm.end());
    return M;
  };

  // Divergence of matched fluxes.
  std::vector<Trip> dp, dx;
  for (int i = 0; i < n; ++i) {
    const double hp = m.h_p(i);
    const double hx = m.h_xi(i);
    for (int b = 0; b < 2; ++b) {
      for (int a = 0; a < 2; ++a) {
        const int d = dof(i, a, b);
        const double pc = m.fv_p(i, a);
        dp.emplace_back(d, 6 * i + 3 * b + a + 1, -1.0 / (pc * hp));
        dp.emplace_back(d, 6 * i + 3 * b + a, 1.0 / (pc * hp));
        dx.emplace_back(d, 6 * i + 3 * a + b + 1, -1.0 / (pc * hx));
        dx.emplace_back(d, 6 * i + 3 * a + b, 1.0 / (pc * hx));
      }
    }
  }
  Eigen::SparseMatrix<double> Dp(nd, 6 * n), Dx(nd, 6 * n);
  Dp.setFromTriplets(dp.begin(), dp.end());
  Dx.setFromTriplets(dx.begin(), dx.end());

  Eigen::SparseMatrix<double> Jp = raw_p_ext * ext;
  Eigen::SparseMatrix<double> Jx = raw_x_ext * ext;
  Eigen::SparseMatrix<double> J = Dp * (matching(true) * Jp);
  J += Dx * (matching(false) * Jx);
  if (knock_on_) {
    Eigen::SparseMatrix<double> S(nd, nd);
    std::vector<Trip> ts;
    for (int d = 0; d < nd; ++d) ts.emplace_back(d, d, -knock_on_->sink_rate()[d]);
    S.setFromTriplets(ts.begin(), ts.end());
    J += S;
  }
  J.prune(0.0);
  J.makeCompressed();
  return J;
}

Eigen::VectorXd compute_rhs(const Eigen::VectorXd& field, const mesh::QuadMesh& mesh,
                            const OperatorConfig& cfg, double t) {
  return SemiDiscretization(mesh, cfg).rhs(field, t);
}

Eigen::VectorXd apply_boundary_conditions(const Eigen::VectorXd& field, const mesh::QuadMesh& mesh,
                                          const OperatorConfig& cfg, double t) {
  return mesh::fill_guard_layers(mesh, field, cfg.bc, t, cfg.scheme.positivity);
}

}  // namespace rfp::disc
