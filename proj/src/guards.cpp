#include "rfp/guards.hpp"

#include "rfp/errors.hpp"

#include <algorithm>
#include <map>
#include <utility>

namespace rfp::mesh {

namespace {

using Triplet = Eigen::Triplet<double>;

struct Sampler {
  const QuadMesh& mesh;

  double center_p(int m, std::int64_t qi) const {
    return 0.5 * (mesh.p_coord(m, qi) + mesh.p_coord(m, qi + 1));
  }
  double center_xi(int m, std::int64_t qj) const {
    return 0.5 * (mesh.xi_coord(m, qj) + mesh.xi_coord(m, qj + 1));
  }

  // Appends the linear rule for the value of level-m quadrant (qi, qj) scaled
  // by w. Returns the coarse leaf when the value is an interpolation from a
  // single coarser leaf, else -1.
  int sample(int m, std::int64_t qi, std::int64_t qj, double w, int row,
             std::vector<Triplet>& out) const {
    if (m > kMaxLevel + 1) throw InternalError("guard sampling recursed past the finest level");
    const int k = mesh.find_covering(m - 1, qi >> 1, qj >> 1);
    if (k >= 0 && mesh.leaf(k).level == m - 1) {
      out.emplace_back(row, dof(k, static_cast<int>(qi & 1), static_cast<int>(qj & 1)), w);
      return -1;
    }
    if (k >= 0) {
      const Bounds& b = mesh.leaf(k).bounds;
      const double sp = (center_p(m, qi) - b.p_lo) / (b.p_hi - b.p_lo);
      const double sx = (center_xi(m, qj) - b.xi_lo) / (b.xi_hi - b.xi_lo);
      const double wp[2] = {1.5 - 2.0 * sp, 2.0 * sp - 0.5};
      const double wx[2] = {1.5 - 2.0 * sx, 2.0 * sx - 0.5};
      for (int bb = 0; bb < 2; ++bb)
        for (int a = 0; a < 2; ++a) out.emplace_back(row, dof(k, a, bb), w * wp[a] * wx[bb]);
      return k;
    }
    // Subdivided: plain mean of the four children. A plain mean keeps guard
    // values exact for linear fields; conservation at hanging faces comes from
    // the flux correction instead.
    for (int c = 0; c < 4; ++c)
      sample(m + 1, 2 * qi + (c & 1), 2 * qj + (c >> 1), 0.25 * w, row, out);
    return -1;
  }
};

}  // namespace

GuardPlan build_guard_plan(const QuadMesh& mesh, const BoundarySpec& bc, bool positivity) {
  GuardPlan plan;
  plan.n_leaves = mesh.size();
  plan.bc = bc;
  plan.positivity = positivity;
  const bool need_left = bc.left == PBoundaryKind::Dirichlet || bc.left == PBoundaryKind::Exact;
  const bool need_right = bc.right == PBoundaryKind::Dirichlet || bc.right == PBoundaryKind::Exact;
  if (need_left && !bc.left_value) throw ConfigError("left boundary needs a value function");
  if (need_right && !bc.right_value) throw ConfigError("right boundary needs a value function");

  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(mesh.size()) * 16 * 2);
  Sampler sampler{mesh};
  const std::int64_t ni_tot = static_cast<std::int64_t>(mesh.n_p());
  const std::int64_t nj_tot = static_cast<std::int64_t>(mesh.n_xi());

  for (int i = 0; i < mesh.size(); ++i) {
    const int m = mesh.leaf(i).level + 1;
    const std::int64_t bi = 2 * mesh.global_i(i);
    const std::int64_t bj = 2 * mesh.global_j(i);
    const double hp = mesh.h_p(i);
    const Bounds& bd = mesh.leaf(i).bounds;
    for (Side s : kSides) {
      std::map<int, PositivityGroup> groups;
      for (int d = 0; d < 2; ++d) {
        for (int t = 0; t < 2; ++t) {
          const int slot = guard_slot(i, s, d, t);
          std::int64_t qi = bi + t;
          std::int64_t qj = bj + t;
          switch (s) {
            case Side::PMinus: qi = bi - 1 - d; break;
            case Side::PPlus: qi = bi + 2 + d; break;
            case Side::XiMinus: qj = bj - 1 - d; break;
            case Side::XiPlus: qj = bj + 2 + d; break;
          }
          const bool out_p = qi < 0 || qi >= (ni_tot << m);
          const bool out_xi = qj < 0 || qj >= (nj_tot << m);
          if (out_p) {
            const bool left = s == Side::PMinus;
            const PBoundaryKind kind = left ? bc.left : bc.right;
            BoundaryGuard g;
            g.slot = slot;
            g.side = s;
            g.depth = d;
            g.u0 = dof(i, left ? 0 : 1, t);
            g.u1 = dof(i, left ? 1 : 0, t);
            g.xi_eval = mesh.fv_xi(i, t);
            switch (kind) {
              case PBoundaryKind::Dirichlet:
                g.c0 = d == 0 ? -1.0 : -3.0;
                g.scale = d == 0 ? 2.0 : 4.0;
                g.p_eval = left ? bd.p_lo : bd.p_hi;
                break;
              case PBoundaryKind::Exact:
                g.scale = 1.0;
                g.p_eval = left ? bd.p_lo - (d + 0.5) * hp : bd.p_hi + (d + 0.5) * hp;
                break;
              case PBoundaryKind::Neumann:
              case PBoundaryKind::ZeroFlux:
                (d == 0 ? g.c0 : g.c1) = 1.0;
                break;
            }
            if (g.c0 != 0.0) trip.emplace_back(slot, g.u0, g.c0);
            if (g.c1 != 0.0) trip.emplace_back(slot, g.u1, g.c1);
            plan.boundary.push_back(g);
            continue;
          }
          if (out_xi) {
            // Reflection across xi = -1 or xi = +1.
            const int b = (s == Side::XiMinus) == (d == 0) ? 0 : 1;
            trip.emplace_back(slot, dof(i, t, b), 1.0);
            continue;
          }
          const int coarse = sampler.sample(m, qi, qj, 1.0, slot, trip);
          if (positivity && coarse >= 0) {
            auto& g = groups[coarse];
            g.slots.push_back(slot);
            g.weights.push_back(sampler.center_p(m, qi));
          }
        }
      }
      for (auto& [k, g] : groups) plan.groups.push_back(std::move(g));
    }
  }
  plan.linear.resize(16 * mesh.size(), 4 * mesh.size());
  plan.linear.setFromTriplets(trip.begin(), trip.end());
  plan.linear.makeCompressed();
  return plan;
}

void fill_guards(const GuardPlan& plan, const Eigen::VectorXd& field, double t,
                 Eigen::VectorXd& guards) {
  if (field.size() != 4 * plan.n_leaves) throw InternalError("field size does not match the mesh");
  if (!field.allFinite()) throw InternalError("field has unset or non-finite interior values");
  guards.noalias() = plan.linear * field;
  for (const BoundaryGuard& g : plan.boundary) {
    if (g.scale == 0.0) continue;
    const auto& fn = g.side == Side::PMinus ? plan.bc.left_value : plan.bc.right_value;
    guards[g.slot] += g.scale * fn(g.p_eval, g.xi_eval, t);
  }
  if (!plan.positivity) return;
  for (const PositivityGroup& grp : plan.groups) {
    bool negative = false;
    double mass = 0.0;
    for (std::size_t k = 0; k < grp.slots.size(); ++k) {
      const double v = guards[grp.slots[k]];
      negative = negative || v < 0.0;
      mass += grp.weights[k] * v;
    }
    if (!negative) continue;
    double pos = 0.0;
    for (std::size_t k = 0; k < grp.slots.size(); ++k)
      pos += grp.weights[k] * std::max(0.0, guards[grp.slots[k]]);
    const double scale = (mass > 0.0 && pos > 0.0) ? mass / pos : 0.0;
    for (int s : grp.slots) guards[s] = std::max(0.0, guards[s]) * scale;
  }
}

Eigen::VectorXd fill_guard_layers(const QuadMesh& mesh, const Eigen::VectorXd& field,
                                  const BoundarySpec& bc, double t, bool positivity) {
  const GuardPlan plan = build_guard_plan(mesh, bc, positivity);
  Eigen::VectorXd guards;
  fill_guards(plan, field, t, guards);
  return guards;
}

}  // namespace rfp::mesh
