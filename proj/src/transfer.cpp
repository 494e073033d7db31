#include "rfp/quadmesh.hpp"

#include "rfp/errors.hpp"

#include <algorithm>

namespace rfp::mesh {

Eigen::VectorXd transfer_on_adapt(const QuadMesh& old_mesh, const Eigen::VectorXd& old_field,
                                  const QuadMesh& new_mesh, bool positivity) {
  if (old_field.size() != old_mesh.num_fv()) throw InternalError("field size does not match the old mesh");
  Eigen::VectorXd out(new_mesh.num_fv());
  // New FV cells filled by interpolation, grouped by the old FV cell that
  // contains them so its p-weighted mass can be restored.
  std::vector<std::vector<int>> groups(static_cast<std::size_t>(old_mesh.num_fv()));
  std::vector<int> touched;

  for (int n = 0; n < new_mesh.size(); ++n) {
    const int L = new_mesh.leaf(n).level;
    const std::int64_t gi = new_mesh.global_i(n);
    const std::int64_t gj = new_mesh.global_j(n);
    const int k = old_mesh.find_covering(L, gi, gj);
    if (k >= 0 && old_mesh.leaf(k).level == L) {
      out.segment<4>(4 * n) = old_field.segment<4>(4 * k);
      continue;
    }
    if (k >= 0) {
      const Bounds& b = old_mesh.leaf(k).bounds;
      for (int bb = 0; bb < 2; ++bb) {
        for (int a = 0; a < 2; ++a) {
          const double sp = (new_mesh.fv_p(n, a) - b.p_lo) / (b.p_hi - b.p_lo);
          const double sx = (new_mesh.fv_xi(n, bb) - b.xi_lo) / (b.xi_hi - b.xi_lo);
          const double wp[2] = {1.5 - 2.0 * sp, 2.0 * sp - 0.5};
          const double wx[2] = {1.5 - 2.0 * sx, 2.0 * sx - 0.5};
          double v = 0.0;
          for (int y = 0; y < 2; ++y)
            for (int x = 0; x < 2; ++x) v += wp[x] * wx[y] * old_field[dof(k, x, y)];
          out[dof(n, a, bb)] = v;
          const int owner = dof(k, sp < 0.5 ? 0 : 1, sx < 0.5 ? 0 : 1);
          if (groups[static_cast<std::size_t>(owner)].empty()) touched.push_back(owner);
          groups[static_cast<std::size_t>(owner)].push_back(dof(n, a, bb));
        }
      }
      continue;
    }
    // Coarsened: the four old children must be leaves one level down.
    for (int c = 0; c < 4; ++c) {
      const int ch = old_mesh.find(L + 1, 2 * gi + (c & 1), 2 * gj + (c >> 1));
      if (ch < 0) throw InternalError("new leaf has no parent/child/identity correspondence");
      const int a = c & 1;
      const int bb = c >> 1;
      double mass = 0.0;
      for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x) mass += old_mesh.fv_p(ch, x) * old_field[dof(ch, x, y)];
      out[dof(n, a, bb)] = mass / (4.0 * new_mesh.fv_p(n, a));
    }
  }

  // Restore the p-weighted mass of each old FV cell over the new cells inside it.
  for (int owner : touched) {
    const auto& g = groups[static_cast<std::size_t>(owner)];
    const int k = owner / 4;
    const double target =
        old_mesh.h_p(k) * old_mesh.h_xi(k) * old_mesh.fv_p(k, owner % 2) * old_field[owner];
    double wsum = 0.0;
    double mass = 0.0;
    for (int d : g) {
      const double w = new_mesh.h_p(d / 4) * new_mesh.h_xi(d / 4) * new_mesh.fv_p(d / 4, d % 2);
      wsum += w;
      if (positivity) out[d] = std::max(0.0, out[d]);
      mass += w * out[d];
    }
    if (positivity && target > 0.0 && mass > 0.0) {
      const double s = target / mass;
      for (int d : g) out[d] *= s;
    } else if (positivity) {
      for (int d : g) out[d] = target / wsum;
    } else {
      const double shift = (target - mass) / wsum;
      for (int d : g) out[d] += shift;
    }
  }
  return out;
}

}  // namespace rfp::mesh
