#include "rfp/indicators.hpp"

#include "rfp/errors.hpp"

#include <algorithm>
#include <cmath>

namespace rfp::amr {

void AdaptPolicy::validate() const {
  if (!(chi_min >= 0.0)) throw ConfigError("amr.chi_min must be >= 0");
  if (!(chi_min < chi_max)) throw ConfigError("amr thresholds violate chi_min < chi_max");
  if (n_adapt < 1) throw ConfigError("amr.n_adapt must be >= 1");
  if (n_pred < 0) throw ConfigError("amr.n_pred must be >= 0");
  if (!(epsilon >= 0.0)) throw ConfigError("amr.epsilon must be >= 0");
  if (!(cfl > 0.0 && cfl <= 1.0)) throw ConfigError("amr.cfl must lie in (0, 1]");
}

double indicator_GS(std::span<const double> values) {
  double chi = 0.0;
  for (double fx : values)
    for (double fy : values) chi = std::max(chi, std::abs(fx - fy) / fx);
  return chi;
}

double indicator_LGS(std::span<const double> values) {
  double chi = 0.0;
  for (double fx : values)
    for (double fy : values) chi = std::max(chi, std::abs(std::log(fx) - std::log(fy)));
  return chi;
}

double indicator_LDR(std::span<const double> values, double epsilon) {
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return std::log((*hi + epsilon) / (*lo + epsilon));
}

IndicatorField compute_indicators(const mesh::QuadMesh& mesh, const Eigen::VectorXd& field,
                                  IndicatorVariant variant, double epsilon) {
  if (field.size() != mesh.num_fv()) throw InternalError("field size does not match the mesh");
  IndicatorField ind;
  ind.variant = variant;
  ind.chi.resize(mesh.size());
#pragma omp parallel for schedule(static)
  for (int i = 0; i < mesh.size(); ++i) {
    std::array<double, 4> v;
    for (int k = 0; k < 4; ++k) v[static_cast<std::size_t>(k)] = std::abs(field[4 * i + k]) / mesh.fv_p(i, k % 2);
    double chi;
    if (variant == IndicatorVariant::LDR) {
      chi = indicator_LDR(v, epsilon);
    } else {
      for (double& x : v) x += epsilon;
      chi = variant == IndicatorVariant::GS ? indicator_GS(v) : indicator_LGS(v);
    }
    ind.chi[i] = chi;
  }
  return ind;
}

std::vector<mesh::RefineFlag> flag_cells(const IndicatorField& ind, const AdaptPolicy& policy,
                                         const mesh::QuadMesh& mesh) {
  const Eigen::VectorXd& chi = ind.chi_pred ? *ind.chi_pred : ind.chi;
  if (chi.size() != mesh.size()) throw InternalError("indicator size does not match the mesh");
  const auto lb = mesh.level_bounds();
  std::vector<mesh::RefineFlag> flags(static_cast<std::size_t>(mesh.size()), mesh::RefineFlag::Keep);
  for (int i = 0; i < mesh.size(); ++i) {
    const int L = mesh.leaf(i).level;
    if (chi[i] > policy.chi_max && L < lb.max_level) {
      flags[static_cast<std::size_t>(i)] = mesh::RefineFlag::Refine;
    } else if (chi[i] < policy.chi_min && L > lb.min_level) {
      flags[static_cast<std::size_t>(i)] = mesh::RefineFlag::Coarsen;
    }
  }
  return flags;
}

Eigen::VectorXd predict_indicators(const IndicatorField& ind, const mesh::QuadMesh& mesh,
                                   const physics::PlasmaParams& params, double dt_pred,
                                   double cfl) {
  if (!(dt_pred > 0.0)) throw ConfigError("prediction horizon must be > 0");
  if (!(cfl > 0.0)) throw ConfigError("prediction cfl must be > 0");
  const int n = mesh.size();
  std::vector<physics::AdvectionCoeffs> vel(static_cast<std::size_t>(n));
  double rate = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto& b = mesh.leaf(i).bounds;
    const auto a = physics::advection_coeffs(0.5 * (b.p_lo + b.p_hi), 0.5 * (b.xi_lo + b.xi_hi), params);
    vel[static_cast<std::size_t>(i)] = a;
    rate = std::max(rate, std::abs(a.a_p) / (b.p_hi - b.p_lo) + std::abs(a.a_xi) / (b.xi_hi - b.xi_lo));
  }
  Eigen::VectorXd chi = ind.chi;
  Eigen::VectorXd pred = chi;
  if (rate == 0.0) return pred;
  const int steps = static_cast<int>(std::ceil(dt_pred * rate / cfl));
  const double dtau = dt_pred / steps;

  // Upwind value and center distance across one side.
  auto upwind = [&](const Eigen::VectorXd& c, int i, mesh::Side s, double& value, double& dist) {
    const mesh::Neighbor& nb = mesh.neighbor(i, s);
    const bool along_p = s == mesh::Side::PMinus || s == mesh::Side::PPlus;
    const auto& b = mesh.leaf(i).bounds;
    const double wi = along_p ? b.p_hi - b.p_lo : b.xi_hi - b.xi_lo;
    auto width = [&](int k) {
      const auto& bk = mesh.leaf(k).bounds;
      return along_p ? bk.p_hi - bk.p_lo : bk.xi_hi - bk.xi_lo;
    };
    switch (nb.kind) {
      case mesh::NeighborKind::Boundary:
        value = c[i];
        dist = wi;
        return;
      case mesh::NeighborKind::SameLevel:
      case mesh::NeighborKind::Coarser:
        value = c[nb.leaf];
        dist = 0.5 * (wi + width(nb.leaf));
        return;
      case mesh::NeighborKind::Finer:
        value = std::max(c[nb.leaf], c[nb.leaf2]);
        dist = 0.5 * (wi + width(nb.leaf));
        return;
    }
  };

  Eigen::VectorXd next(n);
  for (int s = 0; s < steps; ++s) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
      const auto& a = vel[static_cast<std::size_t>(i)];
      double d = 0.0;
      double v = 0.0, h = 1.0;
      if (a.a_p > 0.0) {
        upwind(chi, i, mesh::Side::PMinus, v, h);
        d -= a.a_p * (chi[i] - v) / h;
      } else if (a.a_p < 0.0) {
        upwind(chi, i, mesh::Side::PPlus, v, h);
        d -= a.a_p * (v - chi[i]) / h;
      }
      if (a.a_xi > 0.0) {
        upwind(chi, i, mesh::Side::XiMinus, v, h);
        d -= a.a_xi * (chi[i] - v) / h;
      } else if (a.a_xi < 0.0) {
        upwind(chi, i, mesh::Side::XiPlus, v, h);
        d -= a.a_xi * (v - chi[i]) / h;
      }
      next[i] = chi[i] + dtau * d;
    }
    chi.swap(next);
    pred = pred.cwiseMax(chi);
  }
  return pred;
}

namespace {

bool any_refine(const std::vector<mesh::RefineFlag>& flags) {
  return std::any_of(flags.begin(), flags.end(),
                     [](mesh::RefineFlag f) { return f == mesh::RefineFlag::Refine; });
}

void accumulate(mesh::AdaptSummary& a, const mesh::AdaptSummary& b) {
  a.refined += b.refined;
  a.coarsened += b.coarsened;
  a.balance_refined += b.balance_refined;
  a.refine_clipped += b.refine_clipped;
  a.coarsen_clipped += b.coarsen_clipped;
}

}  // namespace

CycleSummary adapt_cycle(AdaptState& state, const AdaptPolicy& policy,
                         const physics::PlasmaParams& params, double dt, bool positivity) {
  CycleSummary out;
  const auto lb = state.mesh.level_bounds();
  const int max_passes = std::max(1, lb.max_level - lb.min_level);
  for (int pass = 0; pass < max_passes; ++pass) {
    IndicatorField ind = compute_indicators(state.mesh, state.field, policy.variant, policy.epsilon);
    if (policy.n_pred > 0 && dt > 0.0)
      ind.chi_pred = predict_indicators(ind, state.mesh, params, policy.n_pred * dt, policy.cfl);
    std::vector<mesh::RefineFlag> flags = flag_cells(ind, policy, state.mesh);
    if (pass == 0) out.indicators = ind;
    if (pass > 0) {
      for (auto& f : flags)
        if (f == mesh::RefineFlag::Coarsen) f = mesh::RefineFlag::Keep;
      if (!any_refine(flags)) break;
    }
    auto [next, summary] = mesh::refine_and_balance(state.mesh, flags);
    accumulate(out.totals, summary);
    ++out.passes;
    if (next == state.mesh) break;
    state.field = mesh::transfer_on_adapt(state.mesh, state.field, next, positivity);
    state.mesh = std::move(next);
    out.changed = true;
    if (!any_refine(flags)) break;
  }
  return out;
}

ChiStats chi_stats(const Eigen::VectorXd& chi) {
  ChiStats s;
  if (chi.size() == 0) return s;
  s.mean = chi.mean();
  s.max = chi.maxCoeff();
  s.stddev = std::sqrt((chi.array() - s.mean).square().mean());
  return s;
}

IndicatorVariant parse_variant(const std::string& s) {
  if (s == "gs") return IndicatorVariant::GS;
  if (s == "lgs") return IndicatorVariant::LGS;
  if (s == "ldr") return IndicatorVariant::LDR;
  throw ConfigError("unknown indicator variant '" + s + "' (expected gs, lgs or ldr)");
}

std::string to_string(IndicatorVariant v) {
  switch (v) {
    case IndicatorVariant::GS: return "gs";
    case IndicatorVariant::LGS: return "lgs";
    case IndicatorVariant::LDR: return "ldr";
  }
  return "ldr";
}

}  // namespace rfp::amr
