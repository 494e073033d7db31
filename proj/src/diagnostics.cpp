#include "rfp/diagnostics.hpp"

#include "rfp/errors.hpp"
#include "rfp/parallel.hpp"
#include "rfp/physics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace rfp::diag {

using mesh::dof;

LineIntegrator::LineIntegrator(const mesh::QuadMesh& mesh, std::vector<double> p_samples)
    : samples_(std::move(p_samples)) {
  const auto& box = mesh.box();
  for (std::size_t k = 0; k < samples_.size(); ++k) {
    const double p = samples_[k];
    if (!(p >= box.p_min && p <= box.p_max)) {
      std::ostringstream os;
      os << "line integral at p = " << p << " outside [" << box.p_min << ", " << box.p_max << "]";
      throw DomainError(os.str());
    }
    if (k > 0 && !(p > samples_[k - 1])) throw DomainError("p samples must be strictly increasing");
  }
  std::vector<std::vector<Entry>> per_sample(samples_.size());
  for (int i = 0; i < mesh.size(); ++i) {
    const auto& b = mesh.leaf(i).bounds;
    auto lo = std::lower_bound(samples_.begin(), samples_.end(), b.p_lo);
    // Half-open columns; the last column also owns p_max.
    auto hi = b.p_hi == box.p_max ? std::upper_bound(samples_.begin(), samples_.end(), b.p_hi)
                                  : std::lower_bound(samples_.begin(), samples_.end(), b.p_hi);
    const double p0 = mesh.fv_p(i, 0);
    const double p1 = mesh.fv_p(i, 1);
    for (auto it = lo; it < hi; ++it) {
      const double p = *it;
      const double w1 = (p - p0) / (p1 - p0);
      const double w0 = 1.0 - w1;
      for (int bb = 0; bb < 2; ++bb) {
        per_sample[static_cast<std::size_t>(it - samples_.begin())].push_back(
            {dof(i, 0, bb), dof(i, 1, bb), w0 / p0, w1 / p1, mesh.h_xi(i), mesh.fv_xi(i, bb)});
      }
    }
  }
  offsets_.assign(samples_.size() + 1, 0);
  for (std::size_t k = 0; k < samples_.size(); ++k) {
    offsets_[k + 1] = offsets_[k] + static_cast<int>(per_sample[k].size());
    entries_.insert(entries_.end(), per_sample[k].begin(), per_sample[k].end());
  }
}

std::vector<double> LineIntegrator::evaluate(const Eigen::VectorXd& field, bool positivity,
                                             int moment) const {
  std::vector<double> out(samples_.size(), 0.0);
  const auto n = static_cast<std::ptrdiff_t>(samples_.size());
#pragma omp parallel for schedule(static) if (n > 256)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    double s = 0.0;
    for (int e = offsets_[static_cast<std::size_t>(k)]; e < offsets_[static_cast<std::size_t>(k) + 1];
         ++e) {
      const Entry& en = entries_[static_cast<std::size_t>(e)];
      double f = en.w0 * field[en.d0] + en.w1 * field[en.d1];
      if (positivity) f = std::max(0.0, f);
      s += (moment == 1 ? en.xi : 1.0) * f * en.h_xi;
    }
    out[static_cast<std::size_t>(k)] = s;
  }
  return out;
}

std::vector<double> default_p_samples(const mesh::QuadMesh& mesh) {
  std::vector<double> p;
  p.reserve(static_cast<std::size_t>(mesh.num_fv()) / 2);
  for (int i = 0; i < mesh.size(); ++i) {
    p.push_back(mesh.fv_p(i, 0));
    p.push_back(mesh.fv_p(i, 1));
  }
  std::sort(p.begin(), p.end());
  p.erase(std::unique(p.begin(), p.end()), p.end());
  return p;
}

double xi_line_integral(const Eigen::VectorXd& field, const mesh::QuadMesh& mesh, double p,
                        bool positivity) {
  return LineIntegrator(mesh, {p}).evaluate(field, positivity)[0];
}

Profile runaway_population(const Eigen::VectorXd& field, const mesh::QuadMesh& mesh,
                           const std::vector<double>& p_samples) {
  const LineIntegrator lines(mesh, p_samples);
  const std::vector<double> m1 = lines.evaluate(field, false, 1);
  Profile prof{p_samples, std::vector<double>(p_samples.size())};
  for (std::size_t k = 0; k < p_samples.size(); ++k) {
    const double p = p_samples[k];
    prof.values[k] = 2.0 * physics::kPi * p * p * p / physics::lorentz(p) * m1[k];
  }
  return prof;
}

double total_mass(const Eigen::VectorXd& field, const mesh::QuadMesh& mesh) {
  if (field.size() != mesh.num_fv()) throw InternalError("field size does not match the mesh");
  const double s = par::deterministic_sum(mesh.num_fv(), [&](std::ptrdiff_t d) {
    const int i = static_cast<int>(d / 4);
    return field[d] * mesh.fv_p(i, static_cast<int>(d % 2)) * mesh.h_p(i) * mesh.h_xi(i);
  });
  return 2.0 * physics::kPi * s;
}

ErrorReport mms_error(const Eigen::VectorXd& field,
                      const std::function<double(double, double, double)>& exact_f,
                      const mesh::QuadMesh& mesh, double t, NormKind kind) {
  if (field.size() != mesh.num_fv()) throw InternalError("field size does not match the mesh");
  ErrorReport r;
  r.kind = kind;
  r.cells = mesh.size();
  r.dofs = mesh.num_fv();
  double num = 0.0;
  double den = 0.0;
  for (int i = 0; i < mesh.size(); ++i) {
    for (int bb = 0; bb < 2; ++bb) {
      for (int a = 0; a < 2; ++a) {
        const double p = mesh.fv_p(i, a);
        const double fe = exact_f(p, mesh.fv_xi(i, bb), t);
        const double err = field[dof(i, a, bb)] / p - fe;
        if (kind == NormKind::RelativeL2) {
          const double w = p * p * mesh.h_p(i) * mesh.h_xi(i);
          num += w * err * err;
          den += w * fe * fe;
        } else {
          num = std::max(num, std::abs(err));
          den = std::max(den, std::abs(fe));
        }
      }
    }
  }
  if (!(den > 0.0)) throw SolverError("exact solution has zero norm; relative error undefined");
  r.value = kind == NormKind::RelativeL2 ? std::sqrt(num / den) : num / den;
  return r;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double log_f(double f) { return std::log10(std::max(f, 1e-30)); }

}  // namespace

void write_snapshot(const Eigen::VectorXd& field, const mesh::QuadMesh& mesh,
                    const std::string& path, SnapshotFormat format) {
  if (field.size() != mesh.num_fv()) throw InternalError("field size does not match the mesh");
  std::ofstream os(path);
  if (!os) throw SolverError("cannot open " + path + " for writing");
  if (format == SnapshotFormat::Csv) {
    os << "p_c,xi_c,level,ftilde,f,log10_f\n";
    for (int i = 0; i < mesh.size(); ++i) {
      for (int bb = 0; bb < 2; ++bb) {
        for (int a = 0; a < 2; ++a) {
          const double p = mesh.fv_p(i, a);
          const double ft = field[dof(i, a, bb)];
          os << fmt(p) << ',' << fmt(mesh.fv_xi(i, bb)) << ',' << mesh.leaf(i).level << ','
             << fmt(ft) << ',' << fmt(ft / p) << ',' << fmt(log_f(ft / p)) << '\n';
        }
      }
    }
  } else {
    const int n = mesh.num_fv();
    os << "# vtk DataFile Version 3.0\nrfp snapshot\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    os << "POINTS " << 4 * n << " double\n";
    for (int i = 0; i < mesh.size(); ++i) {
      const double hp = mesh.h_p(i);
      const double hx = mesh.h_xi(i);
      for (int bb = 0; bb < 2; ++bb) {
        for (int a = 0; a < 2; ++a) {
          const double p0 = mesh.leaf(i).bounds.p_lo + a * hp;
          const double x0 = mesh.leaf(i).bounds.xi_lo + bb * hx;
          os << fmt(p0) << ' ' << fmt(x0) << " 0\n"
             << fmt(p0 + hp) << ' ' << fmt(x0) << " 0\n"
             << fmt(p0 + hp) << ' ' << fmt(x0 + hx) << " 0\n"
             << fmt(p0) << ' ' << fmt(x0 + hx) << " 0\n";
        }
      }
    }
    os << "CELLS " << n << ' ' << 5 * n << '\n';
    for (int c = 0; c < n; ++c)
      os << "4 " << 4 * c << ' ' << 4 * c + 1 << ' ' << 4 * c + 2 << ' ' << 4 * c + 3 << '\n';
    os << "CELL_TYPES " << n << '\n';
    for (int c = 0; c < n; ++c) os << "9\n";
    os << "CELL_DATA " << n << '\n';
    auto scalars = [&](const char* name, auto&& value) {
      os << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
      for (int d = 0; d < n; ++d) os << fmt(value(d)) << '\n';
    };
    auto p_of = [&](int d) { return mesh.fv_p(d / 4, d % 2); };
    scalars("ftilde", [&](int d) { return field[d]; });
    scalars("f", [&](int d) { return field[d] / p_of(d); });
    scalars("log10_f", [&](int d) { return log_f(field[d] / p_of(d)); });
    scalars("level", [&](int d) { return static_cast<double>(mesh.leaf(d / 4).level); });
  }
  if (!os) throw SolverError("write failed for " + path);
}

}  // namespace rfp::diag
