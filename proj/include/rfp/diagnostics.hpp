#pragma once

#include "rfp/quadmesh.hpp"

#include <Eigen/Core>

#include <functional>
#include <string>
#include <vector>

namespace rfp::diag {

struct Profile {
  std::vector<double> p;
  std::vector<double> values;
};

enum class NormKind { RelativeL2, Max };

struct ErrorReport {
  NormKind kind = NormKind::RelativeL2;
  double value = 0.0;
  int cells = 0;
  int dofs = 0;
};

enum class SnapshotFormat { Csv, Vtk };

// Integrals over xi along vertical lines p = const. For every leaf column the
// line crosses, f = f~/p is interpolated linearly in p between the two FV
// centers and the midpoint rule is applied per FV row.
class LineIntegrator {
 public:
  LineIntegrator() = default;
  LineIntegrator(const mesh::QuadMesh& mesh, std::vector<double> p_samples);

  const std::vector<double>& samples() const { return samples_; }

  // Returns, per sample, the integral of f * xi^moment over [-1, 1].
  // With positivity, interpolated values are clamped at 0.
  std::vector<double> evaluate(const Eigen::VectorXd& field, bool positivity,
                               int moment = 0) const;

 private:
  struct Entry {
    int d0;
    int d1;
    double w0;  // already divided by the FV center momentum
    double w1;
    double h_xi;
    double xi;
  };
  std::vector<double> samples_;
  std::vector<int> offsets_;
  std::vector<Entry> entries_;
};

// Union of all FV center momenta, sorted and deduplicated.
std::vector<double> default_p_samples(const mesh::QuadMesh& mesh);

double xi_line_integral(const Eigen::VectorXd& field, const mesh::QuadMesh& mesh, double p,
                        bool positivity);

Profile runaway_population(const Eigen::VectorXd& field, const mesh::QuadMesh& mesh,
                           const std::vector<double>& p_samples);

double total_mass(const Eigen::VectorXd& field, const mesh::QuadMesh& mesh);

// exact_f(p, xi, t) returns the distribution f, not f~.
ErrorReport mms_error(const Eigen::VectorXd& field,
                      const std::function<double(double, double, double)>& exact_f,
                      const mesh::QuadMesh& mesh, double t, NormKind kind);

void write_snapshot(const Eigen::VectorXd& field, const mesh::QuadMesh& mesh,
                    const std::string& path, SnapshotFormat format);

}  // namespace rfp::diag
