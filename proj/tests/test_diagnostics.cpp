#include "rfp/diagnostics.hpp"
#include "rfp/errors.hpp"
#include "rfp/physics.hpp"
#include "rfp/quadmesh.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace rfp;
using namespace rfp::diag;
using doctest::Approx;
using mesh::dof;

namespace {

const mesh::DomainBox kBox{0.5, 6.5, -1.0, 1.0};

template <class F>
Eigen::VectorXd sample_f(const mesh::QuadMesh& m, F&& f) {
  Eigen::VectorXd u(m.num_fv());
  for (int i = 0; i < m.size(); ++i)
    for (int b = 0; b < 2; ++b)
      for (int a = 0; a < 2; ++a) {
        const double p = m.fv_p(i, a);
        u[dof(i, a, b)] = p * f(p, m.fv_xi(i, b));
      }
  return u;
}

mesh::QuadMesh graded_mesh() {
  mesh::QuadMesh m = mesh::build_uniform_mesh(3, 2, kBox, {1, 4}, 1);
  std::vector<mesh::RefineFlag> flags(static_cast<std::size_t>(m.size()), mesh::RefineFlag::Keep);
  flags[0] = flags[3] = mesh::RefineFlag::Refine;
  return mesh::refine_and_balance(m, flags).first;
}

std::string tmp(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream is(path);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("diagnostics") {

TEST_CASE("line integral of constants and of 1 - xi^2") {
  const auto m = graded_mesh();
  const Eigen::VectorXd c = sample_f(m, [](double, double) { return 1.75; });
  for (double p : {0.5, 0.9, 2.0, 3.3, 6.5}) CHECK(xi_line_integral(c, m, p, true) == Approx(3.5).epsilon(1e-14));
  const Eigen::VectorXd one = sample_f(m, [](double, double) { return 1.0; });
  CHECK(xi_line_integral(one, m, 1.234, false) == 2.0);

  std::vector<double> err;
  for (int level : {2, 3, 4, 5}) {
    const auto u = mesh::build_uniform_mesh(3, 2, kBox, {0, 6}, level);
    const Eigen::VectorXd f = sample_f(u, [](double, double xi) { return 1.0 - xi * xi; });
    err.push_back(std::abs(xi_line_integral(f, u, 2.7, true) - 4.0 / 3.0));
  }
  for (std::size_t k = 1; k < err.size(); ++k) CHECK(std::log2(err[k - 1] / err[k]) >= 1.0);
  CHECK(err.back() < 1e-3);

  CHECK_THROWS_AS(xi_line_integral(c, m, 0.4, true), DomainError);
  CHECK_THROWS_AS(xi_line_integral(c, m, 7.0, true), DomainError);
}

TEST_CASE("clamped line integral of a nonnegative field is nonnegative") {
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const auto m = graded_mesh();
  Eigen::VectorXd u(m.num_fv());
  for (auto& v : u) v = U(rng) < 0.7 ? 0.0 : U(rng) * 1e-3;
  for (double p = kBox.p_min; p <= kBox.p_max; p += 0.0731) CHECK(xi_line_integral(u, m, p, true) >= 0.0);
  const LineIntegrator li(m, default_p_samples(m));
  for (double v : li.evaluate(u, true)) CHECK(v >= 0.0);
}

TEST_CASE("default samples are the sorted union of FV centers") {
  const auto m = graded_mesh();
  const auto s = default_p_samples(m);
  for (std::size_t k = 1; k < s.size(); ++k) CHECK(s[k] > s[k - 1]);
  for (int i = 0; i < m.size(); ++i)
    for (int a = 0; a < 2; ++a) {
      bool found = false;
      for (double x : s) found = found || std::abs(x - m.fv_p(i, a)) < 1e-14;
      CHECK(found);
    }
}

TEST_CASE("runaway population") {
  const auto m = mesh::build_uniform_mesh(3, 2, kBox, {0, 6}, 4);
  const std::vector<double> ps{1.0, 2.5, 4.0};
  const Eigen::VectorXd even = sample_f(m, [](double p, double xi) { return std::exp(-p) * (1.0 + xi * xi); });
  for (double r : runaway_population(even, m, ps).values) CHECK(std::abs(r) <= 1e-14);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(m.num_fv());
  for (double r : runaway_population(zero, m, ps).values) CHECK(r == 0.0);

  // Beam along xi = -1. Oracle: fine uniform midpoint rule of the analytic
  // integrand 2 pi p^2 f (p xi / gamma).
  auto beam = [](double p, double xi) { return std::exp(-p / 2.0) * std::exp(-(xi + 1.0) * (xi + 1.0) / 0.08); };
  const Eigen::VectorXd u = sample_f(m, beam);
  const Profile R = runaway_population(u, m, ps);
  REQUIRE(R.p == ps);
  for (std::size_t k = 0; k < ps.size(); ++k) {
    const double p = ps[k], g = physics::lorentz(p);
    const int n = 200000;
    double ref = 0.0;
    for (int j = 0; j < n; ++j) {
      const double xi = -1.0 + (j + 0.5) * 2.0 / n;
      ref += beam(p, xi) * p * xi / g;
    }
    ref *= 2.0 * physics::kPi * p * p * 2.0 / n;
    CHECK(R.values[k] < 0.0);
    CHECK(R.values[k] == Approx(ref).epsilon(0.02));
  }
}

TEST_CASE("total mass") {
  const auto m = graded_mesh();
  Eigen::VectorXd u(m.num_fv());
  for (int i = 0; i < m.size(); ++i)
    for (int b = 0; b < 2; ++b)
      for (int a = 0; a < 2; ++a) u[dof(i, a, b)] = 1.0 / m.fv_p(i, a);
  CHECK(total_mass(u, m) == Approx(2.0 * physics::kPi * 6.0 * 2.0).epsilon(1e-14));
  CHECK(total_mass(Eigen::VectorXd::Zero(m.num_fv()), m) == 0.0);

  // Invariant under refinement and coarsening transfer.
  const Eigen::VectorXd f = sample_f(m, [](double p, double xi) { return std::exp(-p) * (1.5 + xi); });
  auto [fine, s] = mesh::refine_and_balance(m, std::vector<mesh::RefineFlag>(m.size(), mesh::RefineFlag::Refine));
  const Eigen::VectorXd ff = mesh::transfer_on_adapt(m, f, fine);
  CHECK(total_mass(ff, fine) == Approx(total_mass(f, m)).epsilon(1e-12));
}

TEST_CASE("manufactured-solution error") {
  const auto m = graded_mesh();
  auto exact = [](double p, double xi, double t) { return std::sin(p * xi + 0.5 * t) + 2.0; };
  const double t = 0.3;
  const Eigen::VectorXd u = sample_f(m, [&](double p, double xi) { return exact(p, xi, t); });
  const ErrorReport e0 = mms_error(u, exact, m, t, NormKind::RelativeL2);
  CHECK(e0.value <= 1e-15);  // f~ / p round trip
  CHECK(e0.cells == m.size());
  CHECK(e0.dofs == m.num_fv());
  CHECK(mms_error(u * (1.0 + 1e-3), exact, m, t, NormKind::RelativeL2).value == Approx(1e-3).epsilon(1e-10));
  CHECK(mms_error(u * (1.0 + 1e-3), exact, m, t, NormKind::Max).value == Approx(1e-3).epsilon(1e-10));
  auto zero = [](double, double, double) { return 0.0; };
  CHECK_THROWS_AS(mms_error(u, zero, m, t, NormKind::RelativeL2), SolverError);
}

TEST_CASE("csv snapshot round trip") {
  const auto m = graded_mesh();
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  Eigen::VectorXd u(m.num_fv());
  for (auto& v : u) v = std::pow(10.0, 10.0 * U(rng)) * (U(rng) > -0.8 ? 1.0 : 0.0);
  const std::string path = tmp("rfp_snapshot_test.csv");
  write_snapshot(u, m, path, SnapshotFormat::Csv);
  std::ifstream is(path);
  std::string line;
  std::getline(is, line);
  CHECK(line == "p_c,xi_c,level,ftilde,f,log10_f");
  // Reader: rows in (leaf, b, a) order.
  int row = 0;
  while (std::getline(is, line)) {
    std::stringstream ss(line);
    std::vector<std::string> cols;
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
    REQUIRE(cols.size() == 6);
    const int leaf = row / 4, a = row % 2, b = (row % 4) / 2;
    CHECK(std::strtod(cols[0].c_str(), nullptr) == m.fv_p(leaf, a));
    CHECK(std::strtod(cols[1].c_str(), nullptr) == m.fv_xi(leaf, b));
    CHECK(std::stoi(cols[2]) == m.leaf(leaf).level);
    CHECK(std::strtod(cols[3].c_str(), nullptr) == u[dof(leaf, a, b)]);
    const double lf = std::strtod(cols[5].c_str(), nullptr);
    CHECK(std::isfinite(lf));
    if (u[dof(leaf, a, b)] == 0.0) CHECK(lf == -30.0);
    ++row;
  }
  CHECK(row == m.num_fv());
  std::filesystem::remove(path);
}

TEST_CASE("vtk snapshot layout is stable") {
  const auto m = mesh::build_base_mesh(1, 1, kBox, {0, 1});
  const Eigen::VectorXd u = Eigen::VectorXd::LinSpaced(4, 1.0, 4.0);
  const std::string a = tmp("rfp_a.vtk"), b = tmp("rfp_b.vtk");
  write_snapshot(u, m, a, SnapshotFormat::Vtk);
  write_snapshot(u, m, b, SnapshotFormat::Vtk);
  const std::string text = slurp(a);
  CHECK(text == slurp(b));
  CHECK(text.find("DATASET UNSTRUCTURED_GRID") != std::string::npos);
  CHECK(text.find("POINTS 16 double") != std::string::npos);
  CHECK(text.find("CELLS 4 20") != std::string::npos);
  CHECK(text.find("CELL_DATA 4") != std::string::npos);
  std::filesystem::remove(a);
  std::filesystem::remove(b);
  CHECK_THROWS_AS(write_snapshot(u, m, "/nonexistent_dir/x.csv", SnapshotFormat::Csv), SolverError);
}

}  // TEST_SUITE
