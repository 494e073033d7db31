#include "rfp/errors.hpp"
#include "rfp/guards.hpp"
#include "rfp/quadmesh.hpp"

#include <doctest.h>

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <tuple>

using namespace rfp::mesh;

namespace {

const DomainBox kBox{0.3, 60.0, -1.0, 1.0};
const DomainBox kUnit{1.0, 2.0, -1.0, 1.0};

// Maps unit-square coordinates into kUnit.
double P(double x) { return 1.0 + x; }
double X(double y) { return -1.0 + 2.0 * y; }

// Leaves as (level, global i, global j), the representation the oracles use.
using Quad = std::tuple<int, std::int64_t, std::int64_t>;

std::set<Quad> quads(const QuadMesh& m) {
  std::set<Quad> s;
  for (int i = 0; i < m.size(); ++i) s.insert({m.leaf(i).level, m.global_i(i), m.global_j(i)});
  return s;
}

// Closed boxes in units of the finest level `fine` intersect (face or corner).
bool touching(const Quad& a, const Quad& b, int fine) {
  auto box = [fine](const Quad& q) {
    const std::int64_t s = std::int64_t{1} << (fine - std::get<0>(q));
    return std::array<std::int64_t, 4>{std::get<1>(q) * s, (std::get<1>(q) + 1) * s,
                                       std::get<2>(q) * s, (std::get<2>(q) + 1) * s};
  };
  const auto A = box(a), B = box(b);
  return A[0] <= B[1] && B[0] <= A[1] && A[2] <= B[3] && B[2] <= A[3];
}

// Brute-force 2:1 fixpoint: split the coarser of any touching pair whose
// levels differ by more than one.
std::set<Quad> brute_balance(std::set<Quad> s, int fine) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& a : s) {
      for (const auto& b : s) {
        if (std::get<0>(b) - std::get<0>(a) > 1 && touching(a, b, fine)) {
          const auto [l, i, j] = a;
          s.erase(a);
          for (int c = 0; c < 4; ++c) s.insert({l + 1, 2 * i + (c & 1), 2 * j + (c >> 1)});
          changed = true;
          break;
        }
      }
      if (changed) break;
    }
  }
  return s;
}

int index_of(const QuadMesh& m, double p, double xi) {
  for (int i = 0; i < m.size(); ++i) {
    const Bounds& b = m.leaf(i).bounds;
    if (p > b.p_lo && p < b.p_hi && xi > b.xi_lo && xi < b.xi_hi) return i;
  }
  return -1;
}

std::vector<RefineFlag> one_flag(const QuadMesh& m, int leaf, RefineFlag f) {
  std::vector<RefineFlag> flags(static_cast<std::size_t>(m.size()), RefineFlag::Keep);
  flags[static_cast<std::size_t>(leaf)] = f;
  return flags;
}

double fv_mass(const QuadMesh& m, const Eigen::VectorXd& u) {
  double s = 0.0;
  for (int i = 0; i < m.size(); ++i)
    for (int b = 0; b < 2; ++b)
      for (int a = 0; a < 2; ++a) s += u[dof(i, a, b)] * m.fv_p(i, a) * m.h_p(i) * m.h_xi(i);
  return s;
}

Eigen::VectorXd sample(const QuadMesh& m, double (*f)(double, double)) {
  Eigen::VectorXd u(m.num_fv());
  for (int i = 0; i < m.size(); ++i)
    for (int b = 0; b < 2; ++b)
      for (int a = 0; a < 2; ++a) u[dof(i, a, b)] = f(m.fv_p(i, a), m.fv_xi(i, b));
  return u;
}

}  // namespace

TEST_SUITE("quadmesh") {

TEST_CASE("base mesh counts") {
  const QuadMesh m = build_base_mesh(48, 8, kBox, {0, 4});
  CHECK(m.size() == 384);
  CHECK(m.num_fv() == 1536);
  const QuadMesh one = build_base_mesh(1, 1, kUnit, {0, 0});
  CHECK(one.size() == 1);
  CHECK(one.num_fv() == 4);
  const QuadMesh l2 = build_uniform_mesh(3, 1, kBox, {2, 6}, 2);
  CHECK(l2.num_fv() == 192);
}

TEST_CASE("base mesh tiling matches brute-force subdivision") {
  const DomainBox box{1.0, 4.0, -1.0, 1.0};
  const QuadMesh m = build_base_mesh(3, 2, box, {0, 3});
  REQUIRE(m.size() == 6);
  std::set<std::pair<double, double>> expected;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) expected.insert({1.0 + i * 1.0, -1.0 + j * 1.0});
  std::set<std::pair<double, double>> got;
  for (const auto& c : m.leaves()) {
    CHECK(c.bounds.p_hi - c.bounds.p_lo == doctest::Approx(1.0));
    CHECK(c.bounds.xi_hi - c.bounds.xi_lo == doctest::Approx(1.0));
    got.insert({c.bounds.p_lo, c.bounds.xi_lo});
  }
  CHECK(got == expected);
}

TEST_CASE("invalid inputs are configuration errors") {
  CHECK_THROWS_AS(build_base_mesh(0, 1, kBox, {0, 1}), rfp::ConfigError);
  CHECK_THROWS_AS(build_base_mesh(1, 1, DomainBox{2.0, 1.0, -1.0, 1.0}, {0, 1}), rfp::ConfigError);
  CHECK_THROWS_AS(build_base_mesh(1, 1, kBox, {3, 1}), rfp::ConfigError);
}

TEST_CASE("morton codes interleave x in even bits") {
  CHECK(morton_encode(0, 0) == 0u);
  CHECK(morton_encode(1, 0) == 1u);
  CHECK(morton_encode(0, 1) == 2u);
  CHECK(morton_encode(3, 3) == 15u);
  CHECK(morton_encode(5, 2) == 0b011001u);
}

TEST_CASE("leaves are ordered along the space-filling curve within each tree") {
  QuadMesh m = build_uniform_mesh(2, 1, kUnit, {0, 3}, 2);
  for (int i = 1; i < m.size(); ++i) {
    const auto& a = m.leaf(i - 1);
    const auto& b = m.leaf(i);
    if (a.tree == b.tree) CHECK(morton_encode(a.x, a.y) < morton_encode(b.x, b.y));
    else CHECK(a.tree < b.tree);
  }
}

TEST_CASE("all keep is the identity") {
  const QuadMesh m = build_uniform_mesh(3, 2, kBox, {1, 4}, 2);
  auto [out, summary] = refine_and_balance(m, std::vector<RefineFlag>(m.size(), RefineFlag::Keep));
  CHECK(out == m);
  CHECK(summary.refined == 0);
  CHECK(summary.coarsened == 0);
}

TEST_CASE("single split leaves neighbors alone") {
  const QuadMesh m = build_base_mesh(3, 3, kUnit, {0, 3});
  const int centre = index_of(m, P(0.5), X(0.5));
  auto [out, s] = refine_and_balance(m, one_flag(m, centre, RefineFlag::Refine));
  CHECK(out.size() == 12);
  CHECK(s.refined == 1);
  CHECK(s.balance_refined == 0);
  CHECK(is_balanced(out));
  int level1 = 0;
  for (const auto& c : out.leaves()) level1 += c.level == 1;
  CHECK(level1 == 4);
}

TEST_CASE("balance after a double refinement matches the brute-force fixpoint") {
  const QuadMesh m = build_base_mesh(3, 3, kUnit, {0, 4});
  QuadMesh a = refine_and_balance(m, one_flag(m, index_of(m, P(0.5), X(0.5)), RefineFlag::Refine)).first;
  // Refine the child in the lower left corner of the centre tree twice.
  for (int rep = 0; rep < 2; ++rep) {
    const int k = index_of(a, P(1.0 / 3.0 + 1e-6), X(1.0 / 3.0 + 1e-6));
    const std::set<Quad> before = quads(a);
    const Quad target{a.leaf(k).level, a.global_i(k), a.global_j(k)};
    auto [b, s] = refine_and_balance(a, one_flag(a, k, RefineFlag::Refine));
    std::set<Quad> split = before;
    split.erase(target);
    const auto [l, i, j] = target;
    for (int c = 0; c < 4; ++c) split.insert({l + 1, 2 * i + (c & 1), 2 * j + (c >> 1)});
    CHECK(quads(b) == brute_balance(split, 8));
    CHECK(is_balanced(b));
    a = b;
  }
  CHECK(a.max_leaf_level() == 3);
}

TEST_CASE("random flag sequences stay balanced and match the oracle") {
  std::mt19937 rng(7);
  QuadMesh m = build_base_mesh(2, 2, kUnit, {0, 5});
  for (int it = 0; it < 12; ++it) {
    std::vector<RefineFlag> flags(static_cast<std::size_t>(m.size()), RefineFlag::Keep);
    std::set<Quad> split;
    for (int i = 0; i < m.size(); ++i) {
      const bool r = rng() % 5 == 0 && m.leaf(i).level < 5;
      if (r) flags[static_cast<std::size_t>(i)] = RefineFlag::Refine;
      const Quad q{m.leaf(i).level, m.global_i(i), m.global_j(i)};
      if (r) {
        const auto [l, gi, gj] = q;
        for (int c = 0; c < 4; ++c) split.insert({l + 1, 2 * gi + (c & 1), 2 * gj + (c >> 1)});
      } else {
        split.insert(q);
      }
    }
    auto [out, s] = refine_and_balance(m, flags);
    CHECK(quads(out) == brute_balance(split, 8));
    CHECK(is_balanced(out));
    m = out;
  }
}

TEST_CASE("flags are clipped to the level bounds") {
  const QuadMesh m = build_uniform_mesh(1, 1, kUnit, {1, 1}, 1);
  auto [r, s1] = refine_and_balance(m, std::vector<RefineFlag>(m.size(), RefineFlag::Refine));
  CHECK(r == m);
  CHECK(s1.refine_clipped == m.size());
  auto [c, s2] = refine_and_balance(m, std::vector<RefineFlag>(m.size(), RefineFlag::Coarsen));
  CHECK(c == m);
  CHECK(s2.coarsen_clipped == m.size());
}

TEST_CASE("coarsening merges complete families only") {
  const QuadMesh m = build_uniform_mesh(1, 1, kUnit, {0, 2}, 1);
  std::vector<RefineFlag> flags(4, RefineFlag::Coarsen);
  auto [out, s] = refine_and_balance(m, flags);
  CHECK(out.size() == 1);
  CHECK(s.coarsened == 1);
  flags[2] = RefineFlag::Keep;
  auto [kept, s2] = refine_and_balance(m, flags);
  CHECK(kept == m);
  CHECK(s2.coarsened == 0);
}

TEST_CASE("face neighbors on a uniform mesh") {
  const QuadMesh m = build_uniform_mesh(2, 2, kBox, {0, 3}, 1);
  const int i = index_of(m, 16.0, -0.4);
  const Neighbor n = face_neighbors(m, i, Side::PPlus);
  CHECK(n.kind == NeighborKind::SameLevel);
  CHECK(m.leaf(n.leaf).bounds.p_lo == doctest::Approx(m.leaf(i).bounds.p_hi));
  CHECK(m.leaf(n.leaf).bounds.xi_lo == doctest::Approx(m.leaf(i).bounds.xi_lo));
  const int edge = index_of(m, 1.0, 0.0 - 0.4);
  CHECK(face_neighbors(m, edge, Side::PMinus).kind == NeighborKind::Boundary);
  const int top = index_of(m, 1.0, 0.9);
  CHECK(face_neighbors(m, top, Side::XiPlus).kind == NeighborKind::Boundary);
}

TEST_CASE("face neighbors agree with a geometric adjacency search") {
  QuadMesh m = build_base_mesh(2, 2, kUnit, {0, 4});
  m = refine_and_balance(m, one_flag(m, 0, RefineFlag::Refine)).first;
  m = refine_and_balance(m, one_flag(m, index_of(m, P(0.49), X(0.49)), RefineFlag::Refine)).first;
  const double tol = 1e-12;
  int coarser = 0, finer = 0;
  for (int i = 0; i < m.size(); ++i) {
    const Bounds& b = m.leaf(i).bounds;
    for (Side s : kSides) {
      // Leaves whose closed box shares a segment of positive length with side s.
      std::vector<int> adj;
      for (int k = 0; k < m.size(); ++k) {
        const Bounds& c = m.leaf(k).bounds;
        const bool p_side = s == Side::PMinus || s == Side::PPlus;
        double face, lo, hi, clo, chi;
        if (p_side) {
          face = s == Side::PMinus ? b.p_lo : b.p_hi;
          if (std::abs((s == Side::PMinus ? c.p_hi : c.p_lo) - face) > tol) continue;
          lo = b.xi_lo; hi = b.xi_hi; clo = c.xi_lo; chi = c.xi_hi;
        } else {
          face = s == Side::XiMinus ? b.xi_lo : b.xi_hi;
          if (std::abs((s == Side::XiMinus ? c.xi_hi : c.xi_lo) - face) > tol) continue;
          lo = b.p_lo; hi = b.p_hi; clo = c.p_lo; chi = c.p_hi;
        }
        if (std::min(hi, chi) - std::max(lo, clo) > tol) adj.push_back(k);
      }
      const Neighbor n = face_neighbors(m, i, s);
      switch (n.kind) {
        case NeighborKind::Boundary: CHECK(adj.empty()); break;
        case NeighborKind::SameLevel:
          REQUIRE(adj.size() == 1);
          CHECK(adj[0] == n.leaf);
          CHECK(m.leaf(n.leaf).level == m.leaf(i).level);
          break;
        case NeighborKind::Coarser: {
          ++coarser;
          REQUIRE(adj.size() == 1);
          CHECK(adj[0] == n.leaf);
          const Bounds& c = m.leaf(n.leaf).bounds;
          const bool p_side = s == Side::PMinus || s == Side::PPlus;
          const double mid = p_side ? 0.5 * (c.xi_lo + c.xi_hi) : 0.5 * (c.p_lo + c.p_hi);
          const double lo = p_side ? b.xi_lo : b.p_lo;
          CHECK(n.child_position == (lo < mid - tol ? 0 : 1));
          break;
        }
        case NeighborKind::Finer: {
          ++finer;
          REQUIRE(adj.size() == 2);
          std::sort(adj.begin(), adj.end(), [&](int x, int y) {
            const bool p_side = s == Side::PMinus || s == Side::PPlus;
            return p_side ? m.leaf(x).bounds.xi_lo < m.leaf(y).bounds.xi_lo
                          : m.leaf(x).bounds.p_lo < m.leaf(y).bounds.p_lo;
          });
          CHECK(adj[0] == n.leaf);
          CHECK(adj[1] == n.leaf2);
          break;
        }
      }
    }
  }
  CHECK(coarser > 0);
  CHECK(finer > 0);
}

TEST_CASE("guards reproduce constants and linear fields") {
  QuadMesh m = build_base_mesh(2, 2, kUnit, {0, 3});
  m = refine_and_balance(m, one_flag(m, 0, RefineFlag::Refine)).first;
  m = refine_and_balance(m, one_flag(m, index_of(m, P(0.3), X(0.3)), RefineFlag::Refine)).first;
  rfp::BoundarySpec zero{rfp::PBoundaryKind::ZeroFlux, rfp::PBoundaryKind::ZeroFlux, {}, {}};

  const Eigen::VectorXd c = Eigen::VectorXd::Constant(m.num_fv(), 2.5);
  const Eigen::VectorXd g = fill_guard_layers(m, c, zero, 0.0);
  CHECK((g.array() - 2.5).abs().maxCoeff() < 1e-14);

  // Linear data with exact ghost values from the Exact rule on both p edges.
  auto lin = [](double p, double xi) { return 1.0 + 2.0 * p + 0.5 * xi; };
  rfp::BoundarySpec exact{rfp::PBoundaryKind::Exact, rfp::PBoundaryKind::Exact,
                          [&](double p, double xi, double) { return lin(p, xi); },
                          [&](double p, double xi, double) { return lin(p, xi); }};
  Eigen::VectorXd u(m.num_fv());
  for (int i = 0; i < m.size(); ++i)
    for (int b = 0; b < 2; ++b)
      for (int a = 0; a < 2; ++a) u[dof(i, a, b)] = lin(m.fv_p(i, a), m.fv_xi(i, b));
  const Eigen::VectorXd gl = fill_guard_layers(m, u, exact, 0.0);
  double worst = 0.0;
  for (int i = 0; i < m.size(); ++i) {
    const Bounds& bd = m.leaf(i).bounds;
    const double hp = m.h_p(i), hx = m.h_xi(i);
    for (Side s : kSides) {
      const bool xi_edge = (s == Side::XiMinus && bd.xi_lo <= -1.0) ||
                           (s == Side::XiPlus && bd.xi_hi >= 1.0);
      if (xi_edge) continue;  // reflected, not extrapolated
      for (int d = 0; d < 2; ++d)
        for (int t = 0; t < 2; ++t) {
          double p, xi;
          switch (s) {
            case Side::PMinus: p = bd.p_lo - (d + 0.5) * hp; xi = bd.xi_lo + (t + 0.5) * hx; break;
            case Side::PPlus: p = bd.p_hi + (d + 0.5) * hp; xi = bd.xi_lo + (t + 0.5) * hx; break;
            case Side::XiMinus: p = bd.p_lo + (t + 0.5) * hp; xi = bd.xi_lo - (d + 0.5) * hx; break;
            default: p = bd.p_lo + (t + 0.5) * hp; xi = bd.xi_hi + (d + 0.5) * hx; break;
          }
          worst = std::max(worst, std::abs(gl[guard_slot(i, s, d, t)] - lin(p, xi)));
        }
    }
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("guard fill rejects NaN") {
  const QuadMesh m = build_base_mesh(1, 1, kUnit, {0, 1});
  Eigen::VectorXd u = Eigen::VectorXd::Ones(4);
  u[2] = std::nan("");
  rfp::BoundarySpec zero{rfp::PBoundaryKind::ZeroFlux, rfp::PBoundaryKind::ZeroFlux, {}, {}};
  CHECK_THROWS_AS(fill_guard_layers(m, u, zero, 0.0), rfp::InternalError);
}

TEST_CASE("transfer preserves constants, mass and positivity") {
  QuadMesh m = build_uniform_mesh(3, 1, kBox, {1, 4}, 1);
  auto [fine, s] = refine_and_balance(m, std::vector<RefineFlag>(m.size(), RefineFlag::Refine));
  const Eigen::VectorXd c = Eigen::VectorXd::Constant(m.num_fv(), 3.0);
  const Eigen::VectorXd cf = transfer_on_adapt(m, c, fine);
  CHECK((cf.array() - 3.0).abs().maxCoeff() < 1e-13);

  std::mt19937 rng(3);
  std::uniform_real_distribution<double> U(0.1, 10.0);
  Eigen::VectorXd r(m.num_fv());
  for (auto& v : r) v = U(rng);
  const Eigen::VectorXd rf = transfer_on_adapt(m, r, fine);
  CHECK(std::abs(fv_mass(fine, rf) - fv_mass(m, r)) <= 1e-12 * fv_mass(m, r));

  // Coarsen back: conservative averaging.
  auto [back, s2] = refine_and_balance(fine, std::vector<RefineFlag>(fine.size(), RefineFlag::Coarsen));
  CHECK(back == m);
  const Eigen::VectorXd rb = transfer_on_adapt(fine, rf, back);
  CHECK(std::abs(fv_mass(back, rb) - fv_mass(m, r)) <= 1e-12 * fv_mass(m, r));

  // Steep profile with a near-zero region: bilinear interpolation undershoots
  // without the clamp.
  const Eigen::VectorXd steep =
      sample(m, [](double p, double) { return p < 20.0 ? 1.0 : 1e-20; });
  const Eigen::VectorXd sf = transfer_on_adapt(m, steep, fine, true);
  CHECK(sf.minCoeff() >= 0.0);
  CHECK(std::abs(fv_mass(fine, sf) - fv_mass(m, steep)) <= 1e-12 * fv_mass(m, steep));
}

TEST_CASE("mesh csv has the documented header") {
  const QuadMesh m = build_base_mesh(2, 1, kUnit, {0, 1});
  const auto path = std::filesystem::temp_directory_path() / "rfp_mesh_test.csv";
  write_mesh_csv(m, path.string());
  std::ifstream is(path);
  std::string header, row;
  std::getline(is, header);
  CHECK(header == "tree_index,level,p_lo,p_hi,xi_lo,xi_hi");
  int rows = 0;
  while (std::getline(is, row)) ++rows;
  CHECK(rows == 2);
  std::filesystem::remove(path);
}

}  // TEST_SUITE
