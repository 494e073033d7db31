#include "rfp/quadmesh.hpp"

#include "rfp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <unordered_set>

namespace rfp::mesh {

void DomainBox::validate() const {
  if (!(std::isfinite(p_min) && std::isfinite(p_max)) || !(p_min > 0.0) || !(p_min < p_max)) {
    std::ostringstream os;
    os << "invalid domain: need 0 < p_min < p_max, got [" << p_min << ", " << p_max << "]";
    throw ConfigError(os.str());
  }
  if (xi_min != -1.0 || xi_max != 1.0) throw ConfigError("invalid domain: xi range must be [-1, 1]");
}

void LevelBounds::validate() const {
  if (min_level < 0 || max_level < min_level || max_level > kMaxLevel) {
    std::ostringstream os;
    os << "invalid level bounds: need 0 <= min_level <= max_level <= " << kMaxLevel << ", got ("
       << min_level << ", " << max_level << ")";
    throw ConfigError(os.str());
  }
}

std::uint64_t quadrant_key(int level, std::int64_t gi, std::int64_t gj) {
  return (static_cast<std::uint64_t>(level) << 56) | (static_cast<std::uint64_t>(gi) << 28) |
         static_cast<std::uint64_t>(gj);
}

std::uint32_t morton_encode(std::uint32_t x, std::uint32_t y) {
  auto spread = [](std::uint32_t v) {
    v &= 0x0000ffffu;
    v = (v | (v << 8)) & 0x00ff00ffu;
    v = (v | (v << 4)) & 0x0f0f0f0fu;
    v = (v | (v << 2)) & 0x33333333u;
    v = (v | (v << 1)) & 0x55555555u;
    return v;
  };
  return spread(x) | (spread(y) << 1);
}

namespace {

struct Quad {
  int level;
  std::int64_t gi;
  std::int64_t gj;
};

LeafCell make_leaf(int n_p, int level, std::int64_t gi, std::int64_t gj) {
  LeafCell c;
  c.level = level;
  const std::int64_t tx = gi >> level;
  const std::int64_t ty = gj >> level;
  c.tree = static_cast<int>(ty * n_p + tx);
  c.x = static_cast<std::uint32_t>(gi - (tx << level));
  c.y = static_cast<std::uint32_t>(gj - (ty << level));
  return c;
}

void sort_sfc(std::vector<LeafCell>& leaves) {
  auto code = [](const LeafCell& c) {
    const int shift = kMaxLevel - c.level;
    return morton_encode(c.x << shift, c.y << shift);
  };
  std::sort(leaves.begin(), leaves.end(), [&](const LeafCell& a, const LeafCell& b) {
    if (a.tree != b.tree) return a.tree < b.tree;
    return code(a) < code(b);
  });
}

// Working set of quadrants used while refining and balancing.
class LeafSet {
 public:
  LeafSet(int n_p, int n_xi) : n_p_(n_p), n_xi_(n_xi) {}

  void insert(const Quad& q) { set_.insert(quadrant_key(q.level, q.gi, q.gj)); }
  void erase(const Quad& q) { set_.erase(quadrant_key(q.level, q.gi, q.gj)); }
  bool contains(const Quad& q) const { return set_.count(quadrant_key(q.level, q.gi, q.gj)) > 0; }

  bool in_domain(const Quad& q) const {
    return q.gi >= 0 && q.gj >= 0 && q.gi < (static_cast<std::int64_t>(n_p_) << q.level) &&
           q.gj < (static_cast<std::int64_t>(n_xi_) << q.level);
  }

  bool covered(const Quad& q) const {
    for (int l = q.level; l >= 0; --l) {
      const int d = q.level - l;
      if (contains({l, q.gi >> d, q.gj >> d})) return true;
    }
    return false;
  }

  // True when a quadrant q (treated as a leaf) sees a neighbor two or more
  // levels finer across a face or corner.
  bool violates(const Quad& q) const {
    for (int di = -1; di <= 1; ++di) {
      for (int dj = -1; dj <= 1; ++dj) {
        if (di == 0 && dj == 0) continue;
        const Quad b{q.level, q.gi + di, q.gj + dj};
        if (!in_domain(b) || covered(b)) continue;
        for (int cx = 0; cx < 2; ++cx) {
          if ((di == 1 && cx != 0) || (di == -1 && cx != 1)) continue;
          for (int cy = 0; cy < 2; ++cy) {
            if ((dj == 1 && cy != 0) || (dj == -1 && cy != 1)) continue;
            if (!contains({q.level + 1, 2 * b.gi + cx, 2 * b.gj + cy})) return true;
          }
        }
      }
    }
    return false;
  }

  std::vector<Quad> quads() const {
    std::vector<Quad> out;
    out.reserve(set_.size());
    for (std::uint64_t k : set_) {
      out.push_back({static_cast<int>(k >> 56), static_cast<std::int64_t>((k >> 28) & 0xfffffffu),
                     static_cast<std::int64_t>(k & 0xfffffffu)});
    }
    return out;
  }

 private:
  int n_p_;
  int n_xi_;
  std::unordered_set<std::uint64_t> set_;
};

void split(LeafSet& set, const Quad& q) {
  set.erase(q);
  for (int c = 0; c < 4; ++c) set.insert({q.level + 1, 2 * q.gi + (c & 1), 2 * q.gj + (c >> 1)});
}

}  // namespace

QuadMesh::QuadMesh(int n_p, int n_xi, const DomainBox& box, LevelBounds bounds,
                   std::vector<LeafCell> leaves)
    : n_p_(n_p), n_xi_(n_xi), box_(box), level_bounds_(bounds), leaves_(std::move(leaves)) {
  if (n_p < 1 || n_xi < 1) throw ConfigError("root grid counts must be >= 1");
  if (n_p > kMaxRootTrees || n_xi > kMaxRootTrees)
    throw ConfigError("root grid counts must be <= " + std::to_string(kMaxRootTrees));
  box_.validate();
  level_bounds_.validate();
  for (int i = 0; i < size(); ++i) {
    LeafCell& c = leaves_[static_cast<std::size_t>(i)];
    const std::int64_t gi = global_i(i);
    const std::int64_t gj = global_j(i);
    c.bounds = {p_coord(c.level, gi), p_coord(c.level, gi + 1), xi_coord(c.level, gj),
                xi_coord(c.level, gj + 1)};
  }
  build_index();
  build_neighbors();
}

std::int64_t QuadMesh::global_i(int i) const {
  const LeafCell& c = leaf(i);
  return (static_cast<std::int64_t>(c.tree % n_p_) << c.level) + c.x;
}

std::int64_t QuadMesh::global_j(int i) const {
  const LeafCell& c = leaf(i);
  return (static_cast<std::int64_t>(c.tree / n_p_) << c.level) + c.y;
}

double QuadMesh::p_coord(int level, std::int64_t g) const {
  const double n = std::ldexp(static_cast<double>(n_p_), level);
  if (g <= 0) return box_.p_min;
  if (static_cast<double>(g) >= n) return box_.p_max;
  return box_.p_min + (box_.p_max - box_.p_min) * (static_cast<double>(g) / n);
}

double QuadMesh::xi_coord(int level, std::int64_t g) const {
  const double n = std::ldexp(static_cast<double>(n_xi_), level);
  if (g <= 0) return box_.xi_min;
  if (static_cast<double>(g) >= n) return box_.xi_max;
  return box_.xi_min + (box_.xi_max - box_.xi_min) * (static_cast<double>(g) / n);
}

bool QuadMesh::in_domain(int level, std::int64_t gi, std::int64_t gj) const {
  return gi >= 0 && gj >= 0 && gi < (static_cast<std::int64_t>(n_p_) << level) &&
         gj < (static_cast<std::int64_t>(n_xi_) << level);
}

int QuadMesh::find(int level, std::int64_t gi, std::int64_t gj) const {
  if (level < 0 || level > kMaxLevel || !in_domain(level, gi, gj)) return -1;
  auto it = index_.find(quadrant_key(level, gi, gj));
  return it == index_.end() ? -1 : it->second;
}

int QuadMesh::find_covering(int level, std::int64_t gi, std::int64_t gj) const {
  if (!in_domain(level, gi, gj)) return -1;
  for (int l = std::min(level, kMaxLevel); l >= 0; --l) {
    const int d = level - l;
    const int k = find(l, gi >> d, gj >> d);
    if (k >= 0) return k;
  }
  return -1;
}

void QuadMesh::build_index() {
  index_.clear();
  index_.reserve(leaves_.size() * 2);
  for (int i = 0; i < size(); ++i) {
    const auto [it, fresh] = index_.emplace(quadrant_key(leaf(i).level, global_i(i), global_j(i)), i);
    if (!fresh) throw InternalError("duplicate leaf in mesh");
  }
}

Neighbor QuadMesh::compute_neighbor(int i, Side s) const {
  const int L = leaf(i).level;
  const std::int64_t gi = global_i(i);
  const std::int64_t gj = global_j(i);
  const bool along_p = (s == Side::PMinus || s == Side::PPlus);
  const int dir = (s == Side::PMinus || s == Side::XiMinus) ? -1 : 1;
  const std::int64_t bi = along_p ? gi + dir : gi;
  const std::int64_t bj = along_p ? gj : gj + dir;

  Neighbor n;
  if (!in_domain(L, bi, bj)) return n;
  if (int k = find(L, bi, bj); k >= 0) {
    n.kind = NeighborKind::SameLevel;
    n.leaf = k;
    return n;
  }
  if (L > 0) {
    if (int k = find(L - 1, bi >> 1, bj >> 1); k >= 0) {
      n.kind = NeighborKind::Coarser;
      n.leaf = k;
      n.child_position = static_cast<int>(along_p ? (gj & 1) : (gi & 1));
      return n;
    }
  }
  // Finer: the two children of the same-level box that touch this leaf.
  const int c_norm = dir > 0 ? 0 : 1;
  std::array<int, 2> fine{};
  for (int t = 0; t < 2; ++t) {
    const std::int64_t ci = along_p ? 2 * bi + c_norm : 2 * bi + t;
    const std::int64_t cj = along_p ? 2 * bj + t : 2 * bj + c_norm;
    fine[static_cast<std::size_t>(t)] = find(L + 1, ci, cj);
    if (fine[static_cast<std::size_t>(t)] < 0) throw InternalError("mesh is not 2:1 balanced");
  }
  n.kind = NeighborKind::Finer;
  n.leaf = fine[0];
  n.leaf2 = fine[1];
  return n;
}

void QuadMesh::build_neighbors() {
  neighbors_.assign(leaves_.size(), {});
  for (int i = 0; i < size(); ++i)
    for (Side s : kSides)
      neighbors_[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)] = compute_neighbor(i, s);
}

int QuadMesh::max_leaf_level() const {
  int m = 0;
  for (const auto& c : leaves_) m = std::max(m, c.level);
  return m;
}

int QuadMesh::min_leaf_level() const {
  int m = kMaxLevel;
  for (const auto& c : leaves_) m = std::min(m, c.level);
  return m;
}

bool QuadMesh::operator==(const QuadMesh& o) const {
  return n_p_ == o.n_p_ && n_xi_ == o.n_xi_ && box_.p_min == o.box_.p_min &&
         box_.p_max == o.box_.p_max && leaves_ == o.leaves_;
}

QuadMesh build_uniform_mesh(int n_p, int n_xi, const DomainBox& box, LevelBounds level_bounds,
                            int level) {
  box.validate();
  if (n_p < 1 || n_xi < 1) throw ConfigError("root grid counts must be >= 1");
  if (n_p > kMaxRootTrees || n_xi > kMaxRootTrees)
    throw ConfigError("root grid counts must be <= " + std::to_string(kMaxRootTrees));
  if (level < 0 || level > kMaxLevel) throw ConfigError("uniform level out of range");
  std::vector<LeafCell> leaves;
  const std::int64_t ni = static_cast<std::int64_t>(n_p) << level;
  const std::int64_t nj = static_cast<std::int64_t>(n_xi) << level;
  leaves.reserve(static_cast<std::size_t>(ni * nj));
  for (std::int64_t j = 0; j < nj; ++j)
    for (std::int64_t i = 0; i < ni; ++i) leaves.push_back(make_leaf(n_p, level, i, j));
  sort_sfc(leaves);
  return QuadMesh(n_p, n_xi, box, level_bounds, std::move(leaves));
}

QuadMesh build_base_mesh(int n_p, int n_xi, const DomainBox& box, LevelBounds level_bounds) {
  return build_uniform_mesh(n_p, n_xi, box, level_bounds, 0);
}

std::pair<QuadMesh, AdaptSummary> refine_and_balance(const QuadMesh& mesh,
                                                     const std::vector<RefineFlag>& flags) {
  if (flags.size() != static_cast<std::size_t>(mesh.size()))
    throw InternalError("refine flags length differs from leaf count");
  const LevelBounds lb = mesh.level_bounds();
  AdaptSummary summary;
  LeafSet set(mesh.n_p(), mesh.n_xi());
  for (int i = 0; i < mesh.size(); ++i) set.insert({mesh.leaf(i).level, mesh.global_i(i), mesh.global_j(i)});

  for (int i = 0; i < mesh.size(); ++i) {
    if (flags[static_cast<std::size_t>(i)] != RefineFlag::Refine) continue;
    const int L = mesh.leaf(i).level;
    if (L >= lb.max_level || L >= kMaxLevel) {
      ++summary.refine_clipped;
      continue;
    }
    split(set, {L, mesh.global_i(i), mesh.global_j(i)});
    ++summary.refined;
  }

  for (;;) {
    std::vector<Quad> bad;
    for (const Quad& q : set.quads())
      if (set.violates(q)) bad.push_back(q);
    if (bad.empty()) break;
    for (const Quad& q : bad) split(set, q);
    summary.balance_refined += static_cast<int>(bad.size());
  }

  // Families: all four siblings must still be leaves and flagged Coarsen.
  std::unordered_map<std::uint64_t, int> family_votes;
  for (int i = 0; i < mesh.size(); ++i) {
    if (flags[static_cast<std::size_t>(i)] != RefineFlag::Coarsen) continue;
    const Quad q{mesh.leaf(i).level, mesh.global_i(i), mesh.global_j(i)};
    if (q.level <= lb.min_level || !set.contains(q)) {
      ++summary.coarsen_clipped;
      continue;
    }
    ++family_votes[quadrant_key(q.level - 1, q.gi >> 1, q.gj >> 1)];
  }
  std::vector<std::uint64_t> parents;
  for (const auto& [key, votes] : family_votes) parents.push_back(key);
  std::sort(parents.begin(), parents.end());
  for (std::uint64_t key : parents) {
    const int votes = family_votes[key];
    const Quad p{static_cast<int>(key >> 56), static_cast<std::int64_t>((key >> 28) & 0xfffffffu),
                 static_cast<std::int64_t>(key & 0xfffffffu)};
    if (votes != 4 || set.violates(p)) {
      summary.coarsen_clipped += votes;
      continue;
    }
    for (int c = 0; c < 4; ++c) set.erase({p.level + 1, 2 * p.gi + (c & 1), 2 * p.gj + (c >> 1)});
    set.insert(p);
    ++summary.coarsened;
  }

  std::vector<LeafCell> leaves;
  for (const Quad& q : set.quads()) leaves.push_back(make_leaf(mesh.n_p(), q.level, q.gi, q.gj));
  sort_sfc(leaves);
  return {QuadMesh(mesh.n_p(), mesh.n_xi(), mesh.box(), lb, std::move(leaves)), summary};
}

Neighbor face_neighbors(const QuadMesh& mesh, int leaf, Side side) {
  return mesh.neighbor(leaf, side);
}

bool is_balanced(const QuadMesh& mesh) {
  for (int i = 0; i < mesh.size(); ++i) {
    const int L = mesh.leaf(i).level;
    const std::int64_t gi = mesh.global_i(i);
    const std::int64_t gj = mesh.global_j(i);
    for (int di = -1; di <= 1; ++di) {
      for (int dj = -1; dj <= 1; ++dj) {
        if (di == 0 && dj == 0) continue;
        if (!mesh.in_domain(L, gi + di, gj + dj)) continue;
        if (mesh.find_covering(L, gi + di, gj + dj) >= 0) {
          const int k = mesh.find_covering(L, gi + di, gj + dj);
          if (L - mesh.leaf(k).level > 1) return false;
          continue;
        }
        for (int cx = 0; cx < 2; ++cx) {
          if ((di == 1 && cx != 0) || (di == -1 && cx != 1)) continue;
          for (int cy = 0; cy < 2; ++cy) {
            if ((dj == 1 && cy != 0) || (dj == -1 && cy != 1)) continue;
            if (mesh.find(L + 1, 2 * (gi + di) + cx, 2 * (gj + dj) + cy) < 0) return false;
          }
        }
      }
    }
  }
  return true;
}

void write_mesh_csv(const QuadMesh& mesh, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw SolverError("cannot open " + path + " for writing");
  os << "tree_index,level,p_lo,p_hi,xi_lo,xi_hi\n";
  os << std::setprecision(17);
  for (const LeafCell& c : mesh.leaves()) {
    os << c.tree << ',' << c.level << ',' << c.bounds.p_lo << ',' << c.bounds.p_hi << ','
       << c.bounds.xi_lo << ',' << c.bounds.xi_hi << '\n';
  }
  if (!os) throw SolverError("write failed for " + path);
}

}  // namespace rfp::mesh
