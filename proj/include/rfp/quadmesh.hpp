#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace rfp::mesh {

// Deepest level a leaf may reach. Global per-level indices must fit in 28 bits,
// which limits the root grid to 4096 trees per direction.
inline constexpr int kMaxLevel = 16;
inline constexpr int kMaxRootTrees = 4096;

struct DomainBox {
  double p_min = 0.3;
  double p_max = 60.0;
  double xi_min = -1.0;
  double xi_max = 1.0;

  void validate() const;
  bool operator==(const DomainBox&) const = default;
};

struct LevelBounds {
  int min_level = 0;
  int max_level = 0;

  void validate() const;
  bool operator==(const LevelBounds&) const = default;
};

enum class Side : int { PMinus = 0, PPlus = 1, XiMinus = 2, XiPlus = 3 };

inline constexpr std::array<Side, 4> kSides = {Side::PMinus, Side::PPlus, Side::XiMinus,
                                               Side::XiPlus};

struct Bounds {
  double p_lo = 0.0;
  double p_hi = 0.0;
  double xi_lo = 0.0;
  double xi_hi = 0.0;
};

struct LeafCell {
  int tree = 0;
  int level = 0;
  // Position inside the tree at this level; x runs along p, y along xi.
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  Bounds bounds;

  bool operator==(const LeafCell& o) const {
    return tree == o.tree && level == o.level && x == o.x && y == o.y;
  }
};

enum class RefineFlag : std::int8_t { Coarsen = -1, Keep = 0, Refine = 1 };

enum class NeighborKind { Boundary, SameLevel, Coarser, Finer };

struct Neighbor {
  NeighborKind kind = NeighborKind::Boundary;
  // SameLevel and Coarser: the neighbor. Finer: the fine leaf at the lower
  // coordinate along the face.
  int leaf = -1;
  // Finer only: the fine leaf at the upper coordinate along the face.
  int leaf2 = -1;
  // Coarser only: which half of the coarse face this leaf touches
  // (0 = lower coordinate along the face).
  int child_position = -1;
};

struct AdaptSummary {
  int refined = 0;          // leaves split because of a Refine flag
  int coarsened = 0;        // families merged
  int balance_refined = 0;  // extra splits forced by 2:1 balance
  int refine_clipped = 0;   // Refine flags at max_level
  int coarsen_clipped = 0;  // Coarsen flags that could not be honored
};

// Index of the FV cell (a along p, b along xi) inside leaf `leaf`.
inline int dof(int leaf, int a, int b) { return 4 * leaf + a + 2 * b; }

class QuadMesh {
 public:
  QuadMesh(int n_p, int n_xi, const DomainBox& box, LevelBounds bounds,
           std::vector<LeafCell> leaves);

  int n_p() const { return n_p_; }
  int n_xi() const { return n_xi_; }
  const DomainBox& box() const { return box_; }
  LevelBounds level_bounds() const { return level_bounds_; }

  int size() const { return static_cast<int>(leaves_.size()); }
  int num_fv() const { return 4 * size(); }
  const std::vector<LeafCell>& leaves() const { return leaves_; }
  const LeafCell& leaf(int i) const { return leaves_[static_cast<std::size_t>(i)]; }

  // FV spacing inside leaf i.
  double h_p(int i) const { return 0.5 * (leaf(i).bounds.p_hi - leaf(i).bounds.p_lo); }
  double h_xi(int i) const { return 0.5 * (leaf(i).bounds.xi_hi - leaf(i).bounds.xi_lo); }
  double fv_p(int i, int a) const { return leaf(i).bounds.p_lo + (a + 0.5) * h_p(i); }
  double fv_xi(int i, int b) const { return leaf(i).bounds.xi_lo + (b + 0.5) * h_xi(i); }

  // Global index of leaf i along p (resp. xi) counted at its own level.
  std::int64_t global_i(int i) const;
  std::int64_t global_j(int i) const;

  // Leaf with exactly this level and global position, or -1.
  int find(int level, std::int64_t gi, std::int64_t gj) const;
  // Leaf of level <= `level` that contains the quadrant, or -1 when the
  // quadrant is subdivided or outside the domain.
  int find_covering(int level, std::int64_t gi, std::int64_t gj) const;
  bool in_domain(int level, std::int64_t gi, std::int64_t gj) const;

  const Neighbor& neighbor(int i, Side s) const {
    return neighbors_[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)];
  }

  // Coordinates of the dyadic grid line g at `level`.
  double p_coord(int level, std::int64_t g) const;
  double xi_coord(int level, std::int64_t g) const;

  int max_leaf_level() const;
  int min_leaf_level() const;

  bool operator==(const QuadMesh& o) const;

 private:
  void build_index();
  void build_neighbors();
  Neighbor compute_neighbor(int i, Side s) const;

  int n_p_;
  int n_xi_;
  DomainBox box_;
  LevelBounds level_bounds_;
  std::vector<LeafCell> leaves_;
  std::unordered_map<std::uint64_t, int> index_;
  std::vector<std::array<Neighbor, 4>> neighbors_;
};

std::uint64_t quadrant_key(int level, std::int64_t gi, std::int64_t gj);
std::uint32_t morton_encode(std::uint32_t x, std::uint32_t y);

// Uniform mesh of n_p * n_xi level-0 leaves.
QuadMesh build_base_mesh(int n_p, int n_xi, const DomainBox& box, LevelBounds level_bounds);
// Uniform mesh with every leaf at `level`.
QuadMesh build_uniform_mesh(int n_p, int n_xi, const DomainBox& box, LevelBounds level_bounds,
                            int level);

std::pair<QuadMesh, AdaptSummary> refine_and_balance(const QuadMesh& mesh,
                                                     const std::vector<RefineFlag>& flags);

Neighbor face_neighbors(const QuadMesh& mesh, int leaf, Side side);

// Exhaustive face and corner scan.
bool is_balanced(const QuadMesh& mesh);

void write_mesh_csv(const QuadMesh& mesh, const std::string& path);

// Maps the field on old_mesh to new_mesh, where new_mesh came from old_mesh by
// refine_and_balance. Preserves sum(f~ * p_c * dA). With `positivity`, refined
// values are clamped at 0 before the mass is restored; otherwise an additive
// correction restores it.
Eigen::VectorXd transfer_on_adapt(const QuadMesh& old_mesh, const Eigen::VectorXd& old_field,
                                  const QuadMesh& new_mesh, bool positivity = true);

}  // namespace rfp::mesh
