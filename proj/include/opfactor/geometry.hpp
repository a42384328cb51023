#pragma once

#include <array>
#include <vector>

#include "opfactor/types.hpp"

namespace opfactor {

/// Collocation points of the degrees of freedom, living in [0,1)^d.
struct PointSet {
  int dim = 1;                 // 1, 2, or 3
  Matrix coords;               // N x dim, rows are points
  bool periodic = false;       // wrap-around metric on the unit torus

  Index size() const { return coords.rows(); }
  void validate() const;
};

enum class Metric { euclidean, periodic };

/// Distance between two points under the chosen metric.
double point_distance(const PointSet& pts, Index a, Index b, Metric metric);

/// One cell of a nested partition. Members are point indices, sorted.
struct Cell {
  int level = 0;               // 1..q (0 is reserved for the virtual root)
  int id = 0;                  // index within its level
  int parent = -1;             // id within level-1, -1 below the root
  std::vector<int> children;   // ids within level+1
  std::vector<int> members;
  Vector center;               // construction center (see builders)
  Vector centroid;             // arithmetic mean of member points
  double radius = 0.0;         // max member distance from center
  // Regular grids only: member index block [lo, hi] per axis, in grid units.
  std::array<int, 3> blockLo{0, 0, 0};
  std::array<int, 3> blockHi{0, 0, 0};
};

/// Nested partitions tau^(k), k = 1..q, of the point indices. Level-k member
/// sets are the disjoint union of their children's member sets, and every
/// level partitions {0..N-1}. Immutable after construction.
struct PartitionTree {
  PointSet points;
  double h = 0.5;
  int q = 1;
  bool regular = false;        // dyadic grid tree (enables analytic distances)
  std::array<int, 3> gridDims{0, 0, 0};
  std::vector<std::vector<Cell>> levels;  // levels[k-1] holds tau^(k)
  Cell root;                   // virtual tau^(0) cell covering everything

  const Cell& cell(int level, int id) const {
    return level == 0 ? root : levels[level - 1][id];
  }
  int cells_at(int level) const {
    return level == 0 ? 1 : static_cast<int>(levels[level - 1].size());
  }
  Metric metric() const { return points.periodic ? Metric::periodic : Metric::euclidean; }
  /// Checks nesting, cover, and size-bound invariants; throws on violation.
  void validate() const;
};

/// Dyadic quadtree/octree over an n^d grid of points at coordinates i/n.
/// All grid dimensions must be equal powers of two; h is fixed at 1/2 and
/// q = log2(n). Level-k cells are the index blocks floor(i / 2^(q-k)).
PartitionTree build_regular_partition(const std::vector<int>& grid_dims, bool periodic);

/// Hierarchical farthest-first aggregation for scattered points. Level-k
/// centers are the shortest farthest-first prefix with covering radius
/// <= h^k/2 (hence pairwise separation > h^k/2); points join their nearest
/// finest-level center and coarser membership follows the center hierarchy,
/// so nesting holds by construction. Rejects q when h^q undershoots the
/// minimal point spacing.
PartitionTree build_general_partition(const PointSet& points, double h, int q);

/// Minimal distance between the member point sets of two cells. Level 0
/// denotes the virtual root (distance 0 to everything). Exact analytic block
/// distance on regular trees, min-pairwise otherwise.
double cell_distance(const PartitionTree& tree, int levelA, int idA, int levelB, int idB,
                     Metric metric);

/// Min-pairwise distance between two explicit index sets.
double set_distance(const PointSet& pts, const std::vector<int>& a, const std::vector<int>& b,
                    Metric metric);

/// Max member distance from the cell centroid (used for pruning bounds).
double cell_spread(const PartitionTree& tree, int level, int id, Metric metric);

}  // namespace opfactor
