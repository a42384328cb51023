#pragma once

#include <utility>
#include <vector>

#include "opfactor/basis.hpp"
#include "opfactor/geometry.hpp"
#include "opfactor/types.hpp"

namespace opfactor {

/// One color: same-level members whose supports are pairwise separated by at
/// least 2*rho*h^(k-1). Members are basis column indices (simplicial) or
/// supernode ids (supernodal), stored ascending.
struct Color {
  int level = 0;
  std::vector<int> members;
};

/// Ordered partition of the basis columns (or supernodes) into colors.
/// Colors are listed coarse to fine and induce the elimination ordering:
/// perm maps position -> basis column, pos is its inverse.
struct Coloring {
  double rho = 0.0;
  bool supernodal = false;
  std::vector<Color> colors;
  std::vector<int> colorOf;     // node id -> color index
  std::vector<Index> perm;      // position -> basis column
  std::vector<Index> pos;       // basis column -> position

  Index size() const { return static_cast<Index>(perm.size()); }
};

/// Group of same-level basis columns aggregated around a center location.
struct Supernode {
  int level = 0;
  Vector center;
  std::vector<int> members;     // basis columns, ascending
};

/// Per-level aggregation of basis columns into supernodes. Node ids are
/// level-major and, within a level, ordered by center coordinates
/// (lexicographic), which fixes all tie-breaks.
struct SupernodeSet {
  double rho = 0.0;
  std::vector<Supernode> nodes;
  std::vector<int> nodeOf;                        // basis column -> node id
  std::vector<std::pair<int, int>> levelRanges;   // per level: [begin, end) node ids

  void validate(const MultiresBasis& basis, const PartitionTree& tree) const;
};

/// Distance between two basis columns: min-pairwise distance of their support
/// cells' member points (the virtual root yields distance 0).
double basis_distance(const MultiresBasis& basis, const PartitionTree& tree, Index i, Index j);

/// Exact distance between two supernodes: min over cross pairs of member
/// basis-column distances. cap short-circuits the scan: once the running
/// minimum is <= cap the exact value below cap no longer matters and the
/// current minimum is returned.
double supernode_distance(const SupernodeSet& sn, const MultiresBasis& basis,
                          const PartitionTree& tree, int a, int b,
                          double cap = -1.0);

/// Greedy per-level coloring: open a color with the lowest uncolored index,
/// then repeatedly admit the index farthest from the color's members (lazy
/// max-heap, ties to the lowest index) while the separation constraint
/// 2*rho*h^(k-1) holds. rho = +inf yields singleton colors.
Coloring color_simplicial(const MultiresBasis& basis, const PartitionTree& tree, double rho);

/// Farthest-first center selection over the support-cell centroids of each
/// level, stopping once every centroid lies within rho*h^k of a center;
/// members join the nearest center (ties to the lowest supernode id).
SupernodeSet aggregate_supernodes(const MultiresBasis& basis, const PartitionTree& tree,
                                  double rho);

/// Greedy farthest-first coloring of supernodes under the all-pairs member
/// separation constraint.
Coloring color_supernodal(const SupernodeSet& supernodes, const MultiresBasis& basis,
                          const PartitionTree& tree, double rho);

/// Builds the trivial one-column-per-supernode set (test and reduction aid).
SupernodeSet singleton_supernodes(const MultiresBasis& basis, const PartitionTree& tree,
                                  double rho);

/// Checks the Coloring invariants against the basis/tree (and supernodes when
/// supernodal); throws on violation.
void validate_coloring(const Coloring& coloring, const MultiresBasis& basis,
                       const PartitionTree& tree, const SupernodeSet* supernodes = nullptr);

}  // namespace opfactor
