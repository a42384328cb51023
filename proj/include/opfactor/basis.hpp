#pragma once

#include <vector>

#include "opfactor/geometry.hpp"
#include "opfactor/types.hpp"

namespace opfactor {

/// Orthonormal multiresolution basis W, columns ordered coarse to fine.
/// Column i on level k is supported inside one level-(k-1) cell (its
/// supportCell; the virtual root for k = 1) and, for k >= 2, has zero mean
/// over every level-(k-1) cell.
struct MultiresBasis {
  Index n = 0;                       // ambient dimension; W is n x n
  SparseMatrix W;                    // columns are the basis vectors
  std::vector<int> level;            // per column, 1..q
  std::vector<int> supportCell;      // per column: cell id in tau^(level-1), -1 for the root
  std::vector<Index> levelOffsets;   // q+1 entries; columns of level k are [off[k-1], off[k])

  int levels() const { return static_cast<int>(levelOffsets.size()) - 1; }
  int support_level(Index col) const { return level[col] - 1; }
  /// Checks orthonormality, completeness, locality, and the mean-zero
  /// property; throws on violation.
  void validate(const PartitionTree& tree) const;
};

/// Haar-type construction: per parent cell, a local orthonormalization of the
/// child indicator vectors against the parent constant (the parent constant
/// itself is kept on level 1, where the complement is taken against {0}).
/// Requires singleton leaf cells so that the basis is square.
MultiresBasis build_haar_basis(const PartitionTree& tree);

/// W v: coefficients to nodal values.
Vector apply_basis(const MultiresBasis& basis, const Vector& v);

/// W^T u: nodal values to coefficients.
Vector apply_basis_transpose(const MultiresBasis& basis, const Vector& u);

}  // namespace opfactor
