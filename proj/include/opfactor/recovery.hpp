#pragma once

#include <cstdint>
#include <vector>

#include "opfactor/basis.hpp"
#include "opfactor/coloring.hpp"
#include "opfactor/geometry.hpp"
#include "opfactor/measurement.hpp"
#include "opfactor/types.hpp"

namespace opfactor {

struct FactorProvenance {
  double rho = 0.0;
  bool supernodal = false;
  long matvecs = 0;
  /// Post-loop check of the supernodal factor: every diagonal block is lower
  /// triangular with positive diagonal, so the algorithm's final diagonal
  /// normalization has nothing left to do. Flagged (never rescaled) if not.
  bool diagConsistent = true;
};

/// Lower-triangular sparse factor in the elimination ordering induced by a
/// coloring (coarse to fine, colors contiguous). Rows and columns of L live
/// in position space; perm/pos translate to basis-column indexing. All query
/// operations below take and return basis-indexed data.
struct SparseFactor {
  Index n = 0;         // ambient dimension
  Index cols = 0;      // stored columns (< n after low-rank truncation)
  SparseMatrix L;      // n x cols
  Eigen::SparseMatrix<Scalar, Eigen::RowMajor> rowsOfL;  // CSR mirror for row access
  std::vector<Index> perm;  // position -> basis column
  std::vector<Index> pos;   // basis column -> position
  Vector diag;              // L(p,p), positive
  FactorProvenance provenance;

  bool truncated() const { return cols < n; }
  void finalize();  // builds the CSR mirror; call after touching L
};

struct RecoverOptions {
  int threads = 1;
};

/// Splits a residual vector u (basis-indexed) into one sparse column per
/// member of color c: entry (i, j) = u_i iff pos(j) <= pos(i) and j is the
/// member whose support cell is nearest to t(w_i) (ties to the lowest j).
SparseMatrix scatter_simplicial(const Vector& u, const Coloring& coloring, int colorIdx,
                                const MultiresBasis& basis, const PartitionTree& tree);

/// Block analogue keyed on supernode center distances: block row i goes to
/// the nearest color supernode (ties to the lowest id), taking its first
/// #j columns; the diagonal block is included. Input U is basis-row-indexed
/// with m_c columns; output columns are grouped per color supernode.
SparseMatrix scatter_supernodal(const Matrix& U, const Coloring& coloring, int colorIdx,
                                const SupernodeSet& supernodes, const MultiresBasis& basis,
                                const PartitionTree& tree);

/// Algorithm: per color, form the residual O(:,c) - L (L^T M(:,c)) right to
/// left, scatter it, scale each new column by the inverse square root of its
/// pivot, and append. Nonpositive pivots abort with diagnostics.
SparseFactor cholesky_recover(const ObservationSet& obs, const Coloring& coloring,
                              const MultiresBasis& basis, const PartitionTree& tree,
                              const RecoverOptions& opts = {});

/// Blocked variant: per color, residual block, block scatter, symmetrized
/// diagonal blocks factored densely, block columns normalized by the inverse
/// transposed Cholesky factor. Non-SPD diagonal blocks abort with the color,
/// supernode, and smallest eigenvalue.
SparseFactor supernodal_cholesky_recover(const ObservationSet& obs, const Coloring& coloring,
                                         const SupernodeSet& supernodes,
                                         const MultiresBasis& basis, const PartitionTree& tree,
                                         const RecoverOptions& opts = {});

/// Keeps the leading k columns (rank <= k approximation of Theta).
SparseFactor truncate_low_rank(const SparseFactor& factor, Index k);

/// L L^T x, basis-indexed.
Vector factor_matvec(const SparseFactor& factor, const Vector& x);

/// (L L^T)^{-1} b via two triangular solves; full-rank factors only.
Vector factor_solve(const SparseFactor& factor, const Vector& b);

/// (L L^T)_{ij} as a sparse dot product of two rows of L.
double entry_query(const SparseFactor& factor, Index i, Index j);

/// log det(L L^T) = 2 sum log diag(L); full-rank factors only.
double logdet(const SparseFactor& factor);

/// L z with z i.i.d. standard normal from the seeded generator; samples have
/// covariance L L^T.
Vector sample_gaussian(const SparseFactor& factor, std::uint64_t seed);

/// Returns W P^T L: the factor with its column space re-expressed in the
/// original dof basis, so that F F^T approximates A^{-1} directly.
SparseMatrix to_original_basis(const MultiresBasis& basis, const SparseFactor& factor);

}  // namespace opfactor
