#include "opfactor/basis.hpp"

#include <cmath>
#include <vector>

namespace opfactor {

namespace {

// Appends the orthonormalized complement columns for one parent cell.
// Children are processed in ascending cell id; modified Gram-Schmidt against
// the (normalized) parent indicator and previously accepted columns. Exactly
// one child vector per parent becomes linearly dependent and is dropped
// (none on level 1, where the parent constant is not removed).
void emit_parent_block(const PartitionTree& tree, int k, const Cell& parent,
                       std::vector<int>& localOf, std::vector<Triplet>& triplets,
                       std::vector<int>& level, std::vector<int>& supportCell, Index& col) {
  const auto& children = parent.children;
  const int m = static_cast<int>(children.size());
  if (m == 0) return;

  // Local coordinates: rows indexed by position inside parent.members.
  const auto& pm = parent.members;
  for (int r = 0; r < static_cast<int>(pm.size()); ++r) localOf[pm[r]] = r;

  std::vector<Vector> accepted;
  if (k >= 2) {
    Vector p = Vector::Zero(pm.size());
    for (int r = 0; r < static_cast<int>(pm.size()); ++r) p(r) = 1.0;
    p /= p.norm();
    accepted.push_back(p);
  }
  const int keepFrom = k >= 2 ? 1 : 0;  // accepted[0] is the parent constant, not emitted

  for (int cidx = 0; cidx < m; ++cidx) {
    const Cell& child = tree.cell(k, children[cidx]);
    Vector u = Vector::Zero(pm.size());
    for (int mem : child.members) u(localOf[mem]) = 1.0;
    u /= u.norm();
    for (const auto& a : accepted) u -= a.dot(u) * a;
    const double nrm = u.norm();
    if (nrm <= 1e-8) continue;  // dependent direction
    u /= nrm;
    accepted.push_back(u);
  }

  for (int j = keepFrom; j < static_cast<int>(accepted.size()); ++j) {
    const Vector& w = accepted[j];
    for (int r = 0; r < static_cast<int>(pm.size()); ++r)
      if (w(r) != 0.0) triplets.emplace_back(pm[r], col, w(r));
    level.push_back(k);
    supportCell.push_back(parent.level == 0 ? -1 : parent.id);
    ++col;
  }
  for (int mem : pm) localOf[mem] = -1;
}

}  // namespace

MultiresBasis build_haar_basis(const PartitionTree& tree) {
  const Index N = tree.points.size();
  for (const auto& leaf : tree.levels[tree.q - 1])
    if (leaf.members.size() != 1)
      throw Error("build_haar_basis: leaf cells must be singletons (level-" +
                  std::to_string(tree.q) + " cell " + std::to_string(leaf.id) + " has " +
                  std::to_string(leaf.members.size()) + " members)");

  MultiresBasis basis;
  basis.n = N;
  basis.levelOffsets.assign(tree.q + 1, 0);

  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<size_t>(N) * (tree.q + 1));
  std::vector<int> localOf(N, -1);
  Index col = 0;
  for (int k = 1; k <= tree.q; ++k) {
    basis.levelOffsets[k - 1] = col;
    if (k == 1) {
      emit_parent_block(tree, k, tree.root, localOf, triplets, basis.level, basis.supportCell,
                        col);
    } else {
      for (const auto& parent : tree.levels[k - 2])
        emit_parent_block(tree, k, parent, localOf, triplets, basis.level, basis.supportCell,
                          col);
    }
  }
  basis.levelOffsets[tree.q] = col;
  if (col != N)
    throw Error("build_haar_basis: produced " + std::to_string(col) + " columns for N = " +
                std::to_string(N));

  basis.W.resize(N, N);
  basis.W.setFromTriplets(triplets.begin(), triplets.end());
  basis.W.makeCompressed();
  return basis;
}

Vector apply_basis(const MultiresBasis& basis, const Vector& v) {
  if (v.size() != basis.n)
    throw Error("apply_basis: coefficient vector has size " + std::to_string(v.size()) +
                ", expected " + std::to_string(basis.n));
  return basis.W * v;
}

Vector apply_basis_transpose(const MultiresBasis& basis, const Vector& u) {
  if (u.size() != basis.n)
    throw Error("apply_basis_transpose: vector has size " + std::to_string(u.size()) +
                ", expected " + std::to_string(basis.n));
  return basis.W.transpose() * u;
}

void MultiresBasis::validate(const PartitionTree& tree) const {
  if (static_cast<Index>(level.size()) != n || W.cols() != n || W.rows() != n)
    throw Error("MultiresBasis: not square / metadata size mismatch");

  // Orthonormality: W^T W = I entrywise to 1e-12.
  SparseMatrix gram = SparseMatrix(W.transpose()) * W;
  for (int j = 0; j < gram.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(gram, j); it; ++it) {
      const double expect = it.row() == it.col() ? 1.0 : 0.0;
      if (std::abs(it.value() - expect) > 1e-12)
        throw Error("MultiresBasis: orthonormality violated at (" + std::to_string(it.row()) +
                    "," + std::to_string(it.col()) + "), value " + std::to_string(it.value()));
    }

  for (Index j = 0; j < n; ++j) {
    const int k = level[j];
    // Locality: nonzeros inside the support cell's member set.
    std::vector<char> inCell(n, 0);
    const Cell& sc = supportCell[j] < 0 ? tree.root : tree.cell(k - 1, supportCell[j]);
    for (int m : sc.members) inCell[m] = 1;
    for (SparseMatrix::InnerIterator it(W, j); it; ++it)
      if (!inCell[it.row()])
        throw Error("MultiresBasis: column " + std::to_string(j) +
                    " has support outside its cell");
    // Mean zero over every level-(k-1) cell for k >= 2.
    if (k >= 2) {
      Vector dense = Vector::Zero(n);
      for (SparseMatrix::InnerIterator it(W, j); it; ++it) dense(it.row()) = it.value();
      for (const auto& cell : tree.levels[k - 2]) {
        double s = 0.0;
        for (int m : cell.members) s += dense(m);
        if (std::abs(s) > 1e-12)
          throw Error("MultiresBasis: column " + std::to_string(j) +
                      " not mean-zero over level-" + std::to_string(k - 1) + " cell " +
                      std::to_string(cell.id));
      }
    }
  }
}

}  // namespace opfactor
