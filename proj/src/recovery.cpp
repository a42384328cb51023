#include "opfactor/recovery.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <limits>

#include "opfactor/parallel.hpp"
#include "opfactor/rng.hpp"

namespace opfactor {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double coord_distance(const Vector& a, const Vector& b, Metric metric) {
  double s = 0.0;
  for (Index ax = 0; ax < a.size(); ++ax) {
    double d = std::abs(a(ax) - b(ax));
    if (metric == Metric::periodic) d = std::min(d, 1.0 - d);
    s += d * d;
  }
  return std::sqrt(s);
}

// Shared engine for both recovery modes. Nodes are contiguous position
// blocks (single columns in the simplicial case, supernodes otherwise),
// listed in position order. targetSlot(node, color) returns the member slot
// the node's residual rows scatter to, or -1.
struct EngineLayout {
  std::vector<Index> nodeBegin;             // per node: first position
  std::vector<int> nodeSize;                // per node: block width
  std::vector<std::vector<int>> colorNodes; // per color: node ids, ascending
  std::vector<int> colorLevel;              // per color (diagnostics)
  std::vector<Index> nodeLabel;             // per node: reporting id (basis column / supernode)
};

SparseFactor run_recovery(const ObservationSet& obs, const Coloring& coloring,
                          const EngineLayout& layout,
                          const std::function<int(int, int)>& targetSlot, bool supernodal,
                          int threads) {
  const Index n = static_cast<Index>(coloring.perm.size());
  if (obs.O.rows() != n || obs.M.rows() != n)
    throw Error("recover: observations do not match the coloring dimension");
  if (obs.colOffsets.size() != coloring.colors.size() + 1)
    throw Error("recover: observation column layout does not match the coloring");

  const double pivotFloor = 1e-14 * obs.O.cwiseAbs().maxCoeff();
  const int numNodes = static_cast<int>(layout.nodeBegin.size());

  // Column store (sorted rows) and append-only row store of placed entries.
  std::vector<std::vector<std::pair<Index, double>>> colData(n);
  std::vector<std::vector<std::pair<Index, double>>> rowData(n);

  Index placed = 0;

  for (int c = 0; c < static_cast<int>(coloring.colors.size()); ++c) {
    const auto& nodes = layout.colorNodes[c];
    const Index c0 = obs.colOffsets[c];
    const Index c1 = obs.colOffsets[c + 1];
    const Index m = c1 - c0;
    const Index startPos = layout.nodeBegin[nodes.front()];
    if (startPos != placed)
      throw Error("recover: color " + std::to_string(c) + " is not contiguous in the ordering");
    const Index rows = n - startPos;

    // Residual block R = O(:,c) - L (L^T M(:,c)) on the trailing rows,
    // evaluated right to left through the row/column stores.
    Matrix R(rows, m);
    parallel_for(m, threads, [&](long jm) {
      const Index col = c0 + jm;
      std::vector<double> w(placed, 0.0);
      std::vector<Index> touched;
      for (SparseMatrix::InnerIterator it(obs.M, col); it; ++it) {
        const Index pb = coloring.pos[it.row()];
        for (const auto& [cp, v] : rowData[pb]) {
          if (w[cp] == 0.0) touched.push_back(cp);
          w[cp] += v;
        }
      }
      std::sort(touched.begin(), touched.end());
      for (Index r = 0; r < rows; ++r) R(r, jm) = obs.O(coloring.perm[startPos + r], col);
      for (Index cp : touched) {
        const double wv = w[cp];
        if (wv == 0.0) continue;
        const auto& column = colData[cp];
        auto it = std::lower_bound(column.begin(), column.end(), startPos,
                                   [](const auto& e, Index p) { return e.first < p; });
        for (; it != column.end(); ++it) R(it->first - startPos, jm) -= it->second * wv;
      }
    });

    // Scatter targets for every node at or past the color start.
    int firstNode = 0;
    while (layout.nodeBegin[firstNode] < startPos) ++firstNode;
    std::vector<int> slotOf(numNodes - firstNode, -1);
    parallel_for(numNodes - firstNode, threads,
                 [&](long t) { slotOf[t] = targetSlot(firstNode + static_cast<int>(t), c); });

    // Per target: dense diagonal block factorization, then normalize and
    // append the block column. Targets own disjoint columns.
    struct Fail {
      bool set = false;
      std::string msg;
      int color = 0;
      long index = 0;
      double value = 0.0;
    };
    std::vector<Fail> failure(nodes.size());
    parallel_for(static_cast<long>(nodes.size()), threads, [&](long t) {
      try {
        const int target = nodes[t];
        const int s = layout.nodeSize[target];
        const Index tBegin = layout.nodeBegin[target];

        Matrix D = R.block(tBegin - startPos, 0, s, s);
        D = ((D + D.transpose()) * 0.5).eval();
        Matrix G(s, s);
        if (s == 1) {
          const double pivot = D(0, 0);
          if (!(pivot > pivotFloor)) {
            throw SpdViolation(
                "recover: nonpositive pivot " + std::to_string(pivot) + " at color " +
                    std::to_string(c) + ", index " +
                    std::to_string(layout.nodeLabel[target]) +
                    " (floor " + std::to_string(pivotFloor) + "); increase rho",
                c, layout.nodeLabel[target], pivot);
          }
          G(0, 0) = std::sqrt(pivot);
        } else {
          Eigen::LLT<Matrix> llt(D);
          if (llt.info() != Eigen::Success) {
            Eigen::SelfAdjointEigenSolver<Matrix> eig(D);
            const double minEig = eig.eigenvalues().minCoeff();
            throw SpdViolation(
                "recover: diagonal block not SPD at color " + std::to_string(c) +
                    ", supernode " + std::to_string(layout.nodeLabel[target]) +
                    " (smallest eigenvalue " + std::to_string(minEig) + "); increase rho",
                c, layout.nodeLabel[target], minEig);
          }
          G = llt.matrixL();
        }

        // Contributing nodes in ascending position order.
        for (int node = firstNode; node < numNodes; ++node) {
          if (slotOf[node - firstNode] != static_cast<int>(t)) continue;
          const Index rBegin = layout.nodeBegin[node];
          if (rBegin < tBegin) continue;  // target not earlier in the ordering
          const int rSize = layout.nodeSize[node];
          Matrix X;
          if (node == target) {
            X = G;  // the diagonal block of the factor is the Cholesky factor itself
          } else {
            X = R.block(rBegin - startPos, 0, rSize, s);
            G.transpose().triangularView<Eigen::Upper>().template solveInPlace<Eigen::OnTheRight>(
                X);
          }
          for (int cc = 0; cc < s; ++cc) {
            auto& column = colData[tBegin + cc];
            for (int rr = 0; rr < rSize; ++rr) {
              const double v = X(rr, cc);
              if (v == 0.0 && rBegin + rr != tBegin + cc) continue;
              if (node == target && rr < cc) continue;  // strictly lower block
              column.emplace_back(rBegin + rr, v);
            }
          }
        }
      } catch (const SpdViolation& e) {
        failure[t] = {true, e.what(), e.color, e.index, e.value};
      } catch (const std::exception& e) {
        failure[t] = {true, std::string("recover: ") + e.what(), c, -1, 0.0};
      }
    });
    for (const auto& f : failure)
      if (f.set) throw SpdViolation(f.msg, f.color, f.index, f.value);

    // Mirror the new entries into the row store (sequential, keeps order).
    for (int t = 0; t < static_cast<int>(nodes.size()); ++t) {
      const int target = nodes[t];
      const Index tBegin = layout.nodeBegin[target];
      for (int cc = 0; cc < layout.nodeSize[target]; ++cc)
        for (const auto& [r, v] : colData[tBegin + cc]) rowData[r].emplace_back(tBegin + cc, v);
      placed += layout.nodeSize[target];
    }
  }

  SparseFactor factor;
  factor.n = n;
  factor.cols = n;
  factor.perm = coloring.perm;
  factor.pos = coloring.pos;
  factor.provenance.rho = coloring.rho;
  factor.provenance.supernodal = supernodal;
  factor.provenance.matvecs = obs.matvecs;
  factor.diag.setConstant(n, std::numeric_limits<double>::quiet_NaN());

  std::vector<Triplet> triplets;
  size_t nnz = 0;
  for (const auto& column : colData) nnz += column.size();
  triplets.reserve(nnz);
  bool diagOk = true;
  for (Index p = 0; p < n; ++p) {
    const auto& column = colData[p];
    if (column.empty() || column.front().first != p || !(column.front().second > 0.0))
      diagOk = false;
    else
      factor.diag(p) = column.front().second;
    for (const auto& [r, v] : column) triplets.emplace_back(r, p, v);
  }
  factor.provenance.diagConsistent = diagOk;
  if (!diagOk)
    std::cerr << "recover: warning: factor diagonal blocks are not normalized lower-triangular"
              << std::endl;
  factor.L.resize(n, n);
  factor.L.setFromTriplets(triplets.begin(), triplets.end());
  factor.L.makeCompressed();
  factor.finalize();
  return factor;
}

// Slot of the nearest color member by support-cell distance (ties to the
// lowest basis index; members are stored ascending).
int simplicial_target(const MultiresBasis& basis, const PartitionTree& tree,
                      const Coloring& coloring, int colorIdx, Index basisCol) {
  const auto& members = coloring.colors[colorIdx].members;
  int best = -1;
  double bestD = kInf;
  for (int t = 0; t < static_cast<int>(members.size()); ++t) {
    const double d = basis_distance(basis, tree, basisCol, members[t]);
    if (d < bestD) {
      bestD = d;
      best = t;
    }
  }
  return best;
}

// Slot of the nearest color supernode by center distance (ties to the lowest
// supernode id; members are stored ascending).
int supernodal_target(const SupernodeSet& supernodes, Metric metric, const Coloring& coloring,
                      int colorIdx, int nodeId) {
  const auto& members = coloring.colors[colorIdx].members;
  int best = -1;
  double bestD = kInf;
  for (int t = 0; t < static_cast<int>(members.size()); ++t) {
    const double d = coord_distance(supernodes.nodes[nodeId].center,
                                    supernodes.nodes[members[t]].center, metric);
    if (d < bestD) {
      bestD = d;
      best = t;
    }
  }
  return best;
}

}  // namespace

void SparseFactor::finalize() {
  rowsOfL = Eigen::SparseMatrix<Scalar, Eigen::RowMajor>(L);
}

SparseMatrix scatter_simplicial(const Vector& u, const Coloring& coloring, int colorIdx,
                                const MultiresBasis& basis, const PartitionTree& tree) {
  if (coloring.supernodal) throw Error("scatter_simplicial: coloring is supernodal");
  if (colorIdx < 0 || colorIdx >= static_cast<int>(coloring.colors.size()))
    throw Error("scatter_simplicial: color index out of range");
  const auto& members = coloring.colors[colorIdx].members;
  const Index n = coloring.size();
  if (u.size() != n) throw Error("scatter_simplicial: vector size mismatch");

  std::vector<Triplet> triplets;
  for (Index i = 0; i < n; ++i) {
    const int t = simplicial_target(basis, tree, coloring, colorIdx, i);
    if (t < 0) continue;
    if (coloring.pos[members[t]] > coloring.pos[i]) continue;  // needs j before i
    triplets.emplace_back(i, t, u(i));
  }
  SparseMatrix S(n, static_cast<Index>(members.size()));
  S.setFromTriplets(triplets.begin(), triplets.end());
  return S;
}

SparseMatrix scatter_supernodal(const Matrix& U, const Coloring& coloring, int colorIdx,
                                const SupernodeSet& supernodes, const MultiresBasis& basis,
                                const PartitionTree& tree) {
  if (!coloring.supernodal) throw Error("scatter_supernodal: coloring is not supernodal");
  if (colorIdx < 0 || colorIdx >= static_cast<int>(coloring.colors.size()))
    throw Error("scatter_supernodal: color index out of range");
  const auto& members = coloring.colors[colorIdx].members;
  const Index n = static_cast<Index>(coloring.pos.size());
  if (U.rows() != n) throw Error("scatter_supernodal: row count mismatch");
  const Metric metric = tree.metric();

  std::vector<Index> colBase(members.size() + 1, 0);
  for (size_t t = 0; t < members.size(); ++t)
    colBase[t + 1] =
        colBase[t] + static_cast<Index>(supernodes.nodes[members[t]].members.size());

  std::vector<Triplet> triplets;
  for (int node = 0; node < static_cast<int>(supernodes.nodes.size()); ++node) {
    const int t = supernodal_target(supernodes, metric, coloring, colorIdx, node);
    if (t < 0) continue;
    const int target = members[t];
    // Target block must not come later in the ordering than the node block.
    const Index nodePos = coloring.pos[supernodes.nodes[node].members.front()];
    const Index targetPos = coloring.pos[supernodes.nodes[target].members.front()];
    if (targetPos > nodePos) continue;
    const Index sj = static_cast<Index>(supernodes.nodes[target].members.size());
    if (U.cols() < sj) throw Error("scatter_supernodal: block has too few columns");
    for (int rr = 0; rr < static_cast<int>(supernodes.nodes[node].members.size()); ++rr) {
      const Index row = supernodes.nodes[node].members[rr];
      for (Index cc = 0; cc < sj; ++cc) triplets.emplace_back(row, colBase[t] + cc, U(row, cc));
    }
  }
  SparseMatrix S(n, colBase.back());
  S.setFromTriplets(triplets.begin(), triplets.end());
  return S;
}

SparseFactor cholesky_recover(const ObservationSet& obs, const Coloring& coloring,
                              const MultiresBasis& basis, const PartitionTree& tree,
                              const RecoverOptions& opts) {
  if (coloring.supernodal)
    throw Error("cholesky_recover: got a supernodal coloring; use supernodal_cholesky_recover");
  const Index n = coloring.size();

  EngineLayout layout;
  layout.nodeBegin.resize(n);
  layout.nodeSize.assign(n, 1);
  layout.nodeLabel.resize(n);
  for (Index p = 0; p < n; ++p) {
    layout.nodeBegin[p] = p;
    layout.nodeLabel[p] = coloring.perm[p];
  }
  layout.colorNodes.resize(coloring.colors.size());
  layout.colorLevel.resize(coloring.colors.size());
  for (size_t c = 0; c < coloring.colors.size(); ++c) {
    layout.colorLevel[c] = coloring.colors[c].level;
    for (int member : coloring.colors[c].members)
      layout.colorNodes[c].push_back(static_cast<int>(coloring.pos[member]));
  }

  auto target = [&](int node, int colorIdx) {
    return simplicial_target(basis, tree, coloring, colorIdx, coloring.perm[node]);
  };
  return run_recovery(obs, coloring, layout, target, /*supernodal=*/false, opts.threads);
}

SparseFactor supernodal_cholesky_recover(const ObservationSet& obs, const Coloring& coloring,
                                         const SupernodeSet& supernodes,
                                         const MultiresBasis& basis, const PartitionTree& tree,
                                         const RecoverOptions& opts) {
  if (!coloring.supernodal)
    throw Error("supernodal_cholesky_recover: coloring is not supernodal");
  const Metric metric = tree.metric();

  // Engine nodes in position order; nodeLabel maps back to supernode ids.
  EngineLayout layout;
  layout.colorNodes.resize(coloring.colors.size());
  layout.colorLevel.resize(coloring.colors.size());
  Index posCursor = 0;
  for (size_t c = 0; c < coloring.colors.size(); ++c) {
    layout.colorLevel[c] = coloring.colors[c].level;
    for (int nodeId : coloring.colors[c].members) {
      layout.colorNodes[c].push_back(static_cast<int>(layout.nodeBegin.size()));
      layout.nodeBegin.push_back(posCursor);
      layout.nodeSize.push_back(static_cast<int>(supernodes.nodes[nodeId].members.size()));
      layout.nodeLabel.push_back(nodeId);
      posCursor += layout.nodeSize.back();
    }
  }
  if (posCursor != static_cast<Index>(coloring.perm.size()))
    throw Error("supernodal_cholesky_recover: supernodes do not tile the ordering");

  auto target = [&](int engineIdx, int colorIdx) {
    return supernodal_target(supernodes, metric, coloring, colorIdx,
                             static_cast<int>(layout.nodeLabel[engineIdx]));
  };
  return run_recovery(obs, coloring, layout, target, /*supernodal=*/true, opts.threads);
}

SparseFactor truncate_low_rank(const SparseFactor& factor, Index k) {
  if (k < 0 || k > factor.cols)
    throw Error("truncate_low_rank: prefix " + std::to_string(k) + " out of range");
  SparseFactor out;
  out.n = factor.n;
  out.cols = k;
  out.perm = factor.perm;
  out.pos = factor.pos;
  out.provenance = factor.provenance;
  out.diag = factor.diag.head(k);
  out.L = factor.L.leftCols(k);
  out.L.makeCompressed();
  out.finalize();
  return out;
}

Vector factor_matvec(const SparseFactor& factor, const Vector& x) {
  if (x.size() != factor.n) throw Error("factor_matvec: size mismatch");
  Vector xp(factor.n);
  for (Index p = 0; p < factor.n; ++p) xp(p) = x(factor.perm[p]);
  const Vector yp = factor.L * (factor.L.transpose() * xp);
  Vector y(factor.n);
  for (Index p = 0; p < factor.n; ++p) y(factor.perm[p]) = yp(p);
  return y;
}

Vector factor_solve(const SparseFactor& factor, const Vector& b) {
  if (factor.truncated()) throw Error("factor_solve: factor is rank-truncated");
  if (b.size() != factor.n) throw Error("factor_solve: size mismatch");
  Vector bp(factor.n);
  for (Index p = 0; p < factor.n; ++p) bp(p) = b(factor.perm[p]);
  Vector y = factor.L.triangularView<Eigen::Lower>().solve(bp);
  factor.L.transpose().triangularView<Eigen::Upper>().solveInPlace(y);
  Vector x(factor.n);
  for (Index p = 0; p < factor.n; ++p) x(factor.perm[p]) = y(p);
  return x;
}

double entry_query(const SparseFactor& factor, Index i, Index j) {
  if (i < 0 || i >= factor.n || j < 0 || j >= factor.n)
    throw Error("entry_query: index out of range");
  using RowIt = Eigen::SparseMatrix<Scalar, Eigen::RowMajor>::InnerIterator;
  RowIt a(factor.rowsOfL, factor.pos[i]);
  RowIt b(factor.rowsOfL, factor.pos[j]);
  double sum = 0.0;
  while (a && b) {
    if (a.col() < b.col())
      ++a;
    else if (b.col() < a.col())
      ++b;
    else {
      sum += a.value() * b.value();
      ++a;
      ++b;
    }
  }
  return sum;
}

double logdet(const SparseFactor& factor) {
  if (factor.truncated()) throw Error("logdet: factor is rank-truncated");
  double s = 0.0;
  for (Index p = 0; p < factor.cols; ++p) s += std::log(factor.diag(p));
  return 2.0 * s;
}

Vector sample_gaussian(const SparseFactor& factor, std::uint64_t seed) {
  Rng rng(seed);
  Vector z(factor.cols);
  for (Index i = 0; i < factor.cols; ++i) z(i) = rng.normal();
  const Vector yp = factor.L * z;
  Vector y(factor.n);
  for (Index p = 0; p < factor.n; ++p) y(factor.perm[p]) = yp(p);
  return y;
}

SparseMatrix to_original_basis(const MultiresBasis& basis, const SparseFactor& factor) {
  if (basis.n != factor.n) throw Error("to_original_basis: dimension mismatch");
  // Un-permute rows of L back to basis indexing, then push through W.
  std::vector<Triplet> triplets;
  triplets.reserve(factor.L.nonZeros());
  for (Index p = 0; p < factor.cols; ++p)
    for (SparseMatrix::InnerIterator it(factor.L, p); it; ++it)
      triplets.emplace_back(factor.perm[it.row()], p, it.value());
  SparseMatrix Lb(factor.n, factor.cols);
  Lb.setFromTriplets(triplets.begin(), triplets.end());
  SparseMatrix F = basis.W * Lb;
  F.makeCompressed();
  return F;
}

}  // namespace opfactor
