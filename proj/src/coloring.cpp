#include "opfactor/coloring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

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

struct HeapEntry {
  double key;
  int node;
  bool operator<(const HeapEntry& o) const {
    if (key != o.key) return key < o.key;
    return node > o.node;  // lower index wins ties
  }
};

// Greedy farthest-first coloring of the nodes [0, n) of one level. The
// distance functor takes (a, b, cap) and must return the exact distance
// whenever it is below cap; values >= cap may be reported as any number
// >= cap (lets callers prune with cheap lower bounds without altering the
// result). Returns colors in creation order, members in admission order.
std::vector<std::vector<int>> greedy_level_coloring(
    int n, double threshold, const std::function<double(int, int, double)>& distance) {
  std::vector<std::vector<int>> colors;
  std::vector<char> colored(n, 0);
  int remaining = n;
  int scanFrom = 0;
  while (remaining > 0) {
    while (colored[scanFrom]) ++scanFrom;
    const int seed = scanFrom;
    colors.emplace_back();
    auto& color = colors.back();
    color.push_back(seed);
    colored[seed] = 1;
    --remaining;
    if (remaining == 0) break;

    std::vector<double> dist(n, kInf);
    std::priority_queue<HeapEntry> heap;
    for (int i = 0; i < n; ++i) {
      if (colored[i]) continue;
      dist[i] = distance(i, seed, kInf);
      heap.push({dist[i], i});
    }
    while (!heap.empty()) {
      const HeapEntry top = heap.top();
      heap.pop();
      if (colored[top.node] || top.key != dist[top.node]) continue;  // stale
      if (top.key < threshold) break;  // farthest candidate already below the bound
      const int added = top.node;
      color.push_back(added);
      colored[added] = 1;
      --remaining;
      if (remaining == 0) break;
      for (int i = 0; i < n; ++i) {
        if (colored[i]) continue;
        const double d = distance(i, added, dist[i]);
        if (d < dist[i]) {
          dist[i] = d;
          heap.push({d, i});
        }
      }
    }
  }
  return colors;
}

}  // namespace

double basis_distance(const MultiresBasis& basis, const PartitionTree& tree, Index i, Index j) {
  const int li = basis.level[i] - 1;
  const int lj = basis.level[j] - 1;
  const int ci = basis.supportCell[i];
  const int cj = basis.supportCell[j];
  if (ci < 0 || cj < 0) return 0.0;  // virtual root overlaps everything
  return cell_distance(tree, li, ci, lj, cj, tree.metric());
}

double supernode_distance(const SupernodeSet& sn, const MultiresBasis& basis,
                          const PartitionTree& tree, int a, int b, double cap) {
  const auto& A = sn.nodes[a];
  const auto& B = sn.nodes[b];
  double best = kInf;
  for (int i : A.members) {
    for (int j : B.members) {
      best = std::min(best, basis_distance(basis, tree, i, j));
      if (cap >= 0.0 && best <= cap) return best;
    }
  }
  return best;
}

Coloring color_simplicial(const MultiresBasis& basis, const PartitionTree& tree, double rho) {
  if (!(rho > 0.0)) throw Error("color_simplicial: rho must be positive");
  Coloring out;
  out.rho = rho;
  out.supernodal = false;
  out.colorOf.assign(basis.n, -1);

  for (int k = 1; k <= basis.levels(); ++k) {
    const Index off = basis.levelOffsets[k - 1];
    const int nk = static_cast<int>(basis.levelOffsets[k] - off);
    if (nk == 0) continue;
    const double threshold = 2.0 * rho * std::pow(tree.h, k - 1);
    auto dist = [&](int a, int b, double) {
      return basis_distance(basis, tree, off + a, off + b);
    };
    auto levelColors = greedy_level_coloring(nk, threshold, dist);
    for (auto& members : levelColors) {
      Color c;
      c.level = k;
      for (int m : members) c.members.push_back(static_cast<int>(off) + m);
      std::sort(c.members.begin(), c.members.end());
      const int colorIdx = static_cast<int>(out.colors.size());
      for (int m : c.members) out.colorOf[m] = colorIdx;
      out.colors.push_back(std::move(c));
    }
  }

  out.perm.reserve(basis.n);
  out.pos.assign(basis.n, -1);
  for (const auto& c : out.colors)
    for (int m : c.members) {
      out.pos[m] = static_cast<Index>(out.perm.size());
      out.perm.push_back(m);
    }
  return out;
}

SupernodeSet aggregate_supernodes(const MultiresBasis& basis, const PartitionTree& tree,
                                  double rho) {
  if (!(rho > 0.0)) throw Error("aggregate_supernodes: rho must be positive");
  const Metric metric = tree.metric();
  SupernodeSet out;
  out.rho = rho;
  out.nodeOf.assign(basis.n, -1);
  out.levelRanges.resize(basis.levels());

  for (int k = 1; k <= basis.levels(); ++k) {
    const Index off = basis.levelOffsets[k - 1];
    const int nk = static_cast<int>(basis.levelOffsets[k] - off);
    out.levelRanges[k - 1] = {static_cast<int>(out.nodes.size()),
                              static_cast<int>(out.nodes.size())};
    if (nk == 0) continue;

    std::vector<Vector> z(nk);
    for (int i = 0; i < nk; ++i) {
      const Index col = off + i;
      const Cell& sc = basis.supportCell[col] < 0
                           ? tree.root
                           : tree.cell(basis.level[col] - 1, basis.supportCell[col]);
      z[i] = sc.centroid;
    }

    // Farthest-first insertion over the centroids until the covering radius
    // drops to rho*h^k. Separation between accepted centers exceeds the
    // covering target by construction.
    const double target = rho * std::pow(tree.h, k);
    std::vector<int> centers;
    std::vector<double> dist(nk, kInf);
    int next = 0;
    while (true) {
      centers.push_back(next);
      double cover = 0.0;
      int far = -1;
      for (int i = 0; i < nk; ++i) {
        dist[i] = std::min(dist[i], coord_distance(z[i], z[next], metric));
        if (dist[i] > cover) {
          cover = dist[i];
          far = i;
        }
      }
      if (cover <= target || far < 0) break;
      next = far;
    }

    // Order supernodes by center coordinates; all tie-breaks below use this id.
    std::sort(centers.begin(), centers.end(), [&](int a, int b) {
      for (Index ax = 0; ax < z[a].size(); ++ax) {
        if (z[a](ax) != z[b](ax)) return z[a](ax) < z[b](ax);
      }
      return a < b;
    });

    const int base = static_cast<int>(out.nodes.size());
    for (int c = 0; c < static_cast<int>(centers.size()); ++c) {
      Supernode node;
      node.level = k;
      node.center = z[centers[c]];
      out.nodes.push_back(std::move(node));
    }
    for (int i = 0; i < nk; ++i) {
      int best = 0;
      double bestD = kInf;
      for (int c = 0; c < static_cast<int>(centers.size()); ++c) {
        const double d = coord_distance(z[i], z[centers[c]], metric);
        if (d < bestD) {
          bestD = d;
          best = c;
        }
      }
      out.nodes[base + best].members.push_back(static_cast<int>(off) + i);
      out.nodeOf[off + i] = base + best;
    }
    // Drop empty supernodes (possible when duplicated centroids tie).
    int write = base;
    for (int c = base; c < static_cast<int>(out.nodes.size()); ++c) {
      if (out.nodes[c].members.empty()) continue;
      if (write != c) out.nodes[write] = std::move(out.nodes[c]);
      write = write + 1;
    }
    out.nodes.resize(write);
    for (int c = base; c < write; ++c)
      for (int m : out.nodes[c].members) out.nodeOf[m] = c;
    out.levelRanges[k - 1] = {base, write};
  }
  return out;
}

SupernodeSet singleton_supernodes(const MultiresBasis& basis, const PartitionTree& tree,
                                  double rho) {
  SupernodeSet out;
  out.rho = rho;
  out.nodeOf.resize(basis.n);
  out.levelRanges.resize(basis.levels());
  for (int k = 1; k <= basis.levels(); ++k) {
    const int base = static_cast<int>(out.nodes.size());
    for (Index col = basis.levelOffsets[k - 1]; col < basis.levelOffsets[k]; ++col) {
      Supernode node;
      node.level = k;
      const Cell& sc = basis.supportCell[col] < 0
                           ? tree.root
                           : tree.cell(k - 1, basis.supportCell[col]);
      node.center = sc.centroid;
      node.members.push_back(static_cast<int>(col));
      out.nodeOf[col] = static_cast<int>(out.nodes.size());
      out.nodes.push_back(std::move(node));
    }
    out.levelRanges[k - 1] = {base, static_cast<int>(out.nodes.size())};
  }
  return out;
}

Coloring color_supernodal(const SupernodeSet& supernodes, const MultiresBasis& basis,
                          const PartitionTree& tree, double rho) {
  if (!(rho > 0.0)) throw Error("color_supernodal: rho must be positive");
  const Metric metric = tree.metric();
  Coloring out;
  out.rho = rho;
  out.supernodal = true;
  out.colorOf.assign(supernodes.nodes.size(), -1);

  // Pruning radius per node: center-to-farthest-support-point reach, so that
  // dist(a,b) >= centerDist - reach[a] - reach[b].
  std::vector<double> reach(supernodes.nodes.size(), 0.0);
  for (size_t s = 0; s < supernodes.nodes.size(); ++s) {
    const auto& node = supernodes.nodes[s];
    double r = 0.0;
    for (int col : node.members) {
      const int lv = basis.level[col] - 1;
      const int sc = basis.supportCell[col];
      if (sc < 0) {
        r = kInf;  // root support: no useful bound
        break;
      }
      const Cell& cell = tree.cell(lv, sc);
      r = std::max(r, coord_distance(node.center, cell.centroid, metric) +
                          cell_spread(tree, lv, sc, metric));
    }
    reach[s] = r;
  }

  for (int k = 1; k <= basis.levels(); ++k) {
    const auto [begin, end] = supernodes.levelRanges[k - 1];
    const int nk = end - begin;
    if (nk == 0) continue;
    const double threshold = 2.0 * rho * std::pow(tree.h, k - 1);
    auto dist = [&](int a, int b, double cap) {
      const int na = begin + a;
      const int nb = begin + b;
      const double lower = coord_distance(supernodes.nodes[na].center,
                                          supernodes.nodes[nb].center, metric) -
                           reach[na] - reach[nb];
      if (lower >= cap) return lower;  // cannot matter below cap
      return supernode_distance(supernodes, basis, tree, na, nb, 0.0);
    };
    auto levelColors = greedy_level_coloring(nk, threshold, dist);
    for (auto& members : levelColors) {
      Color c;
      c.level = k;
      for (int m : members) c.members.push_back(begin + m);
      std::sort(c.members.begin(), c.members.end());
      const int colorIdx = static_cast<int>(out.colors.size());
      for (int m : c.members) out.colorOf[m] = colorIdx;
      out.colors.push_back(std::move(c));
    }
  }

  out.perm.reserve(basis.n);
  out.pos.assign(basis.n, -1);
  for (const auto& c : out.colors)
    for (int nodeId : c.members)
      for (int col : supernodes.nodes[nodeId].members) {
        out.pos[col] = static_cast<Index>(out.perm.size());
        out.perm.push_back(col);
      }
  return out;
}

void SupernodeSet::validate(const MultiresBasis& basis, const PartitionTree& tree) const {
  const Metric metric = tree.metric();
  std::vector<char> seen(basis.n, 0);
  for (int k = 1; k <= basis.levels(); ++k) {
    const auto [begin, end] = levelRanges[k - 1];
    const double sep = rho * std::pow(tree.h, k);
    for (int a = begin; a < end; ++a) {
      if (nodes[a].level != k) throw Error("SupernodeSet: level range mismatch");
      if (nodes[a].members.empty()) throw Error("SupernodeSet: empty supernode");
      for (int b = a + 1; b < end; ++b)
        if (coord_distance(nodes[a].center, nodes[b].center, metric) < sep - 1e-12)
          throw Error("SupernodeSet: centers closer than rho*h^k on level " + std::to_string(k));
      for (int col : nodes[a].members) {
        if (basis.level[col] != k) throw Error("SupernodeSet: member level mismatch");
        if (seen[col]) throw Error("SupernodeSet: column in two supernodes");
        seen[col] = 1;
        if (nodeOf[col] != a) throw Error("SupernodeSet: nodeOf mismatch");
        // Nearest-center rule with ties to the lowest supernode id.
        const Cell& sc = basis.supportCell[col] < 0
                             ? tree.root
                             : tree.cell(k - 1, basis.supportCell[col]);
        double bestD = kInf;
        int best = -1;
        for (int b = begin; b < end; ++b) {
          const double d = coord_distance(sc.centroid, nodes[b].center, metric);
          if (d < bestD) {
            bestD = d;
            best = b;
          }
        }
        if (best != a)
          throw Error("SupernodeSet: column " + std::to_string(col) +
                      " not assigned to its nearest center");
      }
    }
  }
  for (Index i = 0; i < basis.n; ++i)
    if (!seen[i]) throw Error("SupernodeSet: column " + std::to_string(i) + " unassigned");
}

void validate_coloring(const Coloring& coloring, const MultiresBasis& basis,
                       const PartitionTree& tree, const SupernodeSet* supernodes) {
  if (coloring.supernodal && supernodes == nullptr)
    throw Error("validate_coloring: supernodal coloring needs the SupernodeSet");
  const Index nNodes = coloring.supernodal ? static_cast<Index>(supernodes->nodes.size())
                                           : basis.n;
  std::vector<char> seen(nNodes, 0);
  int prevLevel = 0;
  for (size_t ci = 0; ci < coloring.colors.size(); ++ci) {
    const auto& c = coloring.colors[ci];
    if (c.members.empty()) throw Error("Coloring: empty color");
    if (c.level < prevLevel) throw Error("Coloring: colors not ordered coarse to fine");
    prevLevel = c.level;
    const double threshold = 2.0 * coloring.rho * std::pow(tree.h, c.level - 1);
    for (size_t a = 0; a < c.members.size(); ++a) {
      const int na = c.members[a];
      if (seen[na]) throw Error("Coloring: node in two colors");
      seen[na] = 1;
      if (coloring.colorOf[na] != static_cast<int>(ci)) throw Error("Coloring: colorOf mismatch");
      const int levelA = coloring.supernodal ? supernodes->nodes[na].level : basis.level[na];
      if (levelA != c.level) throw Error("Coloring: member level differs from color level");
      for (size_t b = a + 1; b < c.members.size(); ++b) {
        const int nb = c.members[b];
        const double d =
            coloring.supernodal
                ? supernode_distance(*supernodes, basis, tree, na, nb)
                : basis_distance(basis, tree, na, nb);
        if (d < threshold - 1e-12)
          throw Error("Coloring: separation violated in color " + std::to_string(ci) +
                      " (distance " + std::to_string(d) + " < " + std::to_string(threshold) +
                      ")");
      }
    }
  }
  for (Index i = 0; i < nNodes; ++i)
    if (!seen[i]) throw Error("Coloring: node " + std::to_string(i) + " uncolored");
  // Ordering is a permutation consistent with pos.
  std::vector<char> seenPos(basis.n, 0);
  for (Index p = 0; p < static_cast<Index>(coloring.perm.size()); ++p) {
    const Index col = coloring.perm[p];
    if (seenPos[col]) throw Error("Coloring: duplicated column in perm");
    seenPos[col] = 1;
    if (coloring.pos[col] != p) throw Error("Coloring: pos/perm inconsistent");
  }
  if (static_cast<Index>(coloring.perm.size()) != basis.n)
    throw Error("Coloring: perm does not cover all columns");
}

}  // namespace opfactor
