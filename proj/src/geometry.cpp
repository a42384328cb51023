#include "opfactor/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace opfactor {

void PointSet::validate() const {
  if (dim < 1 || dim > 3) throw Error("PointSet: dim must be 1, 2, or 3, got " + std::to_string(dim));
  if (coords.rows() < 1) throw Error("PointSet: need at least one point");
  if (coords.cols() != dim)
    throw Error("PointSet: coords has " + std::to_string(coords.cols()) + " columns, expected " +
                std::to_string(dim));
  for (Index i = 0; i < coords.rows(); ++i)
    for (int a = 0; a < dim; ++a)
      if (!(coords(i, a) >= 0.0 && coords(i, a) < 1.0))
        throw Error("PointSet: coordinate " + std::to_string(coords(i, a)) + " of point " +
                    std::to_string(i) + " outside [0,1)");
}

double point_distance(const PointSet& pts, Index a, Index b, Metric metric) {
  double s = 0.0;
  for (int ax = 0; ax < pts.dim; ++ax) {
    double d = std::abs(pts.coords(a, ax) - pts.coords(b, ax));
    if (metric == Metric::periodic) d = std::min(d, 1.0 - d);
    s += d * d;
  }
  return std::sqrt(s);
}

double set_distance(const PointSet& pts, const std::vector<int>& a, const std::vector<int>& b,
                    Metric metric) {
  if (a.empty() || b.empty()) throw Error("set_distance: empty member set");
  double best = std::numeric_limits<double>::infinity();
  for (int i : a)
    for (int j : b) best = std::min(best, point_distance(pts, i, j, metric));
  return best;
}

namespace {

// Min distance between index blocks [aLo,aHi] and [bLo,bHi] on a ring of n
// grid steps, in grid units. Blocks are contiguous and never wrap.
int axis_gap(int aLo, int aHi, int bLo, int bHi, int n, bool periodic) {
  if (aLo <= bHi && bLo <= aHi) return 0;  // overlap
  if (!periodic) return bLo > aHi ? bLo - aHi : aLo - bHi;
  const int fwd = (bLo - aHi + n) % n;  // steps from aHi forward to bLo
  const int bwd = (aLo - bHi + n) % n;  // steps from bHi forward to aLo
  return std::min(fwd, bwd);
}

double regular_block_distance(const PartitionTree& tree, const Cell& a, const Cell& b,
                              Metric metric) {
  double s = 0.0;
  for (int ax = 0; ax < tree.points.dim; ++ax) {
    const int n = tree.gridDims[ax];
    int g = axis_gap(a.blockLo[ax], a.blockHi[ax], b.blockLo[ax], b.blockHi[ax], n,
                     metric == Metric::periodic);
    const double d = static_cast<double>(g) / static_cast<double>(n);
    s += d * d;
  }
  return std::sqrt(s);
}

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

void finish_cell_geometry(Cell& cell, const PointSet& pts, bool centerFromCentroid) {
  const int d = pts.dim;
  Vector centroid = Vector::Zero(d);
  for (int m : cell.members) centroid += pts.coords.row(m).transpose();
  centroid /= static_cast<double>(cell.members.size());
  cell.centroid = centroid;
  if (centerFromCentroid) cell.center = centroid;
  double r = 0.0;
  for (int m : cell.members) {
    const double dd = (pts.coords.row(m).transpose() - cell.center).norm();
    r = std::max(r, dd);
  }
  cell.radius = r;
}

}  // namespace

PartitionTree build_regular_partition(const std::vector<int>& grid_dims, bool periodic) {
  if (grid_dims.empty() || grid_dims.size() > 3)
    throw Error("build_regular_partition: need 1 to 3 grid dimensions, got " +
                std::to_string(grid_dims.size()));
  const int d = static_cast<int>(grid_dims.size());
  const int n = grid_dims[0];
  for (int a = 0; a < d; ++a) {
    if (!is_power_of_two(grid_dims[a]))
      throw Error("build_regular_partition: axis " + std::to_string(a) + " size " +
                  std::to_string(grid_dims[a]) + " is not a power of two");
    if (grid_dims[a] != n)
      throw Error("build_regular_partition: axis " + std::to_string(a) + " size " +
                  std::to_string(grid_dims[a]) + " differs from axis 0 size " + std::to_string(n));
  }
  int q = 0;
  while ((1 << (q + 1)) <= n) ++q;

  PartitionTree tree;
  tree.h = 0.5;
  tree.q = q;
  tree.regular = true;
  for (int a = 0; a < 3; ++a) tree.gridDims[a] = a < d ? n : 1;

  const Index N = static_cast<Index>(std::pow(n, d) + 0.5);
  tree.points.dim = d;
  tree.points.periodic = periodic;
  tree.points.coords.resize(N, d);
  // Row-major over axes: point index = i0 + n*(i1 + n*i2), coordinate i/n.
  for (Index p = 0; p < N; ++p) {
    Index rem = p;
    for (int a = 0; a < d; ++a) {
      const int ia = static_cast<int>(rem % n);
      rem /= n;
      tree.points.coords(p, a) = static_cast<double>(ia) / n;
    }
  }

  tree.levels.resize(q);
  for (int k = 1; k <= q; ++k) {
    const int cellsPerAxis = 1 << k;
    const int width = n / cellsPerAxis;  // grid points per cell per axis
    int numCells = 1;
    for (int a = 0; a < d; ++a) numCells *= cellsPerAxis;
    auto& level = tree.levels[k - 1];
    level.resize(numCells);
    for (int c = 0; c < numCells; ++c) {
      Cell& cell = level[c];
      cell.level = k;
      cell.id = c;
      int rem = c;
      std::array<int, 3> blockIdx{0, 0, 0};
      for (int a = 0; a < d; ++a) {
        blockIdx[a] = rem % cellsPerAxis;
        rem /= cellsPerAxis;
        cell.blockLo[a] = blockIdx[a] * width;
        cell.blockHi[a] = cell.blockLo[a] + width - 1;
      }
      if (k > 1) {
        int parent = 0;
        for (int a = d - 1; a >= 0; --a) parent = parent * (cellsPerAxis / 2) + blockIdx[a] / 2;
        cell.parent = parent;
        tree.levels[k - 2][parent].children.push_back(c);
      }
    }
  }

  // Fill member lists by direct indexing.
  for (Index p = 0; p < N; ++p) {
    std::array<int, 3> ia{0, 0, 0};
    Index rem = p;
    for (int a = 0; a < d; ++a) {
      ia[a] = static_cast<int>(rem % n);
      rem /= n;
    }
    for (int k = 1; k <= q; ++k) {
      const int cellsPerAxis = 1 << k;
      const int width = n / cellsPerAxis;
      int c = 0;
      for (int a = d - 1; a >= 0; --a) c = c * cellsPerAxis + ia[a] / width;
      tree.levels[k - 1][c].members.push_back(static_cast<int>(p));
    }
  }

  for (int k = 1; k <= q; ++k)
    for (auto& cell : tree.levels[k - 1]) {
      std::sort(cell.members.begin(), cell.members.end());
      finish_cell_geometry(cell, tree.points, /*centerFromCentroid=*/true);
    }

  tree.root.level = 0;
  tree.root.id = 0;
  tree.root.members.resize(N);
  std::iota(tree.root.members.begin(), tree.root.members.end(), 0);
  for (int a = 0; a < d; ++a) {
    tree.root.blockLo[a] = 0;
    tree.root.blockHi[a] = n - 1;
  }
  finish_cell_geometry(tree.root, tree.points, true);
  if (q >= 1)
    for (auto& cell : tree.levels[0]) tree.root.children.push_back(cell.id);
  return tree;
}

PartitionTree build_general_partition(const PointSet& points, double h, int q) {
  points.validate();
  if (!(h > 0.0 && h < 1.0)) throw Error("build_general_partition: h must lie in (0,1)");
  if (q < 1) throw Error("build_general_partition: q must be >= 1");
  const Index N = points.size();
  const Metric metric = points.periodic ? Metric::periodic : Metric::euclidean;

  if (N >= 2) {
    double minSpacing = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < N; ++i)
      for (Index j = i + 1; j < N; ++j)
        minSpacing = std::min(minSpacing, point_distance(points, i, j, metric));
    if (std::pow(h, q) < minSpacing) {
      std::ostringstream os;
      os << "build_general_partition: q=" << q << " gives level-q resolution h^q="
         << std::pow(h, q) << " below the minimal point spacing " << minSpacing
         << "; reduce q";
      throw Error(os.str());
    }
  }

  // Farthest-first traversal from point 0; prefix covering radii are the
  // insertion distances of the next point.
  std::vector<int> order(N);
  std::vector<double> insertDist(N, std::numeric_limits<double>::infinity());
  {
    std::vector<char> taken(N, 0);
    std::vector<double> dist(N, std::numeric_limits<double>::infinity());
    int cur = 0;
    for (Index step = 0; step < N; ++step) {
      order[step] = cur;
      taken[cur] = 1;
      insertDist[step] = dist[cur];
      for (Index i = 0; i < N; ++i) {
        if (taken[i]) continue;
        dist[i] = std::min(dist[i], point_distance(points, i, cur, metric));
      }
      int next = -1;
      double best = -1.0;
      for (Index i = 0; i < N; ++i) {
        if (taken[i]) continue;
        if (dist[i] > best) {
          best = dist[i];
          next = static_cast<int>(i);
        }
      }
      cur = next;
    }
  }

  PartitionTree tree;
  tree.points = points;
  tree.h = h;
  tree.q = q;
  tree.regular = false;

  // Centers per level: the shortest prefix whose covering radius (= next
  // insertion distance) is <= h^k / 2.
  std::vector<std::vector<int>> centers(q);
  for (int k = 1; k <= q; ++k) {
    const double target = std::pow(h, k) / 2.0;
    Index m = 1;
    while (m < N && insertDist[m] > target) ++m;
    centers[k - 1].assign(order.begin(), order.begin() + m);
    std::sort(centers[k - 1].begin(), centers[k - 1].end());
  }

  tree.levels.resize(q);
  for (int k = 1; k <= q; ++k) {
    auto& level = tree.levels[k - 1];
    level.resize(centers[k - 1].size());
    for (int c = 0; c < static_cast<int>(level.size()); ++c) {
      level[c].level = k;
      level[c].id = c;
      level[c].center = points.coords.row(centers[k - 1][c]).transpose();
    }
  }

  // Ties go to the lowest cell id (ascending scan, strict improvement only).
  auto nearest_center = [&](int k, Index p) {
    const auto& cs = centers[k - 1];
    int best = 0;
    double bestD = std::numeric_limits<double>::infinity();
    for (int c = 0; c < static_cast<int>(cs.size()); ++c) {
      const double d = point_distance(points, p, cs[c], metric);
      if (d < bestD) {
        bestD = d;
        best = c;
      }
    }
    return best;
  };

  // Finest level: every point joins its nearest center.
  for (Index p = 0; p < N; ++p)
    tree.levels[q - 1][nearest_center(q, p)].members.push_back(static_cast<int>(p));
  // Coarser levels: a child joins the cell of the nearest center to its own
  // center point, and inherits its members upward.
  for (int k = q - 1; k >= 1; --k) {
    auto& fine = tree.levels[k];
    for (auto& child : fine) {
      // Child center is one of the original points; find its index.
      int centerPoint = centers[k][child.id];
      const int parent = nearest_center(k, centerPoint);
      child.parent = parent;
      tree.levels[k - 1][parent].children.push_back(child.id);
      auto& pm = tree.levels[k - 1][parent].members;
      pm.insert(pm.end(), child.members.begin(), child.members.end());
    }
  }

  for (int k = 1; k <= q; ++k)
    for (auto& cell : tree.levels[k - 1]) {
      if (cell.members.empty())
        throw Error("build_general_partition: internal error, empty cell");
      std::sort(cell.members.begin(), cell.members.end());
      finish_cell_geometry(cell, tree.points, /*centerFromCentroid=*/false);
    }

  tree.root.level = 0;
  tree.root.id = 0;
  tree.root.members.resize(N);
  std::iota(tree.root.members.begin(), tree.root.members.end(), 0);
  for (auto& cell : tree.levels[0]) tree.root.children.push_back(cell.id);
  finish_cell_geometry(tree.root, tree.points, true);
  return tree;
}

double cell_distance(const PartitionTree& tree, int levelA, int idA, int levelB, int idB,
                     Metric metric) {
  if (levelA == 0 || levelB == 0) return 0.0;  // the root shares points with everything
  const Cell& a = tree.cell(levelA, idA);
  const Cell& b = tree.cell(levelB, idB);
  if (tree.regular) return regular_block_distance(tree, a, b, metric);
  return set_distance(tree.points, a.members, b.members, metric);
}

double cell_spread(const PartitionTree& tree, int level, int id, Metric metric) {
  const Cell& c = tree.cell(level, id);
  double r = 0.0;
  for (int m : c.members) {
    double s = 0.0;
    for (int ax = 0; ax < tree.points.dim; ++ax) {
      double d = std::abs(tree.points.coords(m, ax) - c.centroid(ax));
      if (metric == Metric::periodic) d = std::min(d, 1.0 - d);
      s += d * d;
    }
    r = std::max(r, std::sqrt(s));
  }
  return r;
}

void PartitionTree::validate() const {
  const Index N = points.size();
  for (int k = 1; k <= q; ++k) {
    std::vector<char> seen(N, 0);
    Index total = 0;
    for (const auto& cell : levels[k - 1]) {
      if (cell.members.empty()) throw Error("PartitionTree: empty cell at level " + std::to_string(k));
      for (int m : cell.members) {
        if (seen[m]) throw Error("PartitionTree: point " + std::to_string(m) +
                                 " in two cells at level " + std::to_string(k));
        seen[m] = 1;
      }
      total += static_cast<Index>(cell.members.size());
      // Size bound: radius <= h^k * 1.5.
      const double bound = std::pow(h, k) * 1.5;
      if (cell.radius > bound + 1e-12)
        throw Error("PartitionTree: level " + std::to_string(k) + " cell " +
                    std::to_string(cell.id) + " radius " + std::to_string(cell.radius) +
                    " exceeds bound " + std::to_string(bound));
      for (int m : cell.members)
        if ((points.coords.row(m).transpose() - cell.center).norm() > cell.radius + 1e-12)
          throw Error("PartitionTree: member outside stored radius");
      // Nesting: members equal the disjoint union of children members.
      if (k < q) {
        std::vector<int> fromChildren;
        for (int ch : cell.children) {
          const auto& cm = levels[k][ch].members;
          fromChildren.insert(fromChildren.end(), cm.begin(), cm.end());
          if (levels[k][ch].parent != cell.id)
            throw Error("PartitionTree: child/parent link mismatch");
        }
        std::sort(fromChildren.begin(), fromChildren.end());
        if (fromChildren != cell.members)
          throw Error("PartitionTree: nesting violated at level " + std::to_string(k) +
                      " cell " + std::to_string(cell.id));
      }
    }
    if (total != N)
      throw Error("PartitionTree: level " + std::to_string(k) + " covers " +
                  std::to_string(total) + " of " + std::to_string(N) + " points");
  }
  if (regular)
    for (const auto& cell : levels[q - 1])
      if (cell.members.size() != 1) throw Error("PartitionTree: regular leaves must be singletons");
}

}  // namespace opfactor
