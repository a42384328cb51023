#include "opfactor/measurement.hpp"

#include <cmath>
#include <mutex>

#include "opfactor/parallel.hpp"
#include "opfactor/rng.hpp"

namespace opfactor {

void check_oracle(const SolverOracle& oracle, std::uint64_t seed, int probes) {
  Rng rng(seed);
  const Index n = oracle.n();
  for (int p = 0; p < probes; ++p) {
    Vector a(n), b(n);
    for (Index i = 0; i < n; ++i) a(i) = rng.normal();
    for (Index i = 0; i < n; ++i) b(i) = rng.normal();
    const double alpha = rng.normal();
    const double beta = rng.normal();
    const Vector fa = oracle.apply(a);
    const Vector fb = oracle.apply(b);
    const Vector fc = oracle.apply(alpha * a + beta * b);
    const double linScale = fc.norm() + fa.norm() + fb.norm();
    if ((fc - alpha * fa - beta * fb).norm() > 1e-10 * linScale)
      throw Error("SolverOracle: linearity probe " + std::to_string(p) + " failed");
    const double s1 = a.dot(fb);
    const double s2 = fa.dot(b);
    if (std::abs(s1 - s2) > 1e-10 * (std::abs(s1) + std::abs(s2) + 1e-300))
      throw Error("SolverOracle: symmetry probe " + std::to_string(p) + " failed");
  }
}

MeasurementMatrix build_measurements(const Coloring& coloring) {
  if (coloring.supernodal)
    throw Error("build_measurements: expected a simplicial coloring");
  const Index n = coloring.size();
  MeasurementMatrix out;
  out.M.resize(n, static_cast<Index>(coloring.colors.size()));
  std::vector<Triplet> triplets;
  triplets.reserve(n);
  for (Index c = 0; c < static_cast<Index>(coloring.colors.size()); ++c)
    for (int i : coloring.colors[c].members) triplets.emplace_back(i, c, 1.0);
  out.M.setFromTriplets(triplets.begin(), triplets.end());
  out.M.makeCompressed();
  out.colOffsets.resize(coloring.colors.size() + 1);
  for (size_t c = 0; c <= coloring.colors.size(); ++c)
    out.colOffsets[c] = static_cast<Index>(c);
  return out;
}

MeasurementMatrix build_supernodal_measurements(const Coloring& coloring,
                                                const SupernodeSet& supernodes) {
  if (!coloring.supernodal)
    throw Error("build_supernodal_measurements: expected a supernodal coloring");
  const Index n = static_cast<Index>(coloring.pos.size());
  MeasurementMatrix out;
  out.colOffsets.assign(coloring.colors.size() + 1, 0);
  std::vector<Triplet> triplets;
  triplets.reserve(n);
  Index colBase = 0;
  for (size_t c = 0; c < coloring.colors.size(); ++c) {
    out.colOffsets[c] = colBase;
    Index mc = 0;
    for (int node : coloring.colors[c].members) {
      const auto& members = supernodes.nodes[node].members;
      for (size_t eta = 0; eta < members.size(); ++eta)
        triplets.emplace_back(members[eta], colBase + static_cast<Index>(eta), 1.0);
      mc = std::max(mc, static_cast<Index>(members.size()));
    }
    colBase += mc;
  }
  out.colOffsets.back() = colBase;
  out.M.resize(n, colBase);
  out.M.setFromTriplets(triplets.begin(), triplets.end());
  out.M.makeCompressed();
  return out;
}

ObservationSet observe(const SolverOracle& oracle, const MultiresBasis& basis,
                       const MeasurementMatrix& mm, int threads) {
  if (oracle.n() != basis.n)
    throw Error("observe: oracle dimension " + std::to_string(oracle.n()) +
                " differs from basis dimension " + std::to_string(basis.n));
  if (mm.M.rows() != basis.n) throw Error("observe: M row count mismatch");

  ObservationSet out;
  out.M = mm.M;
  out.colOffsets = mm.colOffsets;
  out.O.resize(basis.n, mm.M.cols());

  const long before = oracle.matvec_count();
  const int workers = oracle.concurrency_safe() ? threads : 1;
  std::atomic<bool> failed{false};
  std::string failMsg;
  std::mutex failLock;
  parallel_for(mm.M.cols(), workers, [&](long j) {
    if (failed.load()) return;
    try {
      Vector mj = Vector::Zero(basis.n);
      for (SparseMatrix::InnerIterator it(out.M, j); it; ++it) mj(it.row()) = it.value();
      const Vector rhs = basis.W * mj;
      const Vector sol = oracle.apply(rhs);
      out.O.col(j) = basis.W.transpose() * sol;
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lock(failLock);
      failed.store(true);
      failMsg = "observe: oracle failed on column " + std::to_string(j) + ": " + e.what();
    }
  });
  if (failed.load()) throw Error(failMsg);
  out.matvecs = oracle.matvec_count() - before;
  return out;
}

}  // namespace opfactor
