#pragma once

#include <atomic>
#include <memory>
#include <vector>

#include "opfactor/basis.hpp"
#include "opfactor/coloring.hpp"
#include "opfactor/types.hpp"

namespace opfactor {

/// Black-box access to the solution operator: apply(b) returns the solve for
/// right-hand side b and increments the matvec counter by exactly one.
/// Implementations must be linear and (for this pipeline) self-adjoint.
class SolverOracle {
 public:
  virtual ~SolverOracle() = default;

  Vector apply(const Vector& b) const {
    if (b.size() != n())
      throw Error("SolverOracle: right-hand side has size " + std::to_string(b.size()) +
                  ", expected " + std::to_string(n()));
    ++count_;
    return solve(b);
  }

  virtual Index n() const = 0;
  virtual bool self_adjoint() const { return true; }
  /// True when apply may be issued from several threads at once.
  virtual bool concurrency_safe() const { return false; }

  long matvec_count() const { return count_.load(); }
  void reset_count() const { count_.store(0); }

 protected:
  virtual Vector solve(const Vector& b) const = 0;

 private:
  mutable std::atomic<long> count_{0};
};

/// Spot-checks linearity and symmetry of an oracle with random probes; each
/// probe costs three matvecs. Throws when a check fails beyond 1e-10 relative.
void check_oracle(const SolverOracle& oracle, std::uint64_t seed, int probes = 3);

/// Measurement matrix plus its per-color column layout: columns of color c
/// are [colOffsets[c], colOffsets[c+1]).
struct MeasurementMatrix {
  SparseMatrix M;                  // N x m, 0/1 entries
  std::vector<Index> colOffsets;   // colors.size()+1 entries
};

/// Observations O = Theta M in multiresolution coordinates, with the
/// measurements they answer and the oracle calls they cost.
struct ObservationSet {
  SparseMatrix M;
  Matrix O;                        // N x m dense
  long matvecs = 0;
  std::vector<Index> colOffsets;
};

/// Simplicial measurements: one column per color, the sum of unit vectors of
/// its members.
MeasurementMatrix build_measurements(const Coloring& coloring);

/// Supernodal measurements: m_c = max supernode size columns per color; row i
/// holds a single 1 in the column of its within-supernode position (ascending
/// basis index).
MeasurementMatrix build_supernodal_measurements(const Coloring& coloring,
                                                const SupernodeSet& supernodes);

/// Gathers O column by column: O(:,j) = W^T omega(W M(:,j)). One oracle call
/// per column; columns run concurrently when the oracle allows it, and the
/// assembled O does not depend on completion order.
ObservationSet observe(const SolverOracle& oracle, const MultiresBasis& basis,
                       const MeasurementMatrix& mm, int threads = 1);

}  // namespace opfactor
