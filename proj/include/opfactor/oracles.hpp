#pragma once

#include <memory>
#include <string>

#include "opfactor/geometry.hpp"
#include "opfactor/measurement.hpp"
#include "opfactor/types.hpp"

namespace opfactor {

enum class ProblemKind { laplace_potential, rough_conductivity, fractional, matrix_file, dense_test };

/// Everything needed to reconstruct a built-in problem deterministically.
struct ProblemSpec {
  ProblemKind kind = ProblemKind::laplace_potential;
  int n = 0;                  // per-axis grid size (grid kinds; power of two)
  int d = 2;                  // 1, 2, or 3
  double s = 1.0;             // fractional order
  std::uint64_t seed = 0;
  std::string path;           // matrix file (matrix_file / dense_test)
  std::string coordsPath;     // optional sidecar coordinates

  void validate() const;
};

ProblemKind parse_problem_kind(const std::string& name);
std::string problem_kind_name(ProblemKind kind);

/// Periodic grid Laplacian (unit off-diagonal stencil weights) plus the
/// random zeroth-order term diag(1 + W_i), W_i ~ UNIF[0,1). Solved by a
/// sparse Cholesky factorization computed once (conjugate gradients to 1e-13
/// relative residual as fallback).
std::unique_ptr<SolverOracle> make_laplacian_potential(int n, int d, std::uint64_t seed);

/// Divergence-form operator with i.i.d. edge conductivities Z_e + 1e-4 and
/// the same random potential stream as make_laplacian_potential (the
/// potential is drawn first, so W matches at equal seed).
std::unique_ptr<SolverOracle> make_rough_conductivity(int n, int d, std::uint64_t seed);

/// Spectral fractional Laplacian: apply = IDFT o ((lambda_k^s + 1)^-1) o DFT
/// with lambda_k the discrete Laplacian symbol; exact to FFT rounding.
std::unique_ptr<SolverOracle> make_fractional(int n, int d, double s, std::uint64_t seed);

/// Reads a symmetric sparse matrix in Matrix Market coordinate format,
/// factors it once, and serves solves. General-symmetry files are verified
/// symmetric to 1e-12; indefinite or malformed inputs are rejected.
std::unique_ptr<SolverOracle> load_matrix_oracle(const std::string& path);

/// In-memory SPD matrix with a dense factorization (unit-test oracle).
std::unique_ptr<SolverOracle> dense_test_oracle(const Matrix& spd);

/// Assembles the periodic grid operator with explicit potential (size N) and
/// per-axis edge conductivities (size d*N, edge (site, site+axis)); the
/// random factories above are thin wrappers over this.
SparseMatrix assemble_grid_operator(int n, int d, const Vector& potential,
                                    const Vector& conductivity);

/// Oracle backed by an explicit sparse SPD matrix.
std::unique_ptr<SolverOracle> sparse_matrix_oracle(const SparseMatrix& A);

/// Discrete Laplacian symbol sum over axes of 2 - 2cos(2 pi k_a / n).
double laplacian_symbol(const std::vector<int>& k, int n);

/// Collocation points for a problem: the periodic grid for grid kinds, the
/// sidecar coordinate file otherwise.
PointSet problem_points(const ProblemSpec& spec);

/// Whitespace-delimited coordinate file, one row per dof: x [y] [z].
PointSet load_coords(const std::string& path, bool periodic = false);

/// Builds the oracle described by spec.
std::unique_ptr<SolverOracle> make_oracle(const ProblemSpec& spec);

/// Partition tree matching problem_points: dyadic for grid kinds, general
/// farthest-first otherwise (q picked as the deepest level the point spacing
/// supports).
PartitionTree problem_partition(const ProblemSpec& spec);

}  // namespace opfactor
