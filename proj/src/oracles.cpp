#include "opfactor/oracles.hpp"

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <fstream>
#include <sstream>

#include "opfactor/rng.hpp"

namespace opfactor {

namespace {

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

long pow_int(int n, int d) {
  long r = 1;
  for (int i = 0; i < d; ++i) r *= n;
  return r;
}

// Sparse SPD solve behind the oracle contract: factorization computed once,
// conjugate gradients as the fallback path.
class SparseSolveOracle : public SolverOracle {
 public:
  explicit SparseSolveOracle(SparseMatrix A) : A_(std::move(A)) {
    llt_.compute(A_);
    if (llt_.info() != Eigen::Success) {
      cg_.setTolerance(1e-13);
      cg_.setMaxIterations(10 * A_.rows());
      cg_.compute(A_);
      useCg_ = true;
    }
  }

  Index n() const override { return A_.rows(); }
  bool concurrency_safe() const override { return !useCg_; }

 protected:
  Vector solve(const Vector& b) const override {
    if (!useCg_) return llt_.solve(b);
    const Vector x = cg_.solve(b);
    if (cg_.info() != Eigen::Success)
      throw Error("SparseSolveOracle: conjugate gradients stalled at residual " +
                  std::to_string(cg_.error()));
    return x;
  }

 private:
  SparseMatrix A_;
  Eigen::SimplicialLLT<SparseMatrix> llt_;
  mutable Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper> cg_;
  bool useCg_ = false;
};

class DenseSolveOracle : public SolverOracle {
 public:
  explicit DenseSolveOracle(Matrix A) : n_(A.rows()), llt_(std::move(A)) {
    if (llt_.info() != Eigen::Success)
      throw Error("dense_test_oracle: matrix is not positive definite");
  }
  Index n() const override { return n_; }
  bool concurrency_safe() const override { return true; }

 protected:
  Vector solve(const Vector& b) const override { return llt_.solve(b); }

 private:
  Index n_;
  Eigen::LLT<Matrix> llt_;
};

// Spectral solve on the periodic grid: diagonal in Fourier space.
class FractionalOracle : public SolverOracle {
 public:
  FractionalOracle(int n, int d, double s) : n_(n), d_(d), N_(pow_int(n, d)) {
    // Precompute (lambda_k^s + 1)^-1 over the full multi-index grid.
    weight_.resize(N_);
    std::vector<int> k(d, 0);
    for (long idx = 0; idx < N_; ++idx) {
      long rem = idx;
      for (int a = 0; a < d; ++a) {
        k[a] = static_cast<int>(rem % n);
        rem /= n;
      }
      weight_[idx] = 1.0 / (std::pow(laplacian_symbol(k, n), s) + 1.0);
    }
  }

  Index n() const override { return N_; }
  bool concurrency_safe() const override { return true; }

 protected:
  Vector solve(const Vector& b) const override {
    using Cplx = std::complex<double>;
    static thread_local Eigen::FFT<double> fft;
    std::vector<Cplx> data(N_);
    for (long i = 0; i < N_; ++i) data[i] = Cplx(b(i), 0.0);

    std::vector<Cplx> line(n_), out(n_);
    auto sweep = [&](bool forward) {
      for (int axis = 0; axis < d_; ++axis) {
        const long stride = pow_int(n_, axis);
        const long lines = N_ / n_;
        for (long l = 0; l < lines; ++l) {
          // Base index of the l-th line along this axis.
          const long minor = l % stride;
          const long major = l / stride;
          const long base = major * stride * n_ + minor;
          for (int t = 0; t < n_; ++t) line[t] = data[base + t * stride];
          if (forward)
            fft.fwd(out, line);
          else
            fft.inv(out, line);
          for (int t = 0; t < n_; ++t) data[base + t * stride] = out[t];
        }
      }
    };

    sweep(true);
    for (long i = 0; i < N_; ++i) data[i] *= weight_[i];
    sweep(false);

    Vector u(N_);
    for (long i = 0; i < N_; ++i) u(i) = data[i].real();
    return u;
  }

 private:
  int n_, d_;
  long N_;
  std::vector<double> weight_;
};

}  // namespace

double laplacian_symbol(const std::vector<int>& k, int n) {
  double s = 0.0;
  for (int ka : k) s += 2.0 - 2.0 * std::cos(2.0 * M_PI * ka / n);
  return s;
}

SparseMatrix assemble_grid_operator(int n, int d, const Vector& potential,
                                    const Vector& conductivity) {
  const long N = pow_int(n, d);
  if (potential.size() != N)
    throw Error("assemble_grid_operator: potential size mismatch");
  if (conductivity.size() != static_cast<Index>(d) * N)
    throw Error("assemble_grid_operator: conductivity size mismatch");

  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<size_t>(N) * (2 * d + 1));
  Vector diag = potential;
  for (int axis = 0; axis < d; ++axis) {
    const long stride = pow_int(n, axis);
    for (long p = 0; p < N; ++p) {
      // Edge from p to its +axis periodic neighbor.
      const long ia = (p / stride) % n;
      const long nb = ia + 1 < n ? p + stride : p + stride - stride * n;
      const double a = conductivity(axis * N + p);
      diag(p) += a;
      diag(nb) += a;
      triplets.emplace_back(p, nb, -a);
      triplets.emplace_back(nb, p, -a);
    }
  }
  for (long p = 0; p < N; ++p) triplets.emplace_back(p, p, diag(p));
  SparseMatrix A(N, N);
  A.setFromTriplets(triplets.begin(), triplets.end());  // duplicate (p,nb) pairs sum (n = 2)
  A.makeCompressed();
  return A;
}

std::unique_ptr<SolverOracle> sparse_matrix_oracle(const SparseMatrix& A) {
  return std::make_unique<SparseSolveOracle>(A);
}

std::unique_ptr<SolverOracle> make_laplacian_potential(int n, int d, std::uint64_t seed) {
  if (!is_power_of_two(n)) throw Error("make_laplacian_potential: n must be a power of two");
  if (d < 1 || d > 3) throw Error("make_laplacian_potential: d must be 1, 2, or 3");
  const long N = pow_int(n, d);
  Rng rng(seed);
  Vector potential(N);
  for (long i = 0; i < N; ++i) potential(i) = 1.0 + rng.uniform();
  const Vector ones = Vector::Ones(static_cast<Index>(d) * N);
  return std::make_unique<SparseSolveOracle>(assemble_grid_operator(n, d, potential, ones));
}

std::unique_ptr<SolverOracle> make_rough_conductivity(int n, int d, std::uint64_t seed) {
  if (!is_power_of_two(n)) throw Error("make_rough_conductivity: n must be a power of two");
  if (d < 1 || d > 3) throw Error("make_rough_conductivity: d must be 1, 2, or 3");
  const long N = pow_int(n, d);
  Rng rng(seed);
  Vector potential(N);
  for (long i = 0; i < N; ++i) potential(i) = 1.0 + rng.uniform();  // same stream as above
  Vector conductivity(static_cast<Index>(d) * N);
  for (Index e = 0; e < conductivity.size(); ++e) conductivity(e) = rng.uniform() + 1e-4;
  return std::make_unique<SparseSolveOracle>(assemble_grid_operator(n, d, potential, conductivity));
}

std::unique_ptr<SolverOracle> make_fractional(int n, int d, double s, std::uint64_t /*seed*/) {
  if (!is_power_of_two(n)) throw Error("make_fractional: n must be a power of two");
  if (d < 1 || d > 3) throw Error("make_fractional: d must be 1, 2, or 3");
  if (!(s > 0.0)) throw Error("make_fractional: s must be positive");
  return std::make_unique<FractionalOracle>(n, d, s);
}

std::unique_ptr<SolverOracle> dense_test_oracle(const Matrix& spd) {
  if (spd.rows() != spd.cols()) throw Error("dense_test_oracle: matrix must be square");
  return std::make_unique<DenseSolveOracle>(spd);
}

namespace {

SparseMatrix read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("matrix file '" + path + "' cannot be opened");
  std::string header;
  if (!std::getline(in, header)) throw Error("matrix file '" + path + "' is empty");
  std::istringstream hs(header);
  std::string banner, object, format, field, symmetry;
  hs >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%MatrixMarket" || object != "matrix")
    throw Error("matrix file '" + path + "': missing %%MatrixMarket matrix banner");
  if (format != "coordinate")
    throw Error("matrix file '" + path + "': only coordinate format is supported, got '" +
                format + "'");
  if (field != "real")
    throw Error("matrix file '" + path + "': only real entries are supported, got '" + field +
                "'");
  const bool symmetric = symmetry == "symmetric";
  if (!symmetric && symmetry != "general")
    throw Error("matrix file '" + path + "': unsupported symmetry '" + symmetry + "'");

  std::string lineStr;
  long rows = -1, cols = -1, nnz = -1;
  while (std::getline(in, lineStr)) {
    if (lineStr.empty() || lineStr[0] == '%') continue;
    std::istringstream ls(lineStr);
    if (!(ls >> rows >> cols >> nnz))
      throw Error("matrix file '" + path + "': malformed size line '" + lineStr + "'");
    break;
  }
  if (rows < 0) throw Error("matrix file '" + path + "': missing size line");
  if (rows != cols)
    throw Error("matrix file '" + path + "': matrix is " + std::to_string(rows) + "x" +
                std::to_string(cols) + ", expected square");

  std::vector<Triplet> triplets;
  triplets.reserve(2 * nnz);
  long count = 0;
  while (std::getline(in, lineStr)) {
    if (lineStr.empty() || lineStr[0] == '%') continue;
    std::istringstream ls(lineStr);
    long i, j;
    double v;
    if (!(ls >> i >> j >> v))
      throw Error("matrix file '" + path + "': malformed entry '" + lineStr + "'");
    if (i < 1 || i > rows || j < 1 || j > cols)
      throw Error("matrix file '" + path + "': entry (" + std::to_string(i) + "," +
                  std::to_string(j) + ") out of range");
    triplets.emplace_back(i - 1, j - 1, v);
    if (symmetric && i != j) triplets.emplace_back(j - 1, i - 1, v);
    ++count;
  }
  if (count != nnz)
    throw Error("matrix file '" + path + "': header promises " + std::to_string(nnz) +
                " entries, found " + std::to_string(count));

  SparseMatrix A(rows, cols);
  A.setFromTriplets(triplets.begin(), triplets.end());
  A.makeCompressed();

  if (!symmetric) {
    SparseMatrix diff = SparseMatrix(A.transpose()) - A;
    double maxAbs = 0.0;
    for (int k = 0; k < diff.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(diff, k); it; ++it)
        maxAbs = std::max(maxAbs, std::abs(it.value()));
    double scale = 0.0;
    for (int k = 0; k < A.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(A, k); it; ++it)
        scale = std::max(scale, std::abs(it.value()));
    if (maxAbs > 1e-12 * std::max(scale, 1.0))
      throw Error("matrix file '" + path + "': matrix is not symmetric (max |A - A^T| = " +
                  std::to_string(maxAbs) + ")");
  }
  return A;
}

}  // namespace

std::unique_ptr<SolverOracle> load_matrix_oracle(const std::string& path) {
  SparseMatrix A = read_matrix_market(path);
  Eigen::SimplicialLLT<SparseMatrix> probe;
  probe.compute(A);
  if (probe.info() != Eigen::Success)
    throw Error("matrix file '" + path + "': matrix is not positive definite");
  return std::make_unique<SparseSolveOracle>(A);
}

PointSet load_coords(const std::string& path, bool periodic) {
  std::ifstream in(path);
  if (!in) throw Error("coords file '" + path + "' cannot be opened");
  std::vector<std::vector<double>> rows;
  std::string lineStr;
  int dim = -1;
  while (std::getline(in, lineStr)) {
    if (lineStr.empty() || lineStr[0] == '%' || lineStr[0] == '#') continue;
    std::istringstream ls(lineStr);
    std::vector<double> row;
    double v;
    while (ls >> v) row.push_back(v);
    if (row.empty()) continue;
    if (dim < 0) dim = static_cast<int>(row.size());
    if (static_cast<int>(row.size()) != dim)
      throw Error("coords file '" + path + "': inconsistent column count on line '" + lineStr +
                  "'");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error("coords file '" + path + "' holds no points");
  if (dim < 1 || dim > 3)
    throw Error("coords file '" + path + "': dimension " + std::to_string(dim) +
                " unsupported (want 1..3 columns)");
  PointSet pts;
  pts.dim = dim;
  pts.periodic = periodic;
  pts.coords.resize(static_cast<Index>(rows.size()), dim);
  for (size_t i = 0; i < rows.size(); ++i)
    for (int a = 0; a < dim; ++a) pts.coords(static_cast<Index>(i), a) = rows[i][a];
  pts.validate();
  return pts;
}

void ProblemSpec::validate() const {
  switch (kind) {
    case ProblemKind::laplace_potential:
    case ProblemKind::rough_conductivity:
    case ProblemKind::fractional:
      if (!is_power_of_two(n))
        throw Error("ProblemSpec: grid size n must be a power of two, got " + std::to_string(n));
      if (d < 1 || d > 3) throw Error("ProblemSpec: d must be 1, 2, or 3");
      if (kind == ProblemKind::fractional && !(s > 0.0))
        throw Error("ProblemSpec: fractional order s must be positive");
      break;
    case ProblemKind::matrix_file:
    case ProblemKind::dense_test:
      if (path.empty()) throw Error("ProblemSpec: matrix problems need a file path");
      break;
  }
}

ProblemKind parse_problem_kind(const std::string& name) {
  if (name == "laplace_potential") return ProblemKind::laplace_potential;
  if (name == "rough_conductivity") return ProblemKind::rough_conductivity;
  if (name == "fractional") return ProblemKind::fractional;
  if (name == "matrix_file") return ProblemKind::matrix_file;
  if (name == "dense_test") return ProblemKind::dense_test;
  throw Error("unknown problem kind '" + name +
              "' (want laplace_potential|rough_conductivity|fractional|matrix_file|dense_test)");
}

std::string problem_kind_name(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::laplace_potential: return "laplace_potential";
    case ProblemKind::rough_conductivity: return "rough_conductivity";
    case ProblemKind::fractional: return "fractional";
    case ProblemKind::matrix_file: return "matrix_file";
    case ProblemKind::dense_test: return "dense_test";
  }
  return "?";
}

std::unique_ptr<SolverOracle> make_oracle(const ProblemSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case ProblemKind::laplace_potential:
      return make_laplacian_potential(spec.n, spec.d, spec.seed);
    case ProblemKind::rough_conductivity:
      return make_rough_conductivity(spec.n, spec.d, spec.seed);
    case ProblemKind::fractional:
      return make_fractional(spec.n, spec.d, spec.s, spec.seed);
    case ProblemKind::matrix_file:
      return load_matrix_oracle(spec.path);
    case ProblemKind::dense_test: {
      SparseMatrix A = read_matrix_market(spec.path);
      return dense_test_oracle(Matrix(A));
    }
  }
  throw Error("make_oracle: unreachable");
}

PointSet problem_points(const ProblemSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case ProblemKind::laplace_potential:
    case ProblemKind::rough_conductivity:
    case ProblemKind::fractional: {
      std::vector<int> dims(spec.d, spec.n);
      return build_regular_partition(dims, /*periodic=*/true).points;
    }
    case ProblemKind::matrix_file:
    case ProblemKind::dense_test:
      if (spec.coordsPath.empty())
        throw Error("problem_points: matrix problems need a sidecar coords file");
      return load_coords(spec.coordsPath);
  }
  throw Error("problem_points: unreachable");
}

PartitionTree problem_partition(const ProblemSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case ProblemKind::laplace_potential:
    case ProblemKind::rough_conductivity:
    case ProblemKind::fractional: {
      std::vector<int> dims(spec.d, spec.n);
      return build_regular_partition(dims, /*periodic=*/true);
    }
    case ProblemKind::matrix_file:
    case ProblemKind::dense_test: {
      const PointSet pts = problem_points(spec);
      const double h = 0.5;
      double minSpacing = std::numeric_limits<double>::infinity();
      for (Index i = 0; i < pts.size(); ++i)
        for (Index j = i + 1; j < pts.size(); ++j)
          minSpacing = std::min(minSpacing,
                                point_distance(pts, i, j,
                                               pts.periodic ? Metric::periodic
                                                            : Metric::euclidean));
      int q = 1;
      if (pts.size() > 1) {
        q = static_cast<int>(std::floor(std::log(minSpacing) / std::log(h)));
        q = std::max(q, 1);
      }
      return build_general_partition(pts, h, q);
    }
  }
  throw Error("problem_partition: unreachable");
}

}  // namespace opfactor
