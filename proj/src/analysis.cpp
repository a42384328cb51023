#include "opfactor/analysis.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>

#include "opfactor/rng.hpp"

namespace opfactor {

RecoveryMode parse_mode(const std::string& name) {
  if (name == "simplicial") return RecoveryMode::simplicial;
  if (name == "supernodal") return RecoveryMode::supernodal;
  throw Error("unknown mode '" + name + "' (want simplicial|supernodal)");
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

Vector seeded_unit_vector(Index n, std::uint64_t seed) {
  Rng rng(seed);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = rng.normal();
  v /= v.norm();
  return v;
}

// |lambda_max| estimate of a symmetric operator via power iteration with a
// Rayleigh quotient readout.
double power_norm(const std::function<Vector(const Vector&)>& apply, Index n, int iters,
                  std::uint64_t seed) {
  Vector v = seeded_unit_vector(n, seed);
  double rayleigh = 0.0;
  for (int it = 0; it < iters; ++it) {
    const Vector w = apply(v);
    rayleigh = std::abs(v.dot(w));
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    v = w / nw;
  }
  return rayleigh;
}

}  // namespace

double estimate_theta_norm(const SolverOracle& oracle, const MultiresBasis& basis, int iters,
                           std::uint64_t seed) {
  auto theta = [&](const Vector& v) {
    return apply_basis_transpose(basis, oracle.apply(apply_basis(basis, v)));
  };
  return power_norm(theta, basis.n, iters, seed);
}

ErrorEstimate estimate_rel_error(const SolverOracle& oracle, const MultiresBasis& basis,
                                 const SparseFactor& factor, int iters, std::uint64_t seed) {
  if (iters < 1) throw Error("estimate_rel_error: iters must be >= 1");
  auto theta = [&](const Vector& v) {
    return apply_basis_transpose(basis, oracle.apply(apply_basis(basis, v)));
  };
  auto err = [&](const Vector& v) { return Vector(theta(v) - factor_matvec(factor, v)); };

  ErrorEstimate est;
  est.normTheta = power_norm(theta, basis.n, iters, seed);
  est.normErr = power_norm(err, basis.n, iters, seed);
  est.relErr = est.normTheta > 0.0 ? est.normErr / est.normTheta : 0.0;
  return est;
}

void ExperimentConfig::validate() const {
  problem.validate();
  if (rhos.empty()) throw Error("ExperimentConfig: need at least one rho");
  for (size_t i = 0; i < rhos.size(); ++i) {
    if (!(rhos[i] > 0.0)) throw Error("ExperimentConfig: rho values must be positive");
    if (i > 0 && rhos[i] <= rhos[i - 1])
      throw Error("ExperimentConfig: rho values must be ascending");
  }
  if (evalIters < 1) throw Error("ExperimentConfig: evalIters must be >= 1");
}

PipelineResult run_pipeline(const SolverOracle& oracle, const MultiresBasis& basis,
                            const PartitionTree& tree, double rho, RecoveryMode mode,
                            int threads) {
  PipelineResult out;
  RecoverOptions opts;
  opts.threads = threads;
  if (mode == RecoveryMode::simplicial) {
    const Coloring coloring = color_simplicial(basis, tree, rho);
    const MeasurementMatrix mm = build_measurements(coloring);
    const ObservationSet obs = observe(oracle, basis, mm, threads);
    out.colors = static_cast<int>(coloring.colors.size());
    out.recoveryMatvecs = obs.matvecs;
    out.factor = cholesky_recover(obs, coloring, basis, tree, opts);
  } else {
    const SupernodeSet supernodes = aggregate_supernodes(basis, tree, rho);
    const Coloring coloring = color_supernodal(supernodes, basis, tree, rho);
    const MeasurementMatrix mm = build_supernodal_measurements(coloring, supernodes);
    const ObservationSet obs = observe(oracle, basis, mm, threads);
    out.colors = static_cast<int>(coloring.colors.size());
    out.recoveryMatvecs = obs.matvecs;
    out.factor = supernodal_cholesky_recover(obs, coloring, supernodes, basis, tree, opts);
  }
  return out;
}

std::string run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto oracle = make_oracle(config.problem);
  const PartitionTree tree = problem_partition(config.problem);
  const MultiresBasis basis = build_haar_basis(tree);

  std::ostringstream csv;
  csv << "rho,matvecs,rel_err\n";
  for (double rho : config.rhos) {
    const PipelineResult run =
        run_pipeline(*oracle, basis, tree, rho, config.mode, config.threads);
    const ErrorEstimate est =
        estimate_rel_error(*oracle, basis, run.factor, config.evalIters, config.evalSeed);
    csv << format_double(rho) << "," << run.recoveryMatvecs << ","
        << format_double(est.relErr) << "\n";
  }
  return csv.str();
}

std::string run_lowrank_study(const ExperimentConfig& config) {
  config.validate();
  const auto oracle = make_oracle(config.problem);
  const PartitionTree tree = problem_partition(config.problem);
  const MultiresBasis basis = build_haar_basis(tree);

  const double inf = std::numeric_limits<double>::infinity();
  const PipelineResult run =
      run_pipeline(*oracle, basis, tree, inf, RecoveryMode::simplicial, config.threads);

  std::ostringstream csv;
  csv << "k,rel_err\n";
  for (int k = 1; k <= basis.levels(); ++k) {
    const Index cut = basis.levelOffsets[k];
    const SparseFactor truncated = truncate_low_rank(run.factor, cut);
    const ErrorEstimate est =
        estimate_rel_error(*oracle, basis, truncated, config.evalIters, config.evalSeed);
    csv << cut << "," << format_double(est.relErr) << "\n";
  }
  return csv.str();
}

}  // namespace opfactor
