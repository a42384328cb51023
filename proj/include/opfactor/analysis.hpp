#pragma once

#include <string>
#include <vector>

#include "opfactor/oracles.hpp"
#include "opfactor/recovery.hpp"

namespace opfactor {

enum class RecoveryMode { simplicial, supernodal };

RecoveryMode parse_mode(const std::string& name);

struct ErrorEstimate {
  double relErr = 0.0;
  double normTheta = 0.0;
  double normErr = 0.0;
};

/// Power iteration on E = Theta - L L^T and on Theta from the same seeded
/// start vector; returns the Rayleigh magnitude estimates and their ratio.
/// Each E application costs one oracle call plus one factor matvec; the
/// caller is responsible for separating these evaluation matvecs from the
/// recovery budget (snapshot the oracle counter).
ErrorEstimate estimate_rel_error(const SolverOracle& oracle, const MultiresBasis& basis,
                                 const SparseFactor& factor, int iters, std::uint64_t seed);

/// Spectral norm estimate of Theta alone (power iteration).
double estimate_theta_norm(const SolverOracle& oracle, const MultiresBasis& basis, int iters,
                           std::uint64_t seed);

struct ExperimentConfig {
  ProblemSpec problem;
  std::vector<double> rhos;      // positive, ascending
  RecoveryMode mode = RecoveryMode::simplicial;
  int evalIters = 30;            // power iterations for the error estimate
  std::uint64_t evalSeed = 1234;
  int threads = 1;

  void validate() const;
};

/// One pipeline run: coloring (+supernodes), measurements, observe, recover.
struct PipelineResult {
  SparseFactor factor;
  long recoveryMatvecs = 0;
  int colors = 0;
};

PipelineResult run_pipeline(const SolverOracle& oracle, const MultiresBasis& basis,
                            const PartitionTree& tree, double rho, RecoveryMode mode,
                            int threads);

/// Runs the full rho sweep and renders the CSV text (header rho,matvecs,rel_err,
/// one row per rho; matvecs is the recovery-only count). Deterministic for a
/// fixed config.
std::string run_experiment(const ExperimentConfig& config);

/// Low-rank study at rho = +inf: truncates the factor at each level-prefix
/// column count and reports the relative error per cut. Returns CSV text with
/// header k,rel_err.
std::string run_lowrank_study(const ExperimentConfig& config);

/// Fixed-format float used in all CSV output (shortest round-trip form).
std::string format_double(double v);

}  // namespace opfactor
