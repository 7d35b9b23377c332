#pragma once

//
// ... Standard header files
//
#include <complex>
#include <cstdint>
#include <functional>
#include <vector>

//
// ... rks header files
//
#include <rks/krylov.hpp>
#include <rks/ritz.hpp>

namespace rks {

  enum class DeflationMode { Off, Lock };

  /// Post-contraction view of the solver state, handed to the optional
  /// observer after every restart (test instrumentation).
  struct RestartSnapshot {
    const DenseMatrix* u_basis = nullptr;
    const DenseMatrix* s_basis = nullptr; // null for the baseline
    const DenseMatrix* b = nullptr;
    const std::vector<double>* b_row = nullptr;
    const std::vector<double>* u_last = nullptr;
    const std::vector<double>* s_last = nullptr; // null for the baseline
    const DenseMatrix* coupling = nullptr;       // locked-block columns
    const LockedSet* locked = nullptr;
    size_t restart_index = 0;
  };

  struct SolverConfig {
    size_t k = 1;          // wanted eigenpair count
    size_t m = 0;          // Krylov dimension, k < m <= n
    double eta = 1e-10;    // residual tolerance
    size_t max_restarts = 300;
    Selector selector = Selector::LargestModulus;
    std::uint64_t seed = 0;
    DeflationMode deflation = DeflationMode::Off;
    double whiten_tol = 1e-8;
    double breakdown_tol = 1e-12;

    size_t sketch_dim = 0; // 0 -> 2*m
    size_t zeta = 8;
    // > 0: run exactly this many restarts regardless of convergence
    // (cost benchmarking); exact residuals are skipped in this mode.
    size_t fixed_restarts = 0;
    bool exact_residuals = true;
    // Completion probes: a convergence claim must survive this many
    // fresh-direction probe windows before it is accepted, protecting
    // against eigenvalues silently skipped by earlier truncations.
    // 0 disables probing. Each probe is a backward perturbation at the
    // tolerance scale, charged to perturbation_bound.
    size_t completion_probes = 3;
    std::function<void(const RestartSnapshot&)> observer;
  };

  struct LockEvent {
    size_t q = 0;        // vectors locked in this event
    double u_norm = 0.0; // ||u_last|| at lock time
    double b_norm = 0.0; // norm of the zeroed b_row prefix
  };

  struct SolverResult {
    std::vector<std::complex<double>> values; // closed under conjugation
    DenseMatrix schur_basis;                  // n x k'
    DenseMatrix t_small;                      // k' x k' quasi-triangular
    std::vector<double> residual_history;     // per-restart max estimate
    std::vector<double> residual_estimates;   // per returned pair
    std::vector<double> residual_exact;       // empty unless requested
    std::vector<double> residual_direction;   // final u_last
    Counters counters;
    bool converged = false;
    double perturbation_bound = 0.0; // accumulated deflation bound
    size_t locked_count = 0;
    std::vector<LockEvent> lock_events;
  };

  /// Shared Gaussian start vector so rKS and the deterministic baseline
  /// run from the same direction for a given seed.
  std::vector<double> random_start_vector(size_t n, std::uint64_t seed);

  /// The randomized Krylov-Schur eigensolver.
  SolverResult solve(const CsrMatrix& a, const SolverConfig& cfg);

} // namespace rks
