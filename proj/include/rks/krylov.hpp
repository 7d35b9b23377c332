#pragma once

//
// ... Standard header files
//
#include <cstdint>
#include <vector>

//
// ... rks header files
//
#include <rks/dense_core.hpp>
#include <rks/dense_matrix.hpp>
#include <rks/sketch.hpp>
#include <rks/sparse.hpp>

namespace rks {

  /// Large-dimension operation ledger, shared by both solvers so cost
  /// comparisons are apples-to-apples. big_axpy counts every n-length
  /// vector update pass (axpy or scale); big_dot counts n-length inner
  /// products; sketch counts applications of Omega to an n-vector.
  struct Counters {
    size_t spmv_count = 0;
    size_t big_axpy_count = 0;
    size_t big_dot_count = 0;
    size_t sketch_count = 0;
    size_t restarts = 0;
  };

  /// Sketched basis became numerically dependent; the caller restarts.
  struct BasisDegenerate : NumericalError {
    using NumericalError::NumericalError;
  };

  /// Converged sketch-orthonormal Schur vectors frozen out of the
  /// active decomposition. t_locked stays quasi-upper-triangular as
  /// blocks are appended together with their coupling columns.
  struct LockedSet {
    DenseMatrix u_locked; // n x q
    DenseMatrix s_locked; // d x q
    DenseMatrix t_locked; // q x q

    size_t count() const { return u_locked.cols(); }
  };

  /**
   * @brief Sketch-orthonormal Krylov decomposition
   *        A*U = U*B + u_last*b_row^T, with (U u_last) sketch-orthonormal
   *        and S = Omega*U maintained incrementally (U is never
   *        re-sketched).
   *
   * When vectors are locked, the exact identity becomes
   *        A*U = U_locked*coupling + U*B + u_last*b_row^T
   * and `coupling` (q x j) carries the locked-block columns.
   *
   * Single-owner mutable state; distinct decompositions may be used
   * concurrently.
   */
  struct SketchedKrylovDecomposition {
    DenseMatrix u_basis;         // n x j
    DenseMatrix s_basis;         // d x j
    DenseMatrix b;               // j x j
    std::vector<double> u_last;  // n
    std::vector<double> s_last;  // d
    std::vector<double> b_row;   // j
    DenseMatrix coupling;        // q x j (q = locked count, possibly 0)

    size_t order() const { return u_basis.cols(); }
  };

  struct ExtendOptions {
    double whiten_tol = 1e-8;    // orthonormality defect that triggers whiten
    double breakdown_tol = 1e-12;
    double reorth_threshold = 0.7;
  };

  enum class ExtendStatus {
    Completed,
    HappyBreakdown, // expansion residual vanished: invariant subspace
  };

  /// Order-0 seed state with u_last = u0 / ||Omega u0||.
  /// Throws std::invalid_argument when the sketch norm of u0 is below
  /// 1e-14 (resample upstream).
  SketchedKrylovDecomposition init_decomposition(
    const SparseSignEmbedding& omega, const std::vector<double>& u0,
    Counters* counters = nullptr);

  /**
   * @brief Randomized Arnoldi expansion to the target order.
   *
   * Each step applies A, sketch-orthogonalizes against the locked set
   * (when present) and the current basis with coefficients taken from
   * the sketches alone, then performs the single high-dimensional
   * update. A second sketch-space coefficient refinement runs when the
   * projected fraction ||S^T z|| / ||z|| exceeds reorth_threshold.
   * Whitening triggers automatically above whiten_tol.
   */
  ExtendStatus extend(SketchedKrylovDecomposition& dec, const CsrMatrix& a,
                      const SparseSignEmbedding& omega, size_t target_order,
                      const LockedSet* locked = nullptr,
                      const ExtendOptions& opts = {},
                      Counters* counters = nullptr);

  /**
   * @brief Whitening re-orthogonalization.
   *
   * QR-factorizes the sketch S = QR and applies R^{-1} to the basis as
   * a similarity: S <- Q, U <- U R^{-1}, B <- R B R^{-1},
   * b_row^T <- b_row^T R^{-1}. Structure-preserving; Ritz values are
   * unchanged. Throws BasisDegenerate when R is near-singular.
   */
  void whiten(SketchedKrylovDecomposition& dec, Counters* counters = nullptr);

  /// Randomized Arnoldi factorization A*V = V*H + beta*v_last*e_j^T
  /// equivalent to a sketch-orthonormal Krylov decomposition.
  struct ArnoldiForm {
    DenseMatrix v_basis;
    DenseMatrix h; // exactly upper-Hessenberg
    double beta = 0.0;
    std::vector<double> v_last;
  };

  /// Convert to randomized Arnoldi form via a Householder reduction of
  /// b_row to beta*e_j followed by a Hessenberg reduction that leaves
  /// e_j invariant. Spans are preserved. Throws NumericalError when
  /// b_row vanishes (degenerate translation).
  ArnoldiForm to_arnoldi(const SketchedKrylovDecomposition& dec);

  /// Similarity transform by a nonsingular M: U <- U*M, S <- S*M,
  /// B <- M^{-1} B M, b_row <- M^T b_row. Preserves the decomposition
  /// identity and the Ritz spectrum (used by restarts and in tests).
  void transform_basis(SketchedKrylovDecomposition& dec, const DenseMatrix& m,
                       Counters* counters = nullptr);

  /// Replace u_last with a fresh pseudo-random direction sketched-
  /// orthogonal to the basis (stagnation rescue; perturbs the
  /// decomposition identity at the level of ||b_row||). Returns false
  /// if no independent direction could be drawn.
  bool reseed_direction(SketchedKrylovDecomposition& dec,
                        const SparseSignEmbedding& omega, std::uint64_t salt,
                        Counters* counters = nullptr);

  //
  // Diagnostics (dense; intended for tests and debug checks).
  //

  /// ||A U - U_locked G - U B - u_last b_row^T||_F via per-column spmv.
  double decomposition_residual(const SketchedKrylovDecomposition& dec,
                                const CsrMatrix& a,
                                const LockedSet* locked = nullptr);

  /// max(||S - Omega U||_F / ||S||_F, ||s_last - Omega u_last||).
  double sketch_consistency_defect(const SketchedKrylovDecomposition& dec,
                                   const SparseSignEmbedding& omega);

  /// ||(S s)^T (S s) - I||_F.
  double sketch_orthonormality_defect(const SketchedKrylovDecomposition& dec);

} // namespace rks
