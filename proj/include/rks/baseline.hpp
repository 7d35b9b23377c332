#pragma once

//
// ... rks header files
//
#include <rks/solver.hpp>

namespace rks {

  /// Krylov decomposition with an l2-orthonormal basis, used by the
  /// deterministic baseline. Same residual identity as the sketched
  /// variant with orthonormality in place of sketch-orthonormality.
  struct OrthonormalKrylovDecomposition {
    DenseMatrix u_basis;        // n x j, ||U^T U - I||_F <= 1e-10
    DenseMatrix b;              // j x j
    std::vector<double> u_last; // n, unit norm
    std::vector<double> b_row;  // j
    DenseMatrix coupling;       // q x j toward locked vectors

    size_t order() const { return u_basis.cols(); }
  };

  /**
   * @brief Deterministic Krylov-Schur baseline.
   *
   * Same restart loop and contract as the randomized solver with the
   * embedding conceptually the identity: classical Gram-Schmidt with a
   * second full pass (CGS2) for the expansion, exact residual
   * estimates |b_row^T y| / |theta| with ||u_last|| = 1. Counter
   * semantics match rks so cost comparisons are apples-to-apples.
   * sketch-related config fields are ignored.
   */
  SolverResult solve_deterministic(const CsrMatrix& a,
                                   const SolverConfig& cfg);

} // namespace rks
