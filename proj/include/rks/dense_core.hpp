#pragma once

//
// ... Standard header files
//
#include <complex>
#include <functional>
#include <stdexcept>
#include <vector>

//
// ... rks header files
//
#include <rks/dense_matrix.hpp>

namespace rks {

  /// Hard numerical failure (iteration cap exceeded, singular solve,
  /// ill-conditioned block swap).
  struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
  };

  /**
   * @brief Thin Householder QR of a tall matrix.
   *
   * q has orthonormal columns, r is upper-triangular with nonnegative
   * diagonal (sign convention fixed for reproducibility).
   * rank_deficient reports any |r(i,i)| < 1e-14 * ||a||_F; the
   * factorization is still returned.
   */
  struct QrResult {
    DenseMatrix q;
    DenseMatrix r;
    bool rank_deficient = false;
    double min_diag = 0.0;
  };

  QrResult householder_qr(const DenseMatrix& a);

  /// Orthonormal similarity reduction to upper-Hessenberg form,
  /// q^T b q = h. Entries below the first subdiagonal are exact zeros.
  /// The accumulated q satisfies q e_1 = e_1.
  struct HessenbergResult {
    DenseMatrix q;
    DenseMatrix h;
  };

  HessenbergResult hessenberg_reduce(const DenseMatrix& b);

  /**
   * @brief Real Schur form b = q t q^T.
   *
   * t is quasi-upper-triangular: 1x1 blocks for real eigenvalues and
   * standardized 2x2 blocks (equal diagonal entries, opposite-sign
   * off-diagonal products) for complex conjugate pairs.
   * block_starts lists the first index of each diagonal block.
   */
  struct RealSchurForm {
    DenseMatrix q;
    DenseMatrix t;
    std::vector<size_t> block_starts;
  };

  /// Francis implicit double-shift QR on the Hessenberg form. Throws
  /// NumericalError after 30*m sweeps without convergence.
  RealSchurForm real_schur(const DenseMatrix& b);

  /// Eigenvalues read off the diagonal blocks of a quasi-triangular t,
  /// in diagonal (block) order.
  std::vector<std::complex<double>> schur_eigenvalues(const DenseMatrix& t);

  /// Diagonal block boundaries of a quasi-triangular matrix.
  std::vector<size_t> schur_block_starts(const DenseMatrix& t);

  /**
   * @brief Reorder a real Schur form so the selected eigenvalues occupy
   *        the leading diagonal blocks.
   *
   * The predicate must be conjugation-closed. Adjacent blocks are
   * swapped via small Sylvester solves; 2x2 blocks are never split.
   * Throws NumericalError if a swap system is ill-conditioned.
   */
  RealSchurForm reorder_schur(
    const RealSchurForm& s,
    const std::function<bool(std::complex<double>)>& selected);

  /// Same, with per-block keep flags (block order as in block_starts).
  RealSchurForm reorder_schur_blocks(const RealSchurForm& s,
                                     const std::vector<char>& keep);

  /// Ranked variant: blocks with rank >= 0 are moved to the front in
  /// ascending rank order; blocks with negative rank trail. Swaps of
  /// numerically coincident eigenvalues degrade to label exchanges.
  RealSchurForm reorder_schur_ranked(const RealSchurForm& s,
                                     const std::vector<int>& rank);

  /**
   * @brief Eigenpairs of a quasi-upper-triangular matrix.
   *
   * values follow diagonal block order; vectors are unit-norm columns
   * of an m-by-m complex matrix obtained by back-substitution.
   * clustered flags eigenvalues whose shifted system needed the
   * documented 1e-13*||t|| perturbation.
   */
  struct EigenPairsSmall {
    std::vector<std::complex<double>> values;
    std::vector<std::complex<double>> vectors; // m*m column-major
    size_t dim = 0;
    std::vector<char> clustered;

    const std::complex<double>* vec(size_t j) const {
      return vectors.data() + j * dim;
    }
  };

  EigenPairsSmall eig_quasi_triangular(const DenseMatrix& t);

  /**
   * @brief x * r^{-1} for upper-triangular r, computed by row-wise
   *        forward substitution (parallel over the rows of x).
   *
   * Throws NumericalError when some |r(i,i)| <= 1e-14 * ||r||_F.
   */
  DenseMatrix upper_tri_inverse_apply(const DenseMatrix& r,
                                      const DenseMatrix& x);

} // namespace rks
