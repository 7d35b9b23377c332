#pragma once

//
// ... Standard header files
//
#include <vector>

//
// ... rks header files
//
#include <rks/dense_core.hpp>
#include <rks/ritz.hpp>

namespace rks::detail {

  /// Contraction step shared by both solvers: Schur form of the small
  /// factor, selector-based choice of the leading block (conjugate
  /// pairs kept atomic, so k' may be k or k+/-1), stable reordering,
  /// and the transformed residual coupling.
  struct Contraction {
    DenseMatrix q12;           // composed orthonormal transform, j x j
    DenseMatrix t;             // reordered quasi-triangular, j x j
    std::vector<double> b_t;   // b_row^T * q12
    size_t k_prime = 0;        // retained order
  };

  Contraction contract_and_select(const DenseMatrix& b,
                                  const std::vector<double>& b_row,
                                  Selector selector, size_t k_want);

  /// Length of the leading prefix (in columns, whole blocks only) of a
  /// quasi-triangular t whose b_row entries are all within eta.
  size_t lockable_prefix(const DenseMatrix& t,
                         const std::vector<double>& b_row, double eta);

  /// Smallest block-closed leading prefix of a quasi-triangular t
  /// covering at least `count` columns (so a trailing 2x2 pair is
  /// never split).
  size_t block_prefix_count(const DenseMatrix& t, size_t count);

} // namespace rks::detail
