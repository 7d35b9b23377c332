#pragma once

//
// ... Standard header files
//
#include <complex>
#include <vector>

//
// ... rks header files
//
#include <rks/dense_matrix.hpp>

namespace rks {

  enum class Selector {
    LargestModulus,
    SmallestModulus,
    LargestReal,
    SmallestReal,
  };

  /// Strict ordering "a ranks before b" under the selector, with the
  /// deterministic tie-break (modulus, real part, imag >= 0 first).
  bool selector_prefers(Selector sel, std::complex<double> a,
                        std::complex<double> b);

  /**
   * @brief Indices of the k selector-best values, conjugation-closed.
   *
   * values must come from a real quasi-triangular matrix (conjugate
   * pairs adjacent, +imag first). If the cut falls inside a pair, the
   * pair is kept (k+1) when its better member ranks within the top k,
   * else dropped (k-1). Returned indices are sorted ascending.
   */
  std::vector<size_t> select_ritz(
    const std::vector<std::complex<double>>& values, Selector sel, size_t k);

  /// Ritz pair of the small factor: eigenvalue, small eigenvector, and
  /// the residual estimate |b_row^T y| / |theta| that is available at
  /// negligible cost. residual_exact is filled at finalization only.
  struct RitzPair {
    std::complex<double> value;
    std::vector<std::complex<double>> y;
    double residual_estimate = 0.0;
    double residual_exact = -1.0; // negative = not computed
    bool clustered = false;
  };

  /**
   * @brief Residual estimates for every eigenpair of a quasi-triangular
   *        factor t with residual coupling b_row.
   *
   * estimate = |b_row^T y| / |theta|; for |theta| below 1e-14*||t||
   * (relevant under SmallestModulus) the non-relative bound |b_row^T y|
   * is used instead.
   */
  std::vector<RitzPair> residual_estimates(const DenseMatrix& t,
                                           const std::vector<double>& b_row);

} // namespace rks
