#pragma once

//
// ... Standard header files
//
#include <cstdint>
#include <vector>

//
// ... rks header files
//
#include <rks/dense_matrix.hpp>

namespace rks {

  /**
   * @brief Oblivious sparse-sign subspace embedding Omega (d x n).
   *
   * Each column holds zeta distinct row indices with random signs and
   * a global scale of 1/sqrt(zeta), so ||Omega e_i|| = 1 and
   * E||Omega x||^2 = ||x||^2. Construction is deterministic per seed.
   * Immutable after construction; apply/apply_block are thread-safe.
   */
  class SparseSignEmbedding {
  public:
    SparseSignEmbedding(size_t d, size_t n, size_t zeta, std::uint64_t seed);

    /// Degenerate embedding Omega = I (d = n, zeta = 1, unit scale):
    /// sketched quantities coincide with their l2 counterparts, which
    /// reduces the randomized algorithms to their classical forms.
    static SparseSignEmbedding identity(size_t n);

    size_t sketch_dim() const { return d_; }
    size_t ambient_dim() const { return n_; }
    size_t nnz_per_col() const { return zeta_; }
    std::uint64_t seed() const { return seed_; }
    double scale() const { return scale_; }

    const std::vector<size_t>& rows() const { return rows_; }
    const std::vector<std::int8_t>& signs() const { return signs_; }

    /// y = Omega * x (y has length d).
    void apply(const double* x, double* y) const;
    std::vector<double> apply(const std::vector<double>& x) const;

    /// Column-wise apply on an n-by-j block; out is d-by-j.
    DenseMatrix apply_block(const DenseMatrix& x) const;

    /// ||Omega x||_2.
    double sketch_norm(const double* x) const;
    double sketch_norm(const std::vector<double>& x) const;

  private:
    size_t d_ = 0;
    size_t n_ = 0;
    size_t zeta_ = 0;
    std::uint64_t seed_ = 0;
    double scale_ = 1.0;
    std::vector<size_t> rows_;       // n*zeta row indices
    std::vector<std::int8_t> signs_; // n*zeta signs in {-1,+1}
  };

  inline SparseSignEmbedding build_embedding(size_t d, size_t n, size_t zeta,
                                             std::uint64_t seed) {
    return SparseSignEmbedding(d, n, zeta, seed);
  }

  /**
   * @brief Measured distortion of Omega on span(basis).
   *
   * Orthonormalizes the columns, then returns max |lambda - 1| over the
   * eigenvalues of the sketched Gram matrix. This is the exact
   * epsilon such that Omega is an epsilon-embedding for the span.
   * Diagnostic only; the solver never gates on it.
   */
  double estimate_distortion(const SparseSignEmbedding& omega,
                             const DenseMatrix& basis);

} // namespace rks
