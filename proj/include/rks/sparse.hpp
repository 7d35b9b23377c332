#pragma once

//
// ... Standard header files
//
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace rks {

  using std::size_t;

  /// Square sparse operator in compressed-sparse-row form. Immutable
  /// after construction; spmv is thread-safe.
  struct CsrMatrix {
    size_t n = 0;
    std::vector<size_t> row_ptr; // n+1 offsets
    std::vector<size_t> col_idx; // column indices, strictly increasing per row
    std::vector<double> values;

    size_t nnz() const { return values.size(); }

    /// Max absolute column sum.
    double norm1() const;
  };

  struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
  };

  /// y = A * x.
  void spmv(const CsrMatrix& a, const double* x, double* y);
  std::vector<double> spmv(const CsrMatrix& a, const std::vector<double>& x);

  /// Build a CSR matrix from unordered triplets; duplicates are summed.
  CsrMatrix csr_from_triplets(size_t n,
                              std::vector<std::tuple<size_t, size_t, double>>
                                triplets);

  /**
   * @brief Parse a Matrix Market stream
   *        (`matrix coordinate real {general|symmetric}`).
   *
   * Symmetric storage is expanded to full, duplicates are summed,
   * 1-based indices converted. Throws ParseError with the line number
   * on malformed input; pattern/complex/integer fields are rejected.
   */
  CsrMatrix parse_matrix_market(std::istream& in);
  CsrMatrix read_matrix_market(const std::string& path);

  /// Coordinate-format writer (general), for round-trip tests.
  void write_matrix_market(const CsrMatrix& a, std::ostream& out);

  enum class SyntheticKind {
    Exponential,
    Logarithmic,
    HarmonicRoots,
    GeometricDecay,
  };

  /**
   * @brief Tridiagonal synthetic test matrix.
   *
   * Diagonal entries follow the chosen spectrum over n equispaced
   * points i in [2, 10] (endpoints included); sub/super-diagonals are
   * i.i.d. Normal(0,1) * noise_scale. Deterministic per seed. With
   * noise_scale = 0 the matrix is exactly diagonal, so its eigenvalues
   * are known and usable as ground truth.
   */
  struct SyntheticSpec {
    SyntheticKind kind = SyntheticKind::Exponential;
    size_t n = 2;
    double noise_scale = 0.01;
    std::uint64_t seed = 0;
  };

  CsrMatrix make_synthetic(const SyntheticSpec& spec);

  /// Diagonal values of the noise-free synthetic matrix, in index order.
  std::vector<double> synthetic_diagonal(SyntheticKind kind, size_t n);

} // namespace rks
