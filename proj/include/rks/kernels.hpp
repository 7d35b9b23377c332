#pragma once

//
// ... Standard header files
//
#include <cstddef>
#include <cstdint>

namespace rks::kernels {

  using std::size_t;

  /**
   * @brief Number of threads the parallel kernels may use.
   *
   * Honors the RKS_THREADS environment variable (read once) as an
   * upper cap on the OpenMP default. Returns 1 when OpenMP is not
   * available.
   */
  int thread_count();

  /// Override the thread cap programmatically (tests and benchmark).
  void set_thread_cap(int cap);

  //
  // Large-dimension kernels. All of them are bit-deterministic for any
  // thread count: writes are partitioned by output index and every
  // reduction uses fixed-size chunks summed in index order.
  //
  // Matrices are column-major; `m` points at an n-by-j block whose p-th
  // column starts at m + p*n.
  //

  /// y = A*x for an n-by-n CSR matrix.
  void spmv(size_t n, const size_t* row_ptr, const size_t* col_idx,
            const double* val, const double* x, double* y);

  /// y += sign * M*c, with M n-by-j column-major and c of length j.
  void gemv_acc(size_t n, size_t j, const double* m, const double* c,
                double sign, double* y);

  /// out = M*W, with M n-by-j, W j-by-k, out n-by-k (no aliasing).
  void gemm_nk(size_t n, size_t j, size_t k, const double* m,
               const double* w, double* out);

  /// In-place X <- X * R^{-1}, X n-by-j column-major, R j-by-j
  /// upper-triangular column-major. Row-wise forward substitution.
  void trsm_right_upper(size_t n, size_t j, double* x, const double* r);

  /// Chunked deterministic dot product.
  double dot(size_t n, const double* a, const double* b);

  double norm2(size_t n, const double* a);

  /// y += alpha * x
  void axpy(size_t n, double alpha, const double* x, double* y);

  /// x *= alpha
  void scal(size_t n, double alpha, double* x);

  /**
   * @brief y = scale * Omega * x for a sparse-sign operator.
   *
   * Column i of Omega holds `zeta` (row, sign) pairs stored at
   * rows[i*zeta .. ], signs in {-1,+1}. Output y has length d.
   * Parallelized over fixed column chunks with per-chunk partial
   * d-vectors combined in chunk order.
   */
  void sketch_apply(size_t n, size_t d, size_t zeta, const size_t* rows,
                    const std::int8_t* signs, double scale, const double* x,
                    double* y);

  //
  // Serial reference implementations, kept for correctness tests and
  // the kernel benchmark.
  //
  namespace serial {

    void spmv(size_t n, const size_t* row_ptr, const size_t* col_idx,
              const double* val, const double* x, double* y);
    void gemv_acc(size_t n, size_t j, const double* m, const double* c,
                  double sign, double* y);
    void gemm_nk(size_t n, size_t j, size_t k, const double* m,
                 const double* w, double* out);
    void trsm_right_upper(size_t n, size_t j, double* x, const double* r);
    double dot(size_t n, const double* a, const double* b);
    double norm2(size_t n, const double* a);
    void axpy(size_t n, double alpha, const double* x, double* y);
    void scal(size_t n, double alpha, double* x);
    void sketch_apply(size_t n, size_t d, size_t zeta, const size_t* rows,
                      const std::int8_t* signs, double scale, const double* x,
                      double* y);

  } // namespace serial

} // namespace rks::kernels
