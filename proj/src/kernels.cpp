//
// ... Standard header files
//
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

//
// ... rks header files
//
#include <rks/kernels.hpp>

namespace rks::kernels {

  namespace {

    // Reduction chunk size. Fixed so that the summation order does not
    // depend on the thread count.
    constexpr size_t kChunk = 8192;

    std::atomic<int> g_thread_cap{0};

    int default_threads() {
#ifdef _OPENMP
      int t = omp_get_max_threads();
#else
      int t = 1;
#endif
      if (const char* env = std::getenv("RKS_THREADS")) {
        int v = std::atoi(env);
        if (v > 0 && v < t) { t = v; }
      }
      return t;
    }

    // Contiguous row range owned by block b out of nb.
    inline void block_range(size_t n, size_t nb, size_t b, size_t& lo,
                            size_t& hi) {
      size_t base = n / nb;
      size_t rem = n % nb;
      lo = b * base + std::min(b, rem);
      hi = lo + base + (b < rem ? 1 : 0);
    }

  } // namespace

  int thread_count() {
    int cap = g_thread_cap.load(std::memory_order_relaxed);
    if (cap > 0) { return cap; }
    cap = default_threads();
    g_thread_cap.store(cap, std::memory_order_relaxed);
    return cap;
  }

  void set_thread_cap(int cap) {
    g_thread_cap.store(cap > 0 ? cap : default_threads(),
                       std::memory_order_relaxed);
  }

  // ------------------------------------------------------------------
  // Serial reference kernels
  // ------------------------------------------------------------------

  namespace serial {

    void spmv(size_t n, const size_t* row_ptr, const size_t* col_idx,
              const double* val, const double* x, double* y) {
      for (size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (size_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p) {
          acc += val[p] * x[col_idx[p]];
        }
        y[i] = acc;
      }
    }

    void gemv_acc(size_t n, size_t j, const double* m, const double* c,
                  double sign, double* y) {
      for (size_t p = 0; p < j; ++p) {
        const double cp = sign * c[p];
        const double* col = m + p * n;
        for (size_t i = 0; i < n; ++i) {
          y[i] += cp * col[i];
        }
      }
    }

    void gemm_nk(size_t n, size_t j, size_t k, const double* m,
                 const double* w, double* out) {
      std::fill(out, out + n * k, 0.0);
      for (size_t q = 0; q < k; ++q) {
        double* dst = out + q * n;
        for (size_t p = 0; p < j; ++p) {
          const double wpq = w[p + q * j];
          const double* col = m + p * n;
          for (size_t i = 0; i < n; ++i) {
            dst[i] += wpq * col[i];
          }
        }
      }
    }

    void trsm_right_upper(size_t n, size_t j, double* x, const double* r) {
      // Row-wise: for each row, x_row <- x_row * R^{-1} by forward
      // substitution over the columns.
      for (size_t i = 0; i < n; ++i) {
        for (size_t q = 0; q < j; ++q) {
          double acc = x[i + q * n];
          for (size_t p = 0; p < q; ++p) {
            acc -= x[i + p * n] * r[p + q * j];
          }
          x[i + q * n] = acc / r[q + q * j];
        }
      }
    }

    double dot(size_t n, const double* a, const double* b) {
      double acc = 0.0;
      for (size_t i = 0; i < n; ++i) {
        acc += a[i] * b[i];
      }
      return acc;
    }

    double norm2(size_t n, const double* a) {
      return std::sqrt(dot(n, a, a));
    }

    void axpy(size_t n, double alpha, const double* x, double* y) {
      for (size_t i = 0; i < n; ++i) {
        y[i] += alpha * x[i];
      }
    }

    void scal(size_t n, double alpha, double* x) {
      for (size_t i = 0; i < n; ++i) {
        x[i] *= alpha;
      }
    }

    void sketch_apply(size_t n, size_t d, size_t zeta, const size_t* rows,
                      const std::int8_t* signs, double scale, const double* x,
                      double* y) {
      std::fill(y, y + d, 0.0);
      for (size_t i = 0; i < n; ++i) {
        const double xi = x[i];
        if (xi == 0.0) { continue; }
        const size_t off = i * zeta;
        for (size_t t = 0; t < zeta; ++t) {
          y[rows[off + t]] += static_cast<double>(signs[off + t]) * xi;
        }
      }
      for (size_t r = 0; r < d; ++r) {
        y[r] *= scale;
      }
    }

  } // namespace serial

  // ------------------------------------------------------------------
  // OpenMP kernels
  // ------------------------------------------------------------------

  void spmv(size_t n, const size_t* row_ptr, const size_t* col_idx,
            const double* val, const double* x, double* y) {
#ifdef _OPENMP
    const int nt = thread_count();
    if (nt > 1 && n > 2 * kChunk) {
#pragma omp parallel for num_threads(nt) schedule(static)
      for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
        double acc = 0.0;
        for (size_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p) {
          acc += val[p] * x[col_idx[p]];
        }
        y[i] = acc;
      }
      return;
    }
#endif
    serial::spmv(n, row_ptr, col_idx, val, x, y);
  }

  void gemv_acc(size_t n, size_t j, const double* m, const double* c,
                double sign, double* y) {
#ifdef _OPENMP
    const int nt = thread_count();
    if (nt > 1 && n * j > 4 * kChunk) {
      const size_t nb = static_cast<size_t>(nt);
#pragma omp parallel for num_threads(nt) schedule(static)
      for (std::int64_t b = 0; b < static_cast<std::int64_t>(nb); ++b) {
        size_t lo, hi;
        block_range(n, nb, static_cast<size_t>(b), lo, hi);
        for (size_t p = 0; p < j; ++p) {
          const double cp = sign * c[p];
          const double* col = m + p * n;
          for (size_t i = lo; i < hi; ++i) {
            y[i] += cp * col[i];
          }
        }
      }
      return;
    }
#endif
    serial::gemv_acc(n, j, m, c, sign, y);
  }

  void gemm_nk(size_t n, size_t j, size_t k, const double* m,
               const double* w, double* out) {
#ifdef _OPENMP
    const int nt = thread_count();
    if (nt > 1 && n * j * k > 8 * kChunk) {
      const size_t nb = static_cast<size_t>(nt);
#pragma omp parallel for num_threads(nt) schedule(static)
      for (std::int64_t b = 0; b < static_cast<std::int64_t>(nb); ++b) {
        size_t lo, hi;
        block_range(n, nb, static_cast<size_t>(b), lo, hi);
        for (size_t q = 0; q < k; ++q) {
          double* dst = out + q * n;
          std::fill(dst + lo, dst + hi, 0.0);
          for (size_t p = 0; p < j; ++p) {
            const double wpq = w[p + q * j];
            const double* col = m + p * n;
            for (size_t i = lo; i < hi; ++i) {
              dst[i] += wpq * col[i];
            }
          }
        }
      }
      return;
    }
#endif
    serial::gemm_nk(n, j, k, m, w, out);
  }

  void trsm_right_upper(size_t n, size_t j, double* x, const double* r) {
#ifdef _OPENMP
    const int nt = thread_count();
    if (nt > 1 && n * j > 4 * kChunk) {
#pragma omp parallel for num_threads(nt) schedule(static)
      for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
        for (size_t q = 0; q < j; ++q) {
          double acc = x[i + q * n];
          for (size_t p = 0; p < q; ++p) {
            acc -= x[i + p * n] * r[p + q * j];
          }
          x[i + q * n] = acc / r[q + q * j];
        }
      }
      return;
    }
#endif
    serial::trsm_right_upper(n, j, x, r);
  }

  double dot(size_t n, const double* a, const double* b) {
    const size_t nchunks = (n + kChunk - 1) / kChunk;
#ifdef _OPENMP
    const int nt = thread_count();
    // Short reductions are memory-cheap; the parallel region only pays
    // off for long vectors. Both paths share the chunked order.
    if (nt > 1 && nchunks > 32) {
      std::vector<double> partial(nchunks, 0.0);
#pragma omp parallel for num_threads(nt) schedule(static)
      for (std::int64_t c = 0; c < static_cast<std::int64_t>(nchunks); ++c) {
        const size_t lo = static_cast<size_t>(c) * kChunk;
        const size_t hi = std::min(lo + kChunk, n);
        double acc = 0.0;
        for (size_t i = lo; i < hi; ++i) {
          acc += a[i] * b[i];
        }
        partial[static_cast<size_t>(c)] = acc;
      }
      double total = 0.0;
      for (size_t c = 0; c < nchunks; ++c) {
        total += partial[c];
      }
      return total;
    }
#endif
    // Same chunked order as the parallel path so results match bitwise.
    double total = 0.0;
    for (size_t c = 0; c < nchunks; ++c) {
      const size_t lo = c * kChunk;
      const size_t hi = std::min(lo + kChunk, n);
      double acc = 0.0;
      for (size_t i = lo; i < hi; ++i) {
        acc += a[i] * b[i];
      }
      total += acc;
    }
    return total;
  }

  double norm2(size_t n, const double* a) {
    return std::sqrt(dot(n, a, a));
  }

  void axpy(size_t n, double alpha, const double* x, double* y) {
#ifdef _OPENMP
    const int nt = thread_count();
    if (nt > 1 && n > 4 * kChunk) {
#pragma omp parallel for num_threads(nt) schedule(static)
      for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
        y[i] += alpha * x[i];
      }
      return;
    }
#endif
    serial::axpy(n, alpha, x, y);
  }

  void scal(size_t n, double alpha, double* x) {
#ifdef _OPENMP
    const int nt = thread_count();
    if (nt > 1 && n > 4 * kChunk) {
#pragma omp parallel for num_threads(nt) schedule(static)
      for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
        x[i] *= alpha;
      }
      return;
    }
#endif
    serial::scal(n, alpha, x);
  }

  void sketch_apply(size_t n, size_t d, size_t zeta, const size_t* rows,
                    const std::int8_t* signs, double scale, const double* x,
                    double* y) {
    const size_t cols_per_chunk = kChunk;
    const size_t nchunks = (n + cols_per_chunk - 1) / cols_per_chunk;
    if (nchunks <= 1) {
      serial::sketch_apply(n, d, zeta, rows, signs, scale, x, y);
      return;
    }
    // Chunked accumulation in both the serial and parallel paths so the
    // result does not depend on the thread count.
    std::vector<double> partial(nchunks * d, 0.0);
#ifdef _OPENMP
#pragma omp parallel for num_threads(thread_count()) schedule(static)
#endif
    for (std::int64_t c = 0; c < static_cast<std::int64_t>(nchunks); ++c) {
      const size_t lo = static_cast<size_t>(c) * cols_per_chunk;
      const size_t hi = std::min(lo + cols_per_chunk, n);
      double* part = partial.data() + static_cast<size_t>(c) * d;
      for (size_t i = lo; i < hi; ++i) {
        const double xi = x[i];
        if (xi == 0.0) { continue; }
        const size_t off = i * zeta;
        for (size_t t = 0; t < zeta; ++t) {
          part[rows[off + t]] += static_cast<double>(signs[off + t]) * xi;
        }
      }
    }
    std::fill(y, y + d, 0.0);
    for (size_t c = 0; c < nchunks; ++c) {
      const double* part = partial.data() + c * d;
      for (size_t r = 0; r < d; ++r) {
        y[r] += part[r];
      }
    }
    for (size_t r = 0; r < d; ++r) {
      y[r] *= scale;
    }
  }

} // namespace rks::kernels
