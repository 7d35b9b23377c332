//
// ... Standard header files
//
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

//
// ... rks header files
//
#include <rks/dense_core.hpp>
#include <rks/kernels.hpp>

namespace rks {

  namespace {

    constexpr double kUlp = std::numeric_limits<double>::epsilon();

    double sign_of(double x) { return x >= 0.0 ? 1.0 : -1.0; }

  } // namespace

  // ------------------------------------------------------------------
  // DenseMatrix helpers
  // ------------------------------------------------------------------

  DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    assert(a.cols() == b.rows());
    DenseMatrix c(a.rows(), b.cols());
    for (size_t q = 0; q < b.cols(); ++q) {
      double* dst = c.col(q);
      for (size_t p = 0; p < a.cols(); ++p) {
        const double w = b(p, q);
        if (w == 0.0) { continue; }
        const double* col = a.col(p);
        for (size_t i = 0; i < a.rows(); ++i) {
          dst[i] += w * col[i];
        }
      }
    }
    return c;
  }

  DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
    assert(a.rows() == b.rows());
    DenseMatrix c(a.cols(), b.cols());
    for (size_t q = 0; q < b.cols(); ++q) {
      for (size_t p = 0; p < a.cols(); ++p) {
        double acc = 0.0;
        const double* ca = a.col(p);
        const double* cb = b.col(q);
        for (size_t i = 0; i < a.rows(); ++i) {
          acc += ca[i] * cb[i];
        }
        c(p, q) = acc;
      }
    }
    return c;
  }

  DenseMatrix transpose(const DenseMatrix& a) {
    DenseMatrix t(a.cols(), a.rows());
    for (size_t j = 0; j < a.cols(); ++j) {
      for (size_t i = 0; i < a.rows(); ++i) {
        t(j, i) = a(i, j);
      }
    }
    return t;
  }

  double frobenius_norm(const DenseMatrix& a) {
    double acc = 0.0;
    const double* d = a.data();
    for (size_t i = 0; i < a.rows() * a.cols(); ++i) {
      acc += d[i] * d[i];
    }
    return std::sqrt(acc);
  }

  double norm1(const DenseMatrix& a) {
    double best = 0.0;
    for (size_t j = 0; j < a.cols(); ++j) {
      double s = 0.0;
      const double* col = a.col(j);
      for (size_t i = 0; i < a.rows(); ++i) {
        s += std::abs(col[i]);
      }
      best = std::max(best, s);
    }
    return best;
  }

  double orthonormality_defect(const DenseMatrix& a) {
    DenseMatrix g = matmul_tn(a, a);
    for (size_t i = 0; i < g.rows(); ++i) {
      g(i, i) -= 1.0;
    }
    return frobenius_norm(g);
  }

  // ------------------------------------------------------------------
  // Householder QR
  // ------------------------------------------------------------------

  QrResult householder_qr(const DenseMatrix& a) {
    const size_t d = a.rows();
    const size_t j = a.cols();
    if (d < j) {
      throw std::invalid_argument("householder_qr: matrix must be tall");
    }

    DenseMatrix work = a;
    const double anorm = frobenius_norm(a);

    // Reflector vectors, stored compactly: v[k] has d-k entries.
    std::vector<std::vector<double>> vs(j);

    for (size_t k = 0; k < j; ++k) {
      std::vector<double>& v = vs[k];
      v.assign(d - k, 0.0);
      double normx = 0.0;
      for (size_t i = k; i < d; ++i) {
        normx += work(i, k) * work(i, k);
      }
      normx = std::sqrt(normx);
      if (normx == 0.0) { continue; }

      const double alpha = -sign_of(work(k, k)) * normx;
      for (size_t i = k; i < d; ++i) {
        v[i - k] = work(i, k);
      }
      v[0] -= alpha;
      double vnorm = 0.0;
      for (double t : v) {
        vnorm += t * t;
      }
      vnorm = std::sqrt(vnorm);
      if (vnorm == 0.0) { continue; }
      for (double& t : v) {
        t /= vnorm;
      }

      for (size_t c = k; c < j; ++c) {
        double dotv = 0.0;
        for (size_t i = k; i < d; ++i) {
          dotv += v[i - k] * work(i, c);
        }
        dotv *= 2.0;
        for (size_t i = k; i < d; ++i) {
          work(i, c) -= dotv * v[i - k];
        }
      }
      work(k, k) = alpha;
      for (size_t i = k + 1; i < d; ++i) {
        work(i, k) = 0.0;
      }
    }

    QrResult out;
    out.r = DenseMatrix(j, j);
    for (size_t c = 0; c < j; ++c) {
      for (size_t i = 0; i <= c; ++i) {
        out.r(i, c) = work(i, c);
      }
    }

    // Thin q: apply the reflectors to the leading columns of I.
    out.q = DenseMatrix(d, j);
    for (size_t c = 0; c < j; ++c) {
      out.q(c, c) = 1.0;
    }
    for (size_t c = 0; c < j; ++c) {
      double* qc = out.q.col(c);
      for (size_t k = j; k-- > 0;) {
        const std::vector<double>& v = vs[k];
        if (v.empty()) { continue; }
        double dotv = 0.0;
        for (size_t i = k; i < d; ++i) {
          dotv += v[i - k] * qc[i];
        }
        dotv *= 2.0;
        for (size_t i = k; i < d; ++i) {
          qc[i] -= dotv * v[i - k];
        }
      }
    }

    // Nonnegative diagonal convention.
    out.min_diag = std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < j; ++k) {
      if (out.r(k, k) < 0.0) {
        for (size_t c = k; c < j; ++c) {
          out.r(k, c) = -out.r(k, c);
        }
        double* qc = out.q.col(k);
        for (size_t i = 0; i < d; ++i) {
          qc[i] = -qc[i];
        }
      }
      out.min_diag = std::min(out.min_diag, out.r(k, k));
    }
    out.rank_deficient = out.min_diag < 1e-14 * anorm;
    return out;
  }

  // ------------------------------------------------------------------
  // Hessenberg reduction
  // ------------------------------------------------------------------

  HessenbergResult hessenberg_reduce(const DenseMatrix& b) {
    if (b.rows() != b.cols()) {
      throw std::invalid_argument("hessenberg_reduce: matrix must be square");
    }
    const size_t m = b.rows();
    HessenbergResult out{DenseMatrix::identity(m), b};
    if (m < 3) { return out; }

    DenseMatrix& h = out.h;
    DenseMatrix& q = out.q;
    std::vector<double> v(m);

    for (size_t k = 0; k + 2 < m; ++k) {
      double tail = 0.0;
      for (size_t i = k + 2; i < m; ++i) {
        tail += h(i, k) * h(i, k);
      }
      if (tail == 0.0) { continue; } // column already reduced
      const double normx =
        std::sqrt(tail + h(k + 1, k) * h(k + 1, k));

      const double alpha = -sign_of(h(k + 1, k)) * normx;
      double vnorm = 0.0;
      for (size_t i = k + 1; i < m; ++i) {
        v[i] = h(i, k);
      }
      v[k + 1] -= alpha;
      for (size_t i = k + 1; i < m; ++i) {
        vnorm += v[i] * v[i];
      }
      vnorm = std::sqrt(vnorm);
      if (vnorm == 0.0) { continue; }
      for (size_t i = k + 1; i < m; ++i) {
        v[i] /= vnorm;
      }

      // Left: rows k+1..m-1.
      for (size_t c = k; c < m; ++c) {
        double dotv = 0.0;
        for (size_t i = k + 1; i < m; ++i) {
          dotv += v[i] * h(i, c);
        }
        dotv *= 2.0;
        for (size_t i = k + 1; i < m; ++i) {
          h(i, c) -= dotv * v[i];
        }
      }
      // Right: columns k+1..m-1.
      for (size_t r = 0; r < m; ++r) {
        double dotv = 0.0;
        for (size_t i = k + 1; i < m; ++i) {
          dotv += h(r, i) * v[i];
        }
        dotv *= 2.0;
        for (size_t i = k + 1; i < m; ++i) {
          h(r, i) -= dotv * v[i];
        }
      }
      // Accumulate q; columns k+1..m-1 only, so q e_1 = e_1 holds.
      for (size_t r = 0; r < m; ++r) {
        double dotv = 0.0;
        for (size_t i = k + 1; i < m; ++i) {
          dotv += q(r, i) * v[i];
        }
        dotv *= 2.0;
        for (size_t i = k + 1; i < m; ++i) {
          q(r, i) -= dotv * v[i];
        }
      }

      h(k + 1, k) = alpha;
      for (size_t i = k + 2; i < m; ++i) {
        h(i, k) = 0.0;
      }
    }
    return out;
  }

  // ------------------------------------------------------------------
  // Real Schur form: Francis double-shift QR with accumulation
  // ------------------------------------------------------------------

  namespace {

    // Apply the 3 (or 2) element reflector v to H and Q for the bulge
    // chase step at position k of window [lo, hi].
    void apply_bulge_reflector(DenseMatrix& h, DenseMatrix& q, size_t m,
                               size_t lo, size_t hi, size_t k, double x,
                               double y, double z, size_t len) {
      double v0 = 0.0, v1 = 0.0, v2 = 0.0;
      const double normx = len == 3 ? std::sqrt(x * x + y * y + z * z)
                                    : std::sqrt(x * x + y * y);
      if (normx == 0.0) { return; }
      v0 = x + sign_of(x) * normx;
      v1 = y;
      v2 = len == 3 ? z : 0.0;
      const double vnorm = std::sqrt(v0 * v0 + v1 * v1 + v2 * v2);
      if (vnorm == 0.0) { return; }
      v0 /= vnorm;
      v1 /= vnorm;
      v2 /= vnorm;

      const size_t cstart = k > lo ? k - 1 : lo;
      for (size_t c = cstart; c < m; ++c) {
        double dotv = v0 * h(k, c) + v1 * h(k + 1, c);
        if (len == 3) { dotv += v2 * h(k + 2, c); }
        dotv *= 2.0;
        h(k, c) -= dotv * v0;
        h(k + 1, c) -= dotv * v1;
        if (len == 3) { h(k + 2, c) -= dotv * v2; }
      }
      const size_t rend = std::min(k + 3, hi);
      for (size_t r = 0; r <= rend; ++r) {
        double dotv = h(r, k) * v0 + h(r, k + 1) * v1;
        if (len == 3) { dotv += h(r, k + 2) * v2; }
        dotv *= 2.0;
        h(r, k) -= dotv * v0;
        h(r, k + 1) -= dotv * v1;
        if (len == 3) { h(r, k + 2) -= dotv * v2; }
      }
      for (size_t r = 0; r < m; ++r) {
        double dotv = q(r, k) * v0 + q(r, k + 1) * v1;
        if (len == 3) { dotv += q(r, k + 2) * v2; }
        dotv *= 2.0;
        q(r, k) -= dotv * v0;
        q(r, k + 1) -= dotv * v1;
        if (len == 3) { q(r, k + 2) -= dotv * v2; }
      }
    }

    void francis_sweep(DenseMatrix& h, DenseMatrix& q, size_t m, size_t lo,
                       size_t hi, double s, double t) {
      double x = h(lo, lo) * h(lo, lo) + h(lo, lo + 1) * h(lo + 1, lo) -
                 s * h(lo, lo) + t;
      double y = h(lo + 1, lo) * (h(lo, lo) + h(lo + 1, lo + 1) - s);
      double z = h(lo + 1, lo) * h(lo + 2, lo + 1);

      for (size_t k = lo; k + 2 <= hi; ++k) {
        apply_bulge_reflector(h, q, m, lo, hi, k, x, y, z, 3);
        x = h(k + 1, k);
        y = h(k + 2, k);
        z = k + 3 <= hi ? h(k + 3, k) : 0.0;
      }
      apply_bulge_reflector(h, q, m, lo, hi, hi - 1, x, y, 0.0, 2);

      // The bulge leaves rounding-level fill below the subdiagonal.
      for (size_t c = lo; c + 2 <= hi; ++c) {
        for (size_t r = c + 2; r <= hi; ++r) {
          h(r, c) = 0.0;
        }
      }
    }

    // Apply the rotation [[cs, -sn], [sn, cs]] as a similarity on
    // rows/columns (i, i+1) of h, accumulating into q.
    void apply_rotation(DenseMatrix& h, DenseMatrix& q, size_t m, size_t i,
                        double cs, double sn) {
      for (size_t c = 0; c < m; ++c) {
        const double a = h(i, c);
        const double b = h(i + 1, c);
        h(i, c) = cs * a + sn * b;
        h(i + 1, c) = -sn * a + cs * b;
      }
      for (size_t r = 0; r < m; ++r) {
        const double a = h(r, i);
        const double b = h(r, i + 1);
        h(r, i) = cs * a + sn * b;
        h(r, i + 1) = -sn * a + cs * b;
      }
      for (size_t r = 0; r < m; ++r) {
        const double a = q(r, i);
        const double b = q(r, i + 1);
        q(r, i) = cs * a + sn * b;
        q(r, i + 1) = -sn * a + cs * b;
      }
    }

    // Bring the 2x2 block at (i, i+1) to standard form: split it when
    // its eigenvalues are real, otherwise rotate to equal diagonal
    // entries so the eigenvalues read off as a +/- i*sqrt(-bc).
    void standardize_block(DenseMatrix& h, DenseMatrix& q, size_t m,
                           size_t i) {
      const double a = h(i, i);
      const double b = h(i, i + 1);
      const double c = h(i + 1, i);
      const double d = h(i + 1, i + 1);
      const double disc = (a - d) * (a - d) + 4.0 * b * c;

      if (disc >= 0.0) {
        // Real eigenvalues: rotate the eigenvector of one of them into
        // the first coordinate, splitting the block.
        const double sq = std::sqrt(disc);
        const double lam =
          (a + d >= 0.0 ? (a + d + sq) : (a + d - sq)) / 2.0;
        double vx = b;
        double vy = lam - a;
        const double wx = lam - d;
        const double wy = c;
        if (wx * wx + wy * wy > vx * vx + vy * vy) {
          vx = wx;
          vy = wy;
        }
        const double nv = std::sqrt(vx * vx + vy * vy);
        if (nv > 0.0) {
          apply_rotation(h, q, m, i, vx / nv, vy / nv);
        }
        h(i + 1, i) = 0.0;
      } else {
        const double rho = std::hypot(a - d, b + c);
        if (rho > 0.0) {
          const double cos2t = (b + c) / rho;
          const double sin2t = (d - a) / rho;
          const double theta = 0.5 * std::atan2(sin2t, cos2t);
          apply_rotation(h, q, m, i, std::cos(theta), std::sin(theta));
        }
        const double half_trace = (a + d) / 2.0;
        h(i, i) = half_trace;
        h(i + 1, i + 1) = half_trace;
      }
    }

  } // namespace

  std::vector<size_t> schur_block_starts(const DenseMatrix& t) {
    std::vector<size_t> starts;
    const size_t m = t.rows();
    size_t i = 0;
    while (i < m) {
      starts.push_back(i);
      if (i + 1 < m && t(i + 1, i) != 0.0) {
        i += 2;
      } else {
        i += 1;
      }
    }
    return starts;
  }

  std::vector<std::complex<double>> schur_eigenvalues(const DenseMatrix& t) {
    std::vector<std::complex<double>> values;
    const size_t m = t.rows();
    values.reserve(m);
    size_t i = 0;
    while (i < m) {
      if (i + 1 < m && t(i + 1, i) != 0.0) {
        const double a = t(i, i);
        const double d = t(i + 1, i + 1);
        const double bc = t(i, i + 1) * t(i + 1, i);
        const double disc = (a - d) * (a - d) + 4.0 * bc;
        const double re = (a + d) / 2.0;
        const double im = disc < 0.0 ? std::sqrt(-disc) / 2.0 : 0.0;
        values.emplace_back(re, im);
        values.emplace_back(re, -im);
        i += 2;
      } else {
        values.emplace_back(t(i, i), 0.0);
        i += 1;
      }
    }
    return values;
  }

  RealSchurForm real_schur(const DenseMatrix& b) {
    if (b.rows() != b.cols()) {
      throw std::invalid_argument("real_schur: matrix must be square");
    }
    const size_t m = b.rows();
    if (m == 0) {
      throw std::invalid_argument("real_schur: empty matrix");
    }

    HessenbergResult hess = hessenberg_reduce(b);
    DenseMatrix& h = hess.h;
    DenseMatrix& q = hess.q;
    const double hnorm = std::max(frobenius_norm(h),
                                  std::numeric_limits<double>::min());

    if (m > 1) {
      const size_t sweep_cap = 30 * m;
      size_t sweeps = 0;
      size_t stall = 0;
      size_t hi = m - 1;
      size_t last_hi = hi;

      while (true) {
        // Aggressive small-subdiagonal deflation.
        for (size_t i = 1; i <= hi; ++i) {
          double tol = kUlp * (std::abs(h(i - 1, i - 1)) + std::abs(h(i, i)));
          if (tol == 0.0) { tol = kUlp * hnorm; }
          if (h(i, i - 1) != 0.0 && std::abs(h(i, i - 1)) <= tol) {
            h(i, i - 1) = 0.0;
          }
        }

        // Shrink the active window past converged 1x1 and 2x2 blocks.
        bool more = true;
        while (more) {
          more = false;
          if (h(hi, hi - 1) == 0.0) {
            if (hi <= 1) {
              hi = 0;
              break;
            }
            hi -= 1;
            more = true;
          } else if (hi == 1 || h(hi - 1, hi - 2) == 0.0) {
            // Terminal 2x2 block; standardization handles it later.
            if (hi <= 2) {
              hi = 0;
              break;
            }
            hi -= 2;
            more = true;
          }
        }
        if (hi == 0) { break; }

        if (hi != last_hi) {
          stall = 0;
          last_hi = hi;
        }

        size_t lo = hi - 1;
        while (lo > 0 && h(lo, lo - 1) != 0.0) {
          --lo;
        }

        if (sweeps >= sweep_cap) {
          std::ostringstream msg;
          msg << "real_schur: no convergence after " << sweeps
              << " double-shift sweeps (window " << lo << ".." << hi
              << ", subdiagonal " << h(hi, hi - 1) << ")";
          throw NumericalError(msg.str());
        }

        double s = h(hi - 1, hi - 1) + h(hi, hi);
        double t = h(hi - 1, hi - 1) * h(hi, hi) - h(hi - 1, hi) * h(hi, hi - 1);
        ++stall;
        if (stall > 10) {
          // Exceptional shift to break symmetric stalls.
          const double a =
            h(hi, hi) + 0.75 * std::abs(h(hi, hi - 1));
          s = 2.0 * a;
          t = a * a;
          stall = 0;
        }

        francis_sweep(h, q, m, lo, hi, s, t);
        ++sweeps;
      }
    }

    // Standardize all 2x2 blocks (split real pairs, equalize diagonals
    // of complex pairs).
    size_t i = 0;
    while (i + 1 < m) {
      if (h(i + 1, i) != 0.0) {
        standardize_block(h, q, m, i);
        if (h(i + 1, i) != 0.0) {
          i += 2;
          continue;
        }
      }
      i += 1;
    }

    // Exact zeros below the first subdiagonal.
    for (size_t c = 0; c + 2 < m + 1; ++c) {
      for (size_t r = c + 2; r < m; ++r) {
        h(r, c) = 0.0;
      }
    }

    RealSchurForm out;
    out.block_starts = schur_block_starts(h);
    out.t = std::move(h);
    out.q = std::move(q);
    return out;
  }

  // ------------------------------------------------------------------
  // Schur reordering via adjacent block swaps
  // ------------------------------------------------------------------

  namespace {

    // Swap the adjacent diagonal blocks at i1 (size p) and i1+p
    // (size q1) via the direct-swap method: solve the small Sylvester
    // system T11 X - X T22 = -T12, orthonormalize [X; I], and apply
    // the resulting similarity.
    void swap_adjacent_blocks(DenseMatrix& t, DenseMatrix& q, size_t m,
                              size_t i1, size_t p, size_t q1) {
      const size_t nw = p + q1;
      const double tnorm = std::max(frobenius_norm(t),
                                    std::numeric_limits<double>::min());

      // Sylvester system for vec(X), column-major.
      const size_t sys = p * q1;
      DenseMatrix a(sys, sys);
      std::vector<double> rhs(sys);
      for (size_t cidx = 0; cidx < q1; ++cidx) {
        for (size_t r = 0; r < p; ++r) {
          const size_t row = r + cidx * p;
          rhs[row] = -t(i1 + r, i1 + p + cidx);
          for (size_t s = 0; s < p; ++s) {
            a(row, s + cidx * p) += t(i1 + r, i1 + s);
          }
          for (size_t e = 0; e < q1; ++e) {
            a(row, r + e * p) -= t(i1 + p + e, i1 + p + cidx);
          }
        }
      }

      // LU with partial pivoting.
      std::vector<size_t> piv(sys);
      for (size_t c = 0; c < sys; ++c) {
        size_t pr = c;
        for (size_t r = c + 1; r < sys; ++r) {
          if (std::abs(a(r, c)) > std::abs(a(pr, c))) { pr = r; }
        }
        if (std::abs(a(pr, c)) < 1e3 * kUlp * tnorm) {
          std::ostringstream msg;
          msg << "reorder_schur: ill-conditioned swap of blocks at " << i1
              << " (sizes " << p << "," << q1 << ")";
          throw NumericalError(msg.str());
        }
        piv[c] = pr;
        if (pr != c) {
          for (size_t cc = 0; cc < sys; ++cc) {
            std::swap(a(c, cc), a(pr, cc));
          }
          std::swap(rhs[c], rhs[pr]);
        }
        for (size_t r = c + 1; r < sys; ++r) {
          const double f = a(r, c) / a(c, c);
          a(r, c) = 0.0;
          for (size_t cc = c + 1; cc < sys; ++cc) {
            a(r, cc) -= f * a(c, cc);
          }
          rhs[r] -= f * rhs[c];
        }
      }
      std::vector<double> xv(sys);
      for (size_t c = sys; c-- > 0;) {
        double acc = rhs[c];
        for (size_t cc = c + 1; cc < sys; ++cc) {
          acc -= a(c, cc) * xv[cc];
        }
        xv[c] = acc / a(c, c);
      }

      // Orthonormal basis of [X; I] extended to a square transform.
      DenseMatrix z(nw, nw);
      for (size_t cidx = 0; cidx < q1; ++cidx) {
        for (size_t r = 0; r < p; ++r) {
          z(r, cidx) = xv[r + cidx * p];
        }
        z(p + cidx, cidx) = 1.0;
      }
      for (size_t cidx = q1; cidx < nw; ++cidx) {
        z(cidx - q1, cidx) = 1.0;
      }
      QrResult zqr = householder_qr(z);
      const DenseMatrix& w = zqr.q;

      // Similarity on the window, applied to the full rows/columns.
      DenseMatrix tmp(nw, m);
      for (size_t c = 0; c < m; ++c) {
        for (size_t r = 0; r < nw; ++r) {
          double acc = 0.0;
          for (size_t s = 0; s < nw; ++s) {
            acc += w(s, r) * t(i1 + s, c);
          }
          tmp(r, c) = acc;
        }
      }
      for (size_t c = 0; c < m; ++c) {
        for (size_t r = 0; r < nw; ++r) {
          t(i1 + r, c) = tmp(r, c);
        }
      }
      DenseMatrix tmp2(m, nw);
      for (size_t r = 0; r < m; ++r) {
        for (size_t c = 0; c < nw; ++c) {
          double acc = 0.0;
          for (size_t s = 0; s < nw; ++s) {
            acc += t(r, i1 + s) * w(s, c);
          }
          tmp2(r, c) = acc;
        }
      }
      for (size_t r = 0; r < m; ++r) {
        for (size_t c = 0; c < nw; ++c) {
          t(r, i1 + c) = tmp2(r, c);
        }
      }
      for (size_t r = 0; r < m; ++r) {
        for (size_t c = 0; c < nw; ++c) {
          double acc = 0.0;
          for (size_t s = 0; s < nw; ++s) {
            acc += q(r, i1 + s) * w(s, c);
          }
          tmp2(r, c) = acc;
        }
      }
      for (size_t r = 0; r < m; ++r) {
        for (size_t c = 0; c < nw; ++c) {
          q(r, i1 + c) = tmp2(r, c);
        }
      }

      // The new (2,1) block must vanish up to roundoff.
      double resid = 0.0;
      for (size_t r = q1; r < nw; ++r) {
        for (size_t c = 0; c < q1; ++c) {
          resid = std::max(resid, std::abs(t(i1 + r, i1 + c)));
        }
      }
      if (resid > 1e4 * kUlp * tnorm) {
        std::ostringstream msg;
        msg << "reorder_schur: swap at " << i1 << " left residual " << resid;
        throw NumericalError(msg.str());
      }
      for (size_t r = q1; r < nw; ++r) {
        for (size_t c = 0; c < q1; ++c) {
          t(i1 + r, i1 + c) = 0.0;
        }
      }

      if (q1 == 2) { standardize_block(t, q, m, i1); }
      if (p == 2) { standardize_block(t, q, m, i1 + q1); }
    }

  } // namespace

  RealSchurForm reorder_schur_ranked(const RealSchurForm& s,
                                     const std::vector<int>& rank) {
    RealSchurForm out = s;
    const size_t m = out.t.rows();
    const size_t nblocks = out.block_starts.size();
    if (rank.size() != nblocks) {
      throw std::invalid_argument("reorder_schur: rank count mismatch");
    }

    std::vector<size_t> sizes(nblocks);
    for (size_t b = 0; b < nblocks; ++b) {
      const size_t next =
        b + 1 < nblocks ? out.block_starts[b + 1] : m;
      sizes[b] = next - out.block_starts[b];
    }
    std::vector<int> order(rank.begin(), rank.end());

    // Selection sort on blocks: bubble the best remaining ranked block
    // up to the destination slot with adjacent swaps.
    for (size_t dest = 0; dest < nblocks; ++dest) {
      size_t best = nblocks;
      for (size_t b = dest; b < nblocks; ++b) {
        if (order[b] < 0) { continue; }
        if (best == nblocks || order[b] < order[best]) { best = b; }
      }
      if (best == nblocks) { break; } // no ranked blocks remain
      for (size_t pos = best; pos > dest; --pos) {
        size_t i1 = 0;
        for (size_t x = 0; x + 1 <= pos - 1; ++x) {
          i1 += sizes[x];
        }
        try {
          swap_adjacent_blocks(out.t, out.q, m, i1, sizes[pos - 1],
                               sizes[pos]);
          std::swap(sizes[pos - 1], sizes[pos]);
        } catch (const NumericalError&) {
          // The swap system is singular only when the two blocks carry
          // numerically coincident eigenvalues, so either block
          // represents the selected value: exchange the labels instead
          // of the data.
        }
        std::swap(order[pos - 1], order[pos]);
      }
    }

    out.block_starts = schur_block_starts(out.t);
    return out;
  }

  RealSchurForm reorder_schur_blocks(const RealSchurForm& s,
                                     const std::vector<char>& keep) {
    std::vector<int> rank(keep.size(), -1);
    int next = 0;
    for (size_t b = 0; b < keep.size(); ++b) {
      if (keep[b]) { rank[b] = next++; }
    }
    return reorder_schur_ranked(s, rank);
  }

  RealSchurForm reorder_schur(
    const RealSchurForm& s,
    const std::function<bool(std::complex<double>)>& selected) {
    const std::vector<std::complex<double>> values = schur_eigenvalues(s.t);
    const size_t m = s.t.rows();
    std::vector<char> keep;
    keep.reserve(s.block_starts.size());
    for (size_t b = 0; b < s.block_starts.size(); ++b) {
      const size_t start = s.block_starts[b];
      const size_t next =
        b + 1 < s.block_starts.size() ? s.block_starts[b + 1] : m;
      const bool sel = selected(values[start]);
      if (next - start == 2 && sel != selected(values[start + 1])) {
        throw std::invalid_argument(
          "reorder_schur: predicate is not conjugation-closed");
      }
      keep.push_back(sel ? 1 : 0);
    }
    return reorder_schur_blocks(s, keep);
  }

  // ------------------------------------------------------------------
  // Eigenpairs of a quasi-triangular matrix
  // ------------------------------------------------------------------

  EigenPairsSmall eig_quasi_triangular(const DenseMatrix& t) {
    if (t.rows() != t.cols()) {
      throw std::invalid_argument("eig_quasi_triangular: square input only");
    }
    const size_t m = t.rows();
    EigenPairsSmall out;
    out.dim = m;
    out.values = schur_eigenvalues(t);
    out.vectors.assign(m * m, {0.0, 0.0});
    out.clustered.assign(m, 0);

    const double tnorm = frobenius_norm(t);
    const double pert = 1e-13 * tnorm + 1e-300;
    const std::vector<size_t> starts = schur_block_starts(t);

    using cplx = std::complex<double>;

    for (size_t b = 0; b < starts.size(); ++b) {
      const size_t bi = starts[b];
      const size_t bsize =
        (b + 1 < starts.size() ? starts[b + 1] : m) - bi;
      const cplx lam = out.values[bi];

      std::vector<cplx> y(m, cplx{0.0, 0.0});
      bool clustered = false;

      if (bsize == 1) {
        y[bi] = 1.0;
      } else {
        // Eigenvector of the 2x2 block for the +imag eigenvalue.
        const double a = t(bi, bi);
        const double bb = t(bi, bi + 1);
        const double cc = t(bi + 1, bi);
        const double dd = t(bi + 1, bi + 1);
        cplx v0{bb, 0.0}, v1 = lam - a;
        const cplx w0 = lam - dd, w1{cc, 0.0};
        if (std::norm(w0) + std::norm(w1) > std::norm(v0) + std::norm(v1)) {
          v0 = w0;
          v1 = w1;
        }
        y[bi] = v0;
        y[bi + 1] = v1;
      }

      // Back-substitute over the preceding diagonal blocks.
      for (size_t pb = b; pb-- > 0;) {
        const size_t pi = starts[pb];
        const size_t psize = starts[pb + 1] - pi;
        const size_t last = bi + bsize; // columns [pi+psize, last) matter

        if (psize == 1) {
          cplx rhs{0.0, 0.0};
          for (size_t c = pi + 1; c < last; ++c) {
            rhs -= t(pi, c) * y[c];
          }
          cplx denom = cplx{t(pi, pi), 0.0} - lam;
          if (std::abs(denom) < pert) {
            denom += cplx{pert, 0.0};
            clustered = true;
          }
          y[pi] = rhs / denom;
        } else {
          cplx r0{0.0, 0.0}, r1{0.0, 0.0};
          for (size_t c = pi + 2; c < last; ++c) {
            r0 -= t(pi, c) * y[c];
            r1 -= t(pi + 1, c) * y[c];
          }
          const cplx a00 = cplx{t(pi, pi), 0.0} - lam;
          const cplx a01{t(pi, pi + 1), 0.0};
          const cplx a10{t(pi + 1, pi), 0.0};
          const cplx a11 = cplx{t(pi + 1, pi + 1), 0.0} - lam;
          cplx det = a00 * a11 - a01 * a10;
          if (std::abs(det) < pert * pert) {
            const cplx shifted = lam + cplx{pert, 0.0};
            const cplx s00 = cplx{t(pi, pi), 0.0} - shifted;
            const cplx s11 = cplx{t(pi + 1, pi + 1), 0.0} - shifted;
            det = s00 * s11 - a01 * a10;
            clustered = true;
          }
          y[pi] = (r0 * a11 - a01 * r1) / det;
          y[pi + 1] = (a00 * r1 - r0 * a10) / det;
        }
      }

      // Normalize and fix the phase deterministically.
      double nrm = 0.0;
      for (const cplx& v : y) {
        nrm += std::norm(v);
      }
      nrm = std::sqrt(nrm);
      size_t imax = 0;
      double amax = -1.0;
      for (size_t i = 0; i < m; ++i) {
        if (std::abs(y[i]) > amax) {
          amax = std::abs(y[i]);
          imax = i;
        }
      }
      cplx phase{1.0, 0.0};
      if (amax > 0.0) { phase = std::abs(y[imax]) / y[imax]; }
      for (cplx& v : y) {
        v *= phase / nrm;
      }

      for (size_t i = 0; i < m; ++i) {
        out.vectors[i + bi * m] = y[i];
      }
      out.clustered[bi] = clustered ? 1 : 0;
      if (bsize == 2) {
        for (size_t i = 0; i < m; ++i) {
          out.vectors[i + (bi + 1) * m] = std::conj(y[i]);
        }
        out.clustered[bi + 1] = clustered ? 1 : 0;
      }
    }
    return out;
  }

  // ------------------------------------------------------------------
  // Triangular inverse apply
  // ------------------------------------------------------------------

  DenseMatrix upper_tri_inverse_apply(const DenseMatrix& r,
                                      const DenseMatrix& x) {
    const size_t j = r.rows();
    if (r.cols() != j || x.cols() != j) {
      throw std::invalid_argument("upper_tri_inverse_apply: shape mismatch");
    }
    const double rnorm = frobenius_norm(r);
    for (size_t i = 0; i < j; ++i) {
      if (std::abs(r(i, i)) <= 1e-14 * rnorm) {
        throw NumericalError(
          "upper_tri_inverse_apply: near-singular triangular factor");
      }
    }
    DenseMatrix out = x;
    kernels::trsm_right_upper(x.rows(), j, out.data(), r.data());
    return out;
  }

} // namespace rks
