//
// ... Standard header files
//
#include <algorithm>
#include <cmath>
#include <random>

//
// ... rks header files
//
#include <rks/kernels.hpp>
#include <rks/krylov.hpp>

namespace rks {

  namespace {

    // Small dense LU solve: X <- M^{-1} X (M square, partial pivoting).
    void solve_small_inplace(DenseMatrix m, DenseMatrix& x) {
      const size_t j = m.rows();
      for (size_t c = 0; c < j; ++c) {
        size_t pr = c;
        for (size_t r = c + 1; r < j; ++r) {
          if (std::abs(m(r, c)) > std::abs(m(pr, c))) { pr = r; }
        }
        if (m(pr, c) == 0.0) {
          throw NumericalError("transform_basis: singular transform");
        }
        if (pr != c) {
          for (size_t cc = 0; cc < j; ++cc) {
            std::swap(m(c, cc), m(pr, cc));
          }
          for (size_t cc = 0; cc < x.cols(); ++cc) {
            std::swap(x(c, cc), x(pr, cc));
          }
        }
        for (size_t r = c + 1; r < j; ++r) {
          const double f = m(r, c) / m(c, c);
          m(r, c) = 0.0;
          for (size_t cc = c + 1; cc < j; ++cc) {
            m(r, cc) -= f * m(c, cc);
          }
          for (size_t cc = 0; cc < x.cols(); ++cc) {
            x(r, cc) -= f * x(c, cc);
          }
        }
      }
      for (size_t c = j; c-- > 0;) {
        for (size_t cc = 0; cc < x.cols(); ++cc) {
          double acc = x(c, cc);
          for (size_t r = c + 1; r < j; ++r) {
            acc -= m(c, r) * x(r, cc);
          }
          x(c, cc) = acc / m(c, c);
        }
      }
    }

    // X <- X * R^{-1} for small upper-triangular R (column forward
    // substitution).
    void small_trsm_right(DenseMatrix& x, const DenseMatrix& r) {
      const size_t j = r.rows();
      for (size_t q = 0; q < j; ++q) {
        for (size_t i = 0; i < x.rows(); ++i) {
          double acc = x(i, q);
          for (size_t p = 0; p < q; ++p) {
            acc -= x(i, p) * r(p, q);
          }
          x(i, q) = acc / r(q, q);
        }
      }
    }

    double self_dot(const std::vector<double>& v) {
      double acc = 0.0;
      for (double t : v) {
        acc += t * t;
      }
      return acc;
    }

  } // namespace

  // Deterministic replacement direction: a pseudo-random vector
  // sketch-orthogonalized against the current basis. Used after a
  // breakdown and by the stagnation guard.
  bool reseed_direction(SketchedKrylovDecomposition& dec,
                        const SparseSignEmbedding& omega, std::uint64_t salt,
                        Counters* counters) {
      const size_t n = omega.ambient_dim();
      const size_t d = omega.sketch_dim();
      const size_t j = dec.order();
      std::vector<double> v(n), z(d);
      for (int attempt = 0; attempt < 8; ++attempt) {
        std::mt19937_64 rng{0x9E3779B97F4A7C15ull ^ (salt + attempt)};
        std::normal_distribution<double> gauss{0.0, 1.0};
        for (double& t : v) {
          t = gauss(rng);
        }
        omega.apply(v.data(), z.data());
        if (counters) { ++counters->sketch_count; }
        // Two sketch-space projection passes against S.
        for (int pass = 0; pass < 2; ++pass) {
          std::vector<double> c(j, 0.0);
          for (size_t p = 0; p < j; ++p) {
            const double* sp = dec.s_basis.col(p);
            double acc = 0.0;
            for (size_t r = 0; r < d; ++r) {
              acc += sp[r] * z[r];
            }
            c[p] = acc;
          }
          if (j > 0) {
            kernels::gemv_acc(n, j, dec.u_basis.data(), c.data(), -1.0,
                              v.data());
            if (counters) { counters->big_axpy_count += j; }
            for (size_t p = 0; p < j; ++p) {
              const double* sp = dec.s_basis.col(p);
              for (size_t r = 0; r < d; ++r) {
                z[r] -= c[p] * sp[r];
              }
            }
          }
        }
        const double beta = std::sqrt(self_dot(z));
        if (beta > 1e-8) {
          kernels::scal(n, 1.0 / beta, v.data());
          if (counters) { ++counters->big_axpy_count; }
          for (double& t : z) {
            t /= beta;
          }
          dec.u_last = std::move(v);
          dec.s_last = std::move(z);
          return true;
        }
      }
      return false;
  }

  SketchedKrylovDecomposition init_decomposition(
    const SparseSignEmbedding& omega, const std::vector<double>& u0,
    Counters* counters) {
    const size_t n = omega.ambient_dim();
    const size_t d = omega.sketch_dim();
    if (u0.size() != n) {
      throw std::invalid_argument("init_decomposition: dimension mismatch");
    }

    SketchedKrylovDecomposition dec;
    dec.u_basis = DenseMatrix(n, 0);
    dec.s_basis = DenseMatrix(d, 0);
    dec.b = DenseMatrix(0, 0);
    dec.coupling = DenseMatrix(0, 0);

    std::vector<double> z(d);
    omega.apply(u0.data(), z.data());
    if (counters) { ++counters->sketch_count; }
    const double norm_s = std::sqrt(self_dot(z));
    if (norm_s <= 1e-14) {
      throw std::invalid_argument(
        "init_decomposition: starting vector has near-zero sketch norm");
    }
    dec.u_last = u0;
    kernels::scal(n, 1.0 / norm_s, dec.u_last.data());
    if (counters) { ++counters->big_axpy_count; }
    for (double& t : z) {
      t /= norm_s;
    }
    dec.s_last = std::move(z);
    return dec;
  }

  ExtendStatus extend(SketchedKrylovDecomposition& dec, const CsrMatrix& a,
                      const SparseSignEmbedding& omega, size_t target_order,
                      const LockedSet* locked, const ExtendOptions& opts,
                      Counters* counters) {
    const size_t n = omega.ambient_dim();
    const size_t d = omega.sketch_dim();
    if (a.n != n) {
      throw std::invalid_argument("extend: operator/embedding mismatch");
    }
    if (dec.order() >= target_order) {
      throw std::invalid_argument("extend: target order not larger");
    }
    const size_t q = locked ? locked->count() : 0;
    if (dec.coupling.rows() != q) {
      if (dec.coupling.cols() != 0) {
        throw std::invalid_argument("extend: coupling/locked shape mismatch");
      }
      dec.coupling = DenseMatrix(q, 0);
    }

    std::vector<double> w(n), z(d), g(q), coeffs, z_res(d);

    while (dec.order() < target_order) {
      // Apply A to the newest direction.
      spmv(a, dec.u_last.data(), w.data());
      if (counters) { ++counters->spmv_count; }
      omega.apply(w.data(), z.data());
      if (counters) { ++counters->sketch_count; }

      // Oblique projection against the locked Schur vectors, with
      // coefficients from the stored sketches only.
      if (q > 0) {
        for (size_t p = 0; p < q; ++p) {
          const double* sp = locked->s_locked.col(p);
          double acc = 0.0;
          for (size_t r = 0; r < d; ++r) {
            acc += sp[r] * z[r];
          }
          g[p] = acc;
        }
        kernels::gemv_acc(n, q, locked->u_locked.data(), g.data(), -1.0,
                          w.data());
        if (counters) { counters->big_axpy_count += q; }
        for (size_t p = 0; p < q; ++p) {
          const double* sp = locked->s_locked.col(p);
          for (size_t r = 0; r < d; ++r) {
            z[r] -= g[p] * sp[r];
          }
        }
      }

      // Adopt the newest direction into the basis.
      dec.u_basis.append_col(dec.u_last.data());
      dec.s_basis.append_col(dec.s_last.data());
      dec.coupling.append_col(g.data());
      const size_t j = dec.order();

      // Low-dimensional projection step: coefficients from sketches.
      coeffs.assign(j, 0.0);
      for (size_t p = 0; p < j; ++p) {
        const double* sp = dec.s_basis.col(p);
        double acc = 0.0;
        for (size_t r = 0; r < d; ++r) {
          acc += sp[r] * z[r];
        }
        coeffs[p] = acc;
      }
      const double znorm = std::sqrt(self_dot(z));
      double cnorm = 0.0;
      for (double t : coeffs) {
        cnorm += t * t;
      }
      cnorm = std::sqrt(cnorm);

      z_res = z;
      for (size_t p = 0; p < j; ++p) {
        const double* sp = dec.s_basis.col(p);
        for (size_t r = 0; r < d; ++r) {
          z_res[r] -= coeffs[p] * sp[r];
        }
      }

      // Sketch-space coefficient refinement when the projected
      // fraction is large (compensates S^T being only approximately
      // the pseudo-inverse between whitenings).
      if (znorm > 0.0 && cnorm / znorm > opts.reorth_threshold) {
        for (size_t p = 0; p < j; ++p) {
          const double* sp = dec.s_basis.col(p);
          double acc = 0.0;
          for (size_t r = 0; r < d; ++r) {
            acc += sp[r] * z_res[r];
          }
          coeffs[p] += acc;
          for (size_t r = 0; r < d; ++r) {
            z_res[r] -= acc * sp[r];
          }
        }
      }

      // Single high-dimensional update.
      kernels::gemv_acc(n, j, dec.u_basis.data(), coeffs.data(), -1.0,
                        w.data());
      if (counters) { counters->big_axpy_count += j; }

      // Sketch the new direction from the actual vector. Deriving it
      // in sketch space (z - S*coeffs) cancels catastrophically once
      // the step shrinks and the lost accuracy compounds across steps.
      omega.apply(w.data(), z_res.data());
      if (counters) { ++counters->sketch_count; }
      const double beta = std::sqrt(self_dot(z_res));

      // Grow the square Rayleigh quotient: new column = coeffs, new
      // bottom row = previous b_row.
      DenseMatrix bnew(j, j);
      for (size_t c = 0; c + 1 < j; ++c) {
        for (size_t r = 0; r + 1 < j; ++r) {
          bnew(r, c) = dec.b(r, c);
        }
        bnew(j - 1, c) = dec.b_row[c];
      }
      for (size_t r = 0; r < j; ++r) {
        bnew(r, j - 1) = coeffs[r];
      }
      dec.b = std::move(bnew);

      if (beta <= opts.breakdown_tol) {
        // Invariant subspace found. Drop the vanishing residual term
        // (backward error at the breakdown threshold) and leave a
        // valid order-j state behind. When the basis already spans the
        // embedded space no fresh direction exists; the stale u_last
        // is harmless since its coefficient row is zero.
        dec.b_row.assign(j, 0.0);
        reseed_direction(dec, omega, j, counters);
        return ExtendStatus::HappyBreakdown;
      }

      dec.b_row.assign(j, 0.0);
      dec.b_row[j - 1] = beta;
      kernels::scal(n, 1.0 / beta, w.data());
      if (counters) { ++counters->big_axpy_count; }
      dec.u_last = w;
      for (size_t r = 0; r < d; ++r) {
        dec.s_last[r] = z_res[r] / beta;
      }

      if (sketch_orthonormality_defect(dec) > opts.whiten_tol) {
        whiten(dec, counters);
      }
    }
    return ExtendStatus::Completed;
  }

  void whiten(SketchedKrylovDecomposition& dec, Counters* counters) {
    const size_t j = dec.order();
    if (j == 0) { return; }
    const size_t n = dec.u_basis.rows();

    QrResult qr = householder_qr(dec.s_basis);
    if (qr.rank_deficient) {
      throw BasisDegenerate("whiten: sketched basis numerically dependent");
    }

    kernels::trsm_right_upper(n, j, dec.u_basis.data(), qr.r.data());
    if (counters) { counters->big_axpy_count += j * (j + 1) / 2; }
    dec.s_basis = std::move(qr.q);

    // B <- R B R^{-1}
    DenseMatrix bt = dec.b;
    small_trsm_right(bt, qr.r);
    DenseMatrix bnew(j, j);
    for (size_t c = 0; c < j; ++c) {
      for (size_t r = 0; r < j; ++r) {
        double acc = 0.0;
        for (size_t p = r; p < j; ++p) {
          acc += qr.r(r, p) * bt(p, c);
        }
        bnew(r, c) = acc;
      }
    }
    dec.b = std::move(bnew);

    // b_row^T <- b_row^T R^{-1}  (lower-triangular solve with R^T).
    for (size_t c = 0; c < j; ++c) {
      double acc = dec.b_row[c];
      for (size_t p = 0; p < c; ++p) {
        acc -= qr.r(p, c) * dec.b_row[p];
      }
      dec.b_row[c] = acc / qr.r(c, c);
    }

    if (dec.coupling.rows() > 0) {
      small_trsm_right(dec.coupling, qr.r);
    }
  }

  ArnoldiForm to_arnoldi(const SketchedKrylovDecomposition& dec) {
    const size_t j = dec.order();
    if (j == 0) {
      throw std::invalid_argument("to_arnoldi: empty decomposition");
    }
    const size_t n = dec.u_basis.rows();

    const double beta = std::sqrt(self_dot(dec.b_row));
    if (beta < 1e-300) {
      throw NumericalError("to_arnoldi: degenerate residual coupling");
    }

    // Householder transform M with M^T b_row = beta e_j.
    DenseMatrix m = DenseMatrix::identity(j);
    if (j > 1) {
      std::vector<double> v = dec.b_row;
      const double alpha =
        -(dec.b_row[j - 1] >= 0.0 ? 1.0 : -1.0) * beta;
      v[j - 1] -= alpha;
      double vnorm = std::sqrt(self_dot(v));
      if (vnorm > 0.0) {
        for (double& t : v) {
          t /= vnorm;
        }
        for (size_t c = 0; c < j; ++c) {
          for (size_t r = 0; r < j; ++r) {
            m(r, c) -= 2.0 * v[r] * v[c];
          }
        }
      }
      // Fix the sign so the transformed coupling is +beta e_j.
      if (alpha < 0.0) {
        for (size_t r = 0; r < j; ++r) {
          m(r, j - 1) = -m(r, j - 1);
        }
      }
    } else if (dec.b_row[0] < 0.0) {
      m(0, 0) = -1.0;
    }

    // B1 = M^T B M.
    DenseMatrix b1 = matmul_tn(m, matmul(dec.b, m));

    // Hessenberg reduction of B1 that leaves e_j invariant: reduce the
    // flipped transpose (whose reduction fixes e_1) and flip back.
    DenseMatrix c(j, j);
    for (size_t r = 0; r < j; ++r) {
      for (size_t cc = 0; cc < j; ++cc) {
        c(r, cc) = b1(j - 1 - cc, j - 1 - r);
      }
    }
    HessenbergResult hess = hessenberg_reduce(c);
    DenseMatrix g(j, j);
    for (size_t r = 0; r < j; ++r) {
      for (size_t cc = 0; cc < j; ++cc) {
        g(r, cc) = hess.q(j - 1 - r, j - 1 - cc);
      }
    }

    ArnoldiForm out;
    out.h = DenseMatrix(j, j);
    for (size_t r = 0; r < j; ++r) {
      for (size_t cc = 0; cc < j; ++cc) {
        out.h(r, cc) = hess.h(j - 1 - cc, j - 1 - r);
      }
    }
    // Exact upper-Hessenberg.
    for (size_t cc = 0; cc + 2 < j + 1; ++cc) {
      for (size_t r = cc + 2; r < j; ++r) {
        out.h(r, cc) = 0.0;
      }
    }

    DenseMatrix mg = matmul(m, g);
    out.v_basis = DenseMatrix(n, j);
    kernels::gemm_nk(n, j, j, dec.u_basis.data(), mg.data(),
                     out.v_basis.data());
    out.beta = beta;
    out.v_last = dec.u_last;
    return out;
  }

  void transform_basis(SketchedKrylovDecomposition& dec, const DenseMatrix& m,
                       Counters* counters) {
    const size_t j = dec.order();
    if (m.rows() != j || m.cols() != j) {
      throw std::invalid_argument("transform_basis: shape mismatch");
    }
    const size_t n = dec.u_basis.rows();

    DenseMatrix unew(n, j);
    kernels::gemm_nk(n, j, j, dec.u_basis.data(), m.data(), unew.data());
    if (counters) { counters->big_axpy_count += j * j; }
    dec.u_basis = std::move(unew);
    dec.s_basis = matmul(dec.s_basis, m);

    DenseMatrix bm = matmul(dec.b, m);
    solve_small_inplace(m, bm);
    dec.b = std::move(bm);

    std::vector<double> brow(j, 0.0);
    for (size_t c = 0; c < j; ++c) {
      double acc = 0.0;
      for (size_t r = 0; r < j; ++r) {
        acc += dec.b_row[r] * m(r, c);
      }
      brow[c] = acc;
    }
    dec.b_row = std::move(brow);

    if (dec.coupling.rows() > 0) {
      dec.coupling = matmul(dec.coupling, m);
    }
  }

  double decomposition_residual(const SketchedKrylovDecomposition& dec,
                                const CsrMatrix& a, const LockedSet* locked) {
    const size_t n = dec.u_basis.rows();
    const size_t j = dec.order();
    double acc = 0.0;
    std::vector<double> au(n);
    for (size_t c = 0; c < j; ++c) {
      spmv(a, dec.u_basis.col(c), au.data());
      for (size_t p = 0; p < j; ++p) {
        kernels::serial::axpy(n, -dec.b(p, c), dec.u_basis.col(p), au.data());
      }
      if (locked && locked->count() > 0) {
        for (size_t p = 0; p < locked->count(); ++p) {
          kernels::serial::axpy(n, -dec.coupling(p, c), locked->u_locked.col(p),
                                au.data());
        }
      }
      kernels::serial::axpy(n, -dec.b_row[c], dec.u_last.data(), au.data());
      acc += self_dot(au);
    }
    return std::sqrt(acc);
  }

  double sketch_consistency_defect(const SketchedKrylovDecomposition& dec,
                                   const SparseSignEmbedding& omega) {
    const size_t d = dec.s_basis.rows();
    const size_t j = dec.order();
    std::vector<double> z(d);
    double snorm2 = 0.0;
    double diff2 = 0.0;
    for (size_t c = 0; c < j; ++c) {
      omega.apply(dec.u_basis.col(c), z.data());
      const double* sc = dec.s_basis.col(c);
      for (size_t r = 0; r < d; ++r) {
        const double e = z[r] - sc[r];
        diff2 += e * e;
        snorm2 += sc[r] * sc[r];
      }
    }
    double rel = j == 0 ? 0.0 : std::sqrt(diff2) / std::max(std::sqrt(snorm2),
                                                            1e-300);
    omega.apply(dec.u_last.data(), z.data());
    double last2 = 0.0;
    for (size_t r = 0; r < d; ++r) {
      const double e = z[r] - dec.s_last[r];
      last2 += e * e;
    }
    return std::max(rel, std::sqrt(last2));
  }

  double sketch_orthonormality_defect(const SketchedKrylovDecomposition& dec) {
    const size_t d = dec.s_basis.rows();
    const size_t j = dec.order();
    double acc = 0.0;
    for (size_t cc = 0; cc <= j; ++cc) {
      const double* a =
        cc < j ? dec.s_basis.col(cc) : dec.s_last.data();
      for (size_t r = 0; r <= cc; ++r) {
        const double* b2 = r < j ? dec.s_basis.col(r) : dec.s_last.data();
        double g = 0.0;
        for (size_t t = 0; t < d; ++t) {
          g += a[t] * b2[t];
        }
        if (r == cc) {
          const double e = g - 1.0;
          acc += e * e;
        } else {
          acc += 2.0 * g * g;
        }
      }
    }
    return std::sqrt(acc);
  }

} // namespace rks
