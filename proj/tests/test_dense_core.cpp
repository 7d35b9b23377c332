#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>

#include <rks/dense_core.hpp>

#include "oracle_eigen.hpp"
#include "test_support.hpp"

namespace rks::testing {

  namespace {

    double recomposition_error(const DenseMatrix& a, const QrResult& qr) {
      DenseMatrix rec = matmul(qr.q, qr.r);
      double acc = 0.0;
      for (size_t c = 0; c < a.cols(); ++c) {
        for (size_t r = 0; r < a.rows(); ++r) {
          const double e = rec(r, c) - a(r, c);
          acc += e * e;
        }
      }
      return std::sqrt(acc);
    }

    double schur_recomposition_error(const DenseMatrix& b,
                                     const RealSchurForm& s) {
      DenseMatrix rec = matmul(matmul(s.q, s.t), transpose(s.q));
      double acc = 0.0;
      for (size_t c = 0; c < b.cols(); ++c) {
        for (size_t r = 0; r < b.rows(); ++r) {
          const double e = rec(r, c) - b(r, c);
          acc += e * e;
        }
      }
      return std::sqrt(acc);
    }

    // Quasi-triangular shape with every nonzero subdiagonal entry
    // inside a complex-pair 2x2 block.
    void check_quasi_triangular(const DenseMatrix& t) {
      const size_t m = t.rows();
      for (size_t c = 0; c < m; ++c) {
        for (size_t r = c + 2; r < m; ++r) {
          CHECK(t(r, c) == 0.0);
        }
      }
      for (size_t i = 0; i + 1 < m; ++i) {
        if (t(i + 1, i) != 0.0) {
          const double tr = t(i, i) - t(i + 1, i + 1);
          const double disc = tr * tr + 4.0 * t(i, i + 1) * t(i + 1, i);
          CHECK(disc < 0.0);
          if (i + 2 < m) { CHECK(t(i + 2, i + 1) == 0.0); }
        }
      }
    }

  } // namespace

  // ================================================================
  // Oracle self-validation (closed forms)
  // ================================================================

  TEST_CASE("oracle - 2x2 and 3x3 closed forms") {
    DenseMatrix a(2, 2);
    a(0, 0) = 3.0;
    a(0, 1) = 1.0;
    a(1, 0) = 2.0;
    a(1, 1) = 4.0; // eigenvalues 2 and 5
    auto ev = oracle_eigenvalues(a);
    CHECK(eigenvalue_multiset_distance(
            ev, {{2.0, 0.0}, {5.0, 0.0}}) < 1e-12);

    DenseMatrix rot(2, 2);
    rot(0, 1) = -1.0;
    rot(1, 0) = 1.0; // eigenvalues +/- i
    ev = oracle_eigenvalues(rot);
    CHECK(eigenvalue_multiset_distance(ev, {{0.0, 1.0}, {0.0, -1.0}}) <
          1e-12);

    // Companion matrix of (x-1)(x-2)(x-3) = x^3 - 6x^2 + 11x - 6.
    DenseMatrix comp(3, 3);
    comp(0, 2) = 6.0;
    comp(1, 2) = -11.0;
    comp(2, 2) = 6.0;
    comp(1, 0) = 1.0;
    comp(2, 1) = 1.0;
    ev = oracle_eigenvalues(comp);
    CHECK(eigenvalue_multiset_distance(
            ev, {{1.0, 0.0}, {2.0, 0.0}, {3.0, 0.0}}) < 1e-9);

    auto roots = charpoly_roots(comp);
    CHECK(eigenvalue_multiset_distance(
            roots, {{1.0, 0.0}, {2.0, 0.0}, {3.0, 0.0}}) < 1e-9);
  }

  // ================================================================
  // householder_qr
  // ================================================================

  TEST_CASE("householder_qr - identity") {
    DenseMatrix eye = DenseMatrix::identity(3);
    QrResult qr = householder_qr(eye);
    for (size_t c = 0; c < 3; ++c) {
      for (size_t r = 0; r < 3; ++r) {
        CHECK(qr.q(r, c) == (r == c ? 1.0 : 0.0));
        CHECK(qr.r(r, c) == (r == c ? 1.0 : 0.0));
      }
    }
  }

  TEST_CASE("householder_qr - single column normalization") {
    DenseMatrix a(2, 1);
    a(0, 0) = 3.0;
    a(1, 0) = 4.0;
    QrResult qr = householder_qr(a);
    CHECK(qr.q(0, 0) == doctest::Approx(0.6).epsilon(1e-14));
    CHECK(qr.q(1, 0) == doctest::Approx(0.8).epsilon(1e-14));
    CHECK(qr.r(0, 0) == doctest::Approx(5.0).epsilon(1e-14));
  }

  TEST_CASE("householder_qr - random 8x4 recomposition and orthonormality") {
    const DenseMatrix a = random_dense(8, 4, 17);
    QrResult qr = householder_qr(a);
    CHECK(recomposition_error(a, qr) <= 1e-12 * frobenius_norm(a));
    CHECK(orthonormality_defect(qr.q) <= 1e-12 * 4);
    for (size_t i = 0; i < 4; ++i) {
      CHECK(qr.r(i, i) >= 0.0);
    }
    CHECK_FALSE(qr.rank_deficient);
  }

  TEST_CASE("householder_qr - reports rank deficiency") {
    DenseMatrix a(5, 2);
    for (size_t r = 0; r < 5; ++r) {
      a(r, 0) = 1.0 + static_cast<double>(r);
      a(r, 1) = 2.0 * a(r, 0); // duplicate direction
    }
    QrResult qr = householder_qr(a);
    CHECK(qr.rank_deficient);
  }

  TEST_CASE("householder_qr - bit-stable across repeated calls") {
    const DenseMatrix a = random_dense(9, 5, 23);
    QrResult qr1 = householder_qr(a);
    QrResult qr2 = householder_qr(a);
    for (size_t i = 0; i < 9 * 5; ++i) {
      CHECK(qr1.q.data()[i] == qr2.q.data()[i]);
    }
    for (size_t i = 0; i < 5 * 5; ++i) {
      CHECK(qr1.r.data()[i] == qr2.r.data()[i]);
    }
  }

  // ================================================================
  // hessenberg_reduce
  // ================================================================

  TEST_CASE("hessenberg_reduce - already Hessenberg input is unchanged") {
    DenseMatrix h(4, 4);
    std::mt19937_64 rng{31};
    std::uniform_real_distribution<double> dist{-1.0, 1.0};
    for (size_t c = 0; c < 4; ++c) {
      for (size_t r = 0; r <= std::min(c + 1, size_t{3}); ++r) {
        h(r, c) = dist(rng);
      }
    }
    HessenbergResult res = hessenberg_reduce(h);
    for (size_t c = 0; c < 4; ++c) {
      for (size_t r = 0; r < 4; ++r) {
        CHECK(res.q(r, c) == (r == c ? 1.0 : 0.0));
        CHECK(res.h(r, c) == h(r, c));
      }
    }
  }

  TEST_CASE("hessenberg_reduce - symmetric input becomes tridiagonal") {
    DenseMatrix s(4, 4);
    std::mt19937_64 rng{37};
    std::uniform_real_distribution<double> dist{-1.0, 1.0};
    for (size_t c = 0; c < 4; ++c) {
      for (size_t r = 0; r <= c; ++r) {
        s(r, c) = dist(rng);
        s(c, r) = s(r, c);
      }
    }
    HessenbergResult res = hessenberg_reduce(s);
    for (size_t c = 0; c < 4; ++c) {
      for (size_t r = 0; r < 4; ++r) {
        if (r > c + 1 || c > r + 1) {
          CHECK(std::abs(res.h(r, c)) < 1e-13 * frobenius_norm(s));
        }
      }
    }
  }

  TEST_CASE("hessenberg_reduce - similarity against the charpoly oracle") {
    const DenseMatrix b = random_dense(6, 6, 41);
    HessenbergResult res = hessenberg_reduce(b);

    // q^T b q = h
    DenseMatrix rec = matmul(matmul(transpose(res.q), b), res.q);
    double err = 0.0;
    for (size_t i = 0; i < 36; ++i) {
      err = std::max(err, std::abs(rec.data()[i] - res.h.data()[i]));
    }
    CHECK(err <= 1e-12 * frobenius_norm(b));

    // Eigenvalues preserved (independent oracle on both sides).
    CHECK(eigenvalue_multiset_distance(charpoly_roots(b),
                                       charpoly_roots(res.h)) < 1e-9);
    CHECK(res.q(0, 0) == 1.0); // q e_1 = e_1
  }

  // ================================================================
  // real_schur
  // ================================================================

  TEST_CASE("real_schur - diagonal input") {
    DenseMatrix d(3, 3);
    d(0, 0) = 5.0;
    d(1, 1) = 2.0;
    d(2, 2) = 9.0;
    RealSchurForm s = real_schur(d);
    auto vals = schur_eigenvalues(s.t);
    CHECK(eigenvalue_multiset_distance(
            vals, {{5.0, 0.0}, {2.0, 0.0}, {9.0, 0.0}}) < 1e-12);
    check_quasi_triangular(s.t);
  }

  TEST_CASE("real_schur - rotation matrix gives a single 2x2 block") {
    DenseMatrix rot(2, 2);
    rot(0, 1) = -1.0;
    rot(1, 0) = 1.0;
    RealSchurForm s = real_schur(rot);
    CHECK(s.block_starts.size() == 1);
    auto vals = schur_eigenvalues(s.t);
    CHECK(eigenvalue_multiset_distance(vals, {{0.0, 1.0}, {0.0, -1.0}}) <
          1e-12);
  }

  TEST_CASE("real_schur - random 10x10 against the independent oracle") {
    const DenseMatrix b = random_dense(10, 10, 43);
    RealSchurForm s = real_schur(b);
    check_quasi_triangular(s.t);
    CHECK(orthonormality_defect(s.q) <= 1e-12 * 10);
    CHECK(schur_recomposition_error(b, s) <= 1e-10 * frobenius_norm(b));
    CHECK(eigenvalue_multiset_distance(schur_eigenvalues(s.t),
                                       oracle_eigenvalues(b)) < 1e-8);
  }

  TEST_CASE("real_schur - symmetric input diagonalizes") {
    DenseMatrix s(6, 6);
    std::mt19937_64 rng{47};
    std::uniform_real_distribution<double> dist{-1.0, 1.0};
    for (size_t c = 0; c < 6; ++c) {
      for (size_t r = 0; r <= c; ++r) {
        s(r, c) = dist(rng);
        s(c, r) = s(r, c);
      }
    }
    RealSchurForm f = real_schur(s);
    double offdiag = 0.0;
    for (size_t c = 0; c < 6; ++c) {
      for (size_t r = 0; r < 6; ++r) {
        if (r != c) { offdiag = std::max(offdiag, std::abs(f.t(r, c))); }
      }
    }
    CHECK(offdiag <= 1e-10 * frobenius_norm(s));
  }

  TEST_CASE("real_schur - deterministic output bits") {
    const DenseMatrix b = random_dense(7, 7, 53);
    RealSchurForm s1 = real_schur(b);
    RealSchurForm s2 = real_schur(b);
    for (size_t i = 0; i < 49; ++i) {
      CHECK(s1.t.data()[i] == s2.t.data()[i]);
      CHECK(s1.q.data()[i] == s2.q.data()[i]);
    }
  }

  // ================================================================
  // reorder_schur
  // ================================================================

  TEST_CASE("reorder_schur - diagonal case is a permutation") {
    DenseMatrix d(3, 3);
    d(0, 0) = 3.0;
    d(1, 1) = 1.0;
    d(2, 2) = 2.0;
    RealSchurForm s = real_schur(d);
    RealSchurForm r = reorder_schur(s, [](std::complex<double> v) {
      return std::abs(v.real() - 2.0) < 1e-9;
    });
    CHECK(r.t(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
    auto vals = schur_eigenvalues(r.t);
    CHECK(eigenvalue_multiset_distance(
            vals, {{2.0, 0.0}, {3.0, 0.0}, {1.0, 0.0}}) < 1e-10);
  }

  TEST_CASE("reorder_schur - moves a conjugate pair to the front") {
    // Block diagonal with pairs 1 +/- 2i and 4 +/- 1i.
    DenseMatrix b(4, 4);
    b(0, 0) = 1.0;
    b(0, 1) = 2.0;
    b(1, 0) = -2.0;
    b(1, 1) = 1.0;
    b(2, 2) = 4.0;
    b(2, 3) = 1.0;
    b(3, 2) = -1.0;
    b(3, 3) = 4.0;
    RealSchurForm s = real_schur(b);
    RealSchurForm r = reorder_schur(s, [](std::complex<double> v) {
      return std::abs(v.real() - 4.0) < 1e-6;
    });
    // Leading 2x2 block carries 4 +/- i (closed form on the block).
    const double tr = r.t(0, 0) + r.t(1, 1);
    const double det = r.t(0, 0) * r.t(1, 1) - r.t(0, 1) * r.t(1, 0);
    CHECK(tr == doctest::Approx(8.0).epsilon(1e-9));
    CHECK(det == doctest::Approx(17.0).epsilon(1e-9));
    check_quasi_triangular(r.t);
    CHECK(schur_recomposition_error(b, r) <= 1e-9 * frobenius_norm(b));
  }

  TEST_CASE("reorder_schur - select everything is a no-op similarity") {
    const DenseMatrix b = random_dense(6, 6, 59);
    RealSchurForm s = real_schur(b);
    RealSchurForm r =
      reorder_schur(s, [](std::complex<double>) { return true; });
    CHECK(eigenvalue_multiset_distance(schur_eigenvalues(s.t),
                                       schur_eigenvalues(r.t)) < 1e-10);
  }

  TEST_CASE("reorder_schur - rejects a conjugation-splitting predicate") {
    DenseMatrix rot(2, 2);
    rot(0, 1) = -1.0;
    rot(1, 0) = 1.0;
    RealSchurForm s = real_schur(rot);
    CHECK_THROWS_AS(reorder_schur(s,
                                  [](std::complex<double> v) {
                                    return v.imag() > 0.0;
                                  }),
                    std::invalid_argument);
  }

  TEST_CASE("reorder_schur - eigenvalue multiset preserved on random sizes") {
    for (size_t dim = 5; dim <= 30; dim += 5) {
      const DenseMatrix b = random_dense(dim, dim, 61 + dim);
      RealSchurForm s = real_schur(b);
      auto before = schur_eigenvalues(s.t);
      // Keep the eigenvalues with nonnegative real part.
      RealSchurForm r = reorder_schur(s, [](std::complex<double> v) {
        return v.real() >= 0.0;
      });
      auto after = schur_eigenvalues(r.t);
      CHECK(eigenvalue_multiset_distance(before, after) <
            1e-9 * frobenius_norm(s.t));
      check_quasi_triangular(r.t);
      // Selected block leads.
      size_t lead = 0;
      while (lead < dim && after[lead].real() >= -1e-9) {
        ++lead;
      }
      for (size_t i = lead; i < dim; ++i) {
        CHECK(after[i].real() < 1e-9);
      }
    }
  }

  // ================================================================
  // eig_quasi_triangular
  // ================================================================

  TEST_CASE("eig_quasi_triangular - diagonal gives unit vectors") {
    DenseMatrix d(3, 3);
    d(0, 0) = 1.0;
    d(1, 1) = 2.0;
    d(2, 2) = 3.0;
    EigenPairsSmall e = eig_quasi_triangular(d);
    for (size_t i = 0; i < 3; ++i) {
      CHECK(e.values[i].real() == doctest::Approx(1.0 + i));
      for (size_t r = 0; r < 3; ++r) {
        CHECK(std::abs(e.vec(i)[r] - (r == i ? 1.0 : 0.0)) < 1e-14);
      }
    }
  }

  TEST_CASE("eig_quasi_triangular - nearly defective 2x2 keeps residual") {
    DenseMatrix t(2, 2);
    t(0, 0) = 2.0;
    t(0, 1) = 1.0;
    t(1, 1) = 2.0 - 1e-3;
    EigenPairsSmall e = eig_quasi_triangular(t);
    for (size_t i = 0; i < 2; ++i) {
      // || T y - lambda y || small for each pair.
      std::complex<double> r0 = t(0, 0) * e.vec(i)[0] + t(0, 1) * e.vec(i)[1] -
                                e.values[i] * e.vec(i)[0];
      std::complex<double> r1 =
        t(1, 1) * e.vec(i)[1] - e.values[i] * e.vec(i)[1];
      CHECK(std::sqrt(std::norm(r0) + std::norm(r1)) <=
            1e-10 * frobenius_norm(t));
    }
  }

  TEST_CASE("eig_quasi_triangular - rotation block gives conjugate pair") {
    DenseMatrix t(2, 2);
    t(0, 1) = -1.0;
    t(1, 0) = 1.0;
    EigenPairsSmall e = eig_quasi_triangular(t);
    CHECK(e.values[0].imag() == doctest::Approx(1.0));
    CHECK(e.values[1].imag() == doctest::Approx(-1.0));
    for (size_t r = 0; r < 2; ++r) {
      CHECK(std::abs(e.vec(0)[r] - std::conj(e.vec(1)[r])) < 1e-14);
    }
  }

  TEST_CASE("eig_quasi_triangular - unit norm and residual on random form") {
    const DenseMatrix b = random_dense(8, 8, 67);
    RealSchurForm s = real_schur(b);
    EigenPairsSmall e = eig_quasi_triangular(s.t);
    const double tnorm = frobenius_norm(s.t);
    for (size_t i = 0; i < 8; ++i) {
      double nrm = 0.0;
      for (size_t r = 0; r < 8; ++r) {
        nrm += std::norm(e.vec(i)[r]);
      }
      CHECK(std::sqrt(nrm) == doctest::Approx(1.0).epsilon(1e-12));
      std::vector<std::complex<double>> res(8, {0.0, 0.0});
      for (size_t c = 0; c < 8; ++c) {
        for (size_t r = 0; r < 8; ++r) {
          res[r] += s.t(r, c) * e.vec(i)[c];
        }
      }
      double rnorm = 0.0;
      for (size_t r = 0; r < 8; ++r) {
        res[r] -= e.values[i] * e.vec(i)[r];
        rnorm += std::norm(res[r]);
      }
      CHECK(std::sqrt(rnorm) <= 1e-10 * tnorm);
    }
  }

  // ================================================================
  // upper_tri_inverse_apply
  // ================================================================

  TEST_CASE("upper_tri_inverse_apply - identity and scaling") {
    const DenseMatrix x = random_dense(10, 3, 71);
    DenseMatrix r = DenseMatrix::identity(3);
    DenseMatrix out = upper_tri_inverse_apply(r, x);
    for (size_t i = 0; i < 30; ++i) {
      CHECK(out.data()[i] == x.data()[i]);
    }
    for (size_t i = 0; i < 3; ++i) {
      r(i, i) = 2.0;
    }
    out = upper_tri_inverse_apply(r, x);
    for (size_t i = 0; i < 30; ++i) {
      CHECK(out.data()[i] == doctest::Approx(x.data()[i] / 2.0));
    }
  }

  TEST_CASE("upper_tri_inverse_apply - random system residual") {
    DenseMatrix r(5, 5);
    std::mt19937_64 rng{73};
    std::uniform_real_distribution<double> dist{-1.0, 1.0};
    for (size_t c = 0; c < 5; ++c) {
      for (size_t rr = 0; rr < c; ++rr) {
        r(rr, c) = dist(rng);
      }
      r(c, c) = 2.0 + std::abs(dist(rng));
    }
    const DenseMatrix x = random_dense(20, 5, 79);
    DenseMatrix out = upper_tri_inverse_apply(r, x);
    DenseMatrix back = matmul(out, r);
    double err = 0.0;
    for (size_t i = 0; i < 100; ++i) {
      err = std::max(err, std::abs(back.data()[i] - x.data()[i]));
    }
    CHECK(err <= 1e-12 * frobenius_norm(x));
  }

  TEST_CASE("upper_tri_inverse_apply - near-singular diagonal throws") {
    DenseMatrix r = DenseMatrix::identity(3);
    r(1, 1) = 1e-18;
    const DenseMatrix x = random_dense(4, 3, 83);
    CHECK_THROWS_AS(upper_tri_inverse_apply(r, x), NumericalError);
  }

} // namespace rks::testing
