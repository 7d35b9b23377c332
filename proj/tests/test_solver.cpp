#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>

#include <rks/kernels.hpp>
#include <rks/solver.hpp>

#include "oracle_eigen.hpp"
#include "test_support.hpp"

namespace rks::testing {

  namespace {

    std::vector<double> sorted_reals(
      const std::vector<std::complex<double>>& vals) {
      std::vector<double> out;
      for (const auto& v : vals) {
        out.push_back(v.real());
      }
      std::sort(out.begin(), out.end(), std::greater<>());
      return out;
    }

  } // namespace

  // ================================================================
  // select_ritz
  // ================================================================

  TEST_CASE("select_ritz - plain reals") {
    std::vector<std::complex<double>> vals{{3, 0}, {2, 0}, {1, 0}};
    auto sel = select_ritz(vals, Selector::LargestModulus, 2);
    REQUIRE(sel.size() == 2);
    CHECK(sel[0] == 0);
    CHECK(sel[1] == 1);
  }

  TEST_CASE("select_ritz - conjugate pair at the cut is kept") {
    std::vector<std::complex<double>> vals{{5, 0}, {2, 1}, {2, -1}};
    auto sel = select_ritz(vals, Selector::LargestModulus, 2);
    CHECK(sel.size() == 3); // pair straddles the cut, better member in
  }

  TEST_CASE("select_ritz - pure pair under smallest modulus") {
    std::vector<std::complex<double>> vals{{1, 3}, {1, -3}};
    auto sel = select_ritz(vals, Selector::SmallestModulus, 1);
    CHECK(sel.size() == 2);
  }

  TEST_CASE("select_ritz - selector orderings") {
    std::vector<std::complex<double>> vals{{-5, 0}, {1, 0}, {4, 0}, {-2, 0}};
    CHECK(select_ritz(vals, Selector::LargestModulus, 1) ==
          std::vector<size_t>{0});
    CHECK(select_ritz(vals, Selector::SmallestModulus, 1) ==
          std::vector<size_t>{1});
    CHECK(select_ritz(vals, Selector::LargestReal, 1) ==
          std::vector<size_t>{2});
    CHECK(select_ritz(vals, Selector::SmallestReal, 1) ==
          std::vector<size_t>{0});
  }

  // ================================================================
  // residual_estimates
  // ================================================================

  TEST_CASE("residual_estimates - zero coupling means exact subspace") {
    DenseMatrix t(3, 3);
    t(0, 0) = 4.0;
    t(1, 1) = 3.0;
    t(2, 2) = 1.0;
    t(0, 1) = 0.5;
    auto pairs = residual_estimates(t, {0.0, 0.0, 0.0});
    for (const auto& p : pairs) {
      CHECK(p.residual_estimate == 0.0);
    }
  }

  TEST_CASE("residual_estimates - scalar formula") {
    DenseMatrix t(1, 1);
    t(0, 0) = 2.0;
    auto pairs = residual_estimates(t, {1e-12});
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].residual_estimate == doctest::Approx(5e-13));
  }

  // ================================================================
  // solve
  // ================================================================

  TEST_CASE("solve - diagonal ground truth, largest modulus") {
    std::vector<double> diag(100);
    for (size_t i = 0; i < 100; ++i) {
      diag[i] = static_cast<double>(i + 1);
    }
    const CsrMatrix a = diag_csr(diag);

    SolverConfig cfg;
    cfg.k = 4;
    cfg.m = 20;
    cfg.eta = 1e-10;
    cfg.seed = 1;
    SolverResult res = solve(a, cfg);

    CHECK(res.converged);
    REQUIRE(res.values.size() >= 4);
    auto vals = sorted_reals(res.values);
    CHECK(vals[0] == doctest::Approx(100.0).epsilon(1e-9));
    CHECK(vals[1] == doctest::Approx(99.0).epsilon(1e-9));
    CHECK(vals[2] == doctest::Approx(98.0).epsilon(1e-9));
    CHECK(vals[3] == doctest::Approx(97.0).epsilon(1e-9));
    for (double est : res.residual_estimates) {
      CHECK(est <= cfg.eta);
    }
    // Exact residuals reported at finalization.
    REQUIRE(res.residual_exact.size() == res.values.size());
    for (double ex : res.residual_exact) {
      CHECK(ex <= 1e-8);
    }
  }

  TEST_CASE("solve - noise-free synthetic recovers the top diagonal") {
    SyntheticSpec spec;
    spec.kind = SyntheticKind::Exponential;
    spec.n = 1000;
    spec.noise_scale = 0.0;
    const CsrMatrix a = make_synthetic(spec);
    const std::vector<double> truth =
      synthetic_diagonal(SyntheticKind::Exponential, spec.n);

    SolverConfig cfg;
    cfg.k = 5;
    cfg.m = 30;
    cfg.eta = 1e-10;
    cfg.seed = 3;
    SolverResult res = solve(a, cfg);
    CHECK(res.converged);

    auto vals = sorted_reals(res.values);
    for (size_t i = 0; i < 5; ++i) {
      const double expect = truth[spec.n - 1 - i];
      CHECK(std::abs(vals[i] - expect) <= 1e-8 * std::abs(expect));
    }
  }

  TEST_CASE("solve - conjugate pair forces k+1 returned values") {
    // Two rotation blocks with distinct radii: LM wants the +-i pair.
    std::vector<std::tuple<size_t, size_t, double>> trip;
    trip.emplace_back(0, 1, -1.0);
    trip.emplace_back(1, 0, 1.0);
    trip.emplace_back(2, 3, -0.1);
    trip.emplace_back(3, 2, 0.1);
    const CsrMatrix a = csr_from_triplets(4, std::move(trip));

    SolverConfig cfg;
    cfg.k = 1;
    cfg.m = 3;
    cfg.eta = 1e-9;
    cfg.seed = 5;
    SolverResult res = solve(a, cfg);
    CHECK(res.converged);
    REQUIRE(res.values.size() == 2);
    CHECK(res.values[0].real() == doctest::Approx(0.0).epsilon(1e-8));
    CHECK(std::abs(res.values[0].imag()) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(res.values[1] == std::conj(res.values[0]));
  }

  TEST_CASE("solve - conjugation closure on a random operator") {
    const CsrMatrix a = random_sparse(80, 0.05, 7);
    SolverConfig cfg;
    cfg.k = 5;
    cfg.m = 24;
    cfg.eta = 1e-8;
    cfg.seed = 7;
    cfg.max_restarts = 200;
    SolverResult res = solve(a, cfg);
    for (const auto& v : res.values) {
      if (v.imag() != 0.0) {
        bool found = false;
        for (const auto& w : res.values) {
          if (std::abs(w - std::conj(v)) <= 1e-10 * std::max(1.0, std::abs(v))) {
            found = true;
            break;
          }
        }
        CHECK(found);
      }
    }
  }

  TEST_CASE("solve - happy breakdown on a low-rank spectrum") {
    // Only five distinct eigenvalues: the Krylov space saturates and
    // the solver finalizes from the exact invariant subspace.
    std::vector<double> diag(50);
    for (size_t i = 0; i < 50; ++i) {
      diag[i] = static_cast<double>(1 + i % 5);
    }
    const CsrMatrix a = diag_csr(diag);
    SolverConfig cfg;
    cfg.k = 4;
    cfg.m = 20;
    cfg.eta = 1e-10;
    cfg.seed = 11;
    SolverResult res = solve(a, cfg);
    CHECK(res.converged);
    auto vals = sorted_reals(res.values);
    REQUIRE(vals.size() >= 4);
    CHECK(vals[0] == doctest::Approx(5.0).epsilon(1e-8));
    CHECK(vals[3] == doctest::Approx(2.0).epsilon(1e-8));
  }

  TEST_CASE("solve - deterministic for a fixed seed") {
    const CsrMatrix a = random_sparse(60, 0.08, 13);
    SolverConfig cfg;
    cfg.k = 3;
    cfg.m = 15;
    cfg.eta = 1e-9;
    cfg.seed = 17;
    SolverResult r1 = solve(a, cfg);
    SolverResult r2 = solve(a, cfg);
    REQUIRE(r1.values.size() == r2.values.size());
    for (size_t i = 0; i < r1.values.size(); ++i) {
      CHECK(r1.values[i] == r2.values[i]);
    }
    CHECK(r1.counters.spmv_count == r2.counters.spmv_count);
    CHECK(r1.counters.big_axpy_count == r2.counters.big_axpy_count);
    CHECK(r1.counters.restarts == r2.counters.restarts);
  }

  TEST_CASE("solve - spmv accounting identity") {
    std::vector<double> diag(100);
    for (size_t i = 0; i < 100; ++i) {
      diag[i] = 1.0 + 0.05 * static_cast<double>(i);
    }
    const CsrMatrix a = diag_csr(diag);

    SolverConfig cfg;
    cfg.k = 4;
    cfg.m = 16;
    cfg.eta = 1e-10;
    cfg.seed = 19;
    cfg.completion_probes = 0; // accounting identity of the pure loop
    std::vector<size_t> orders_after_contraction;
    cfg.observer = [&](const RestartSnapshot& snap) {
      orders_after_contraction.push_back(snap.u_basis->cols());
    };
    SolverResult res = solve(a, cfg);
    CHECK(res.converged);

    // spmv = m (initial) + sum over re-expansions of (m - k').
    size_t expect = cfg.m;
    for (size_t i = 0; i + 1 < orders_after_contraction.size(); ++i) {
      expect += cfg.m - orders_after_contraction[i];
    }
    CHECK(res.counters.spmv_count == expect);
    CHECK(res.counters.restarts + 1 == orders_after_contraction.size());
    CHECK(res.residual_history.size() == res.counters.restarts + 1);
  }

  TEST_CASE("solve - factorization invariant after every restart") {
    const CsrMatrix a = random_sparse(120, 0.05, 23);
    SolverConfig cfg;
    cfg.k = 4;
    cfg.m = 18;
    cfg.eta = 1e-9;
    cfg.seed = 23;
    cfg.max_restarts = 150;
    cfg.completion_probes = 0; // the identity holds for the pure loop

    double worst = 0.0;
    cfg.observer = [&](const RestartSnapshot& snap) {
      const size_t n = snap.u_basis->rows();
      const size_t j = snap.u_basis->cols();
      std::vector<double> col(n);
      double acc = 0.0;
      for (size_t c = 0; c < j; ++c) {
        spmv(a, snap.u_basis->col(c), col.data());
        for (size_t p = 0; p < j; ++p) {
          kernels::serial::axpy(n, -(*snap.b)(p, c), snap.u_basis->col(p),
                                col.data());
        }
        if (snap.locked != nullptr && snap.locked->count() > 0) {
          for (size_t p = 0; p < snap.locked->count(); ++p) {
            kernels::serial::axpy(n, -(*snap.coupling)(p, c),
                                  snap.locked->u_locked.col(p), col.data());
          }
        }
        kernels::serial::axpy(n, -(*snap.b_row)[c], snap.u_last->data(),
                              col.data());
        for (size_t r = 0; r < n; ++r) {
          acc += col[r] * col[r];
        }
      }
      const double unorm = frobenius_norm(*snap.u_basis);
      if (j > 0) {
        worst = std::max(worst, std::sqrt(acc) / (a.norm1() * unorm));
      }
    };
    SolverResult res = solve(a, cfg);
    CHECK(res.converged);
    CHECK(worst <= 1e-9);
  }

  TEST_CASE("solve - locking freezes converged Schur vectors") {
    // Three dominant, well separated eigenvalues lock quickly.
    std::vector<double> diag(200);
    for (size_t i = 0; i < 197; ++i) {
      diag[i] = 0.5 + static_cast<double>(i) / 400.0;
    }
    diag[197] = 8.0;
    diag[198] = 16.0;
    diag[199] = 32.0;
    const CsrMatrix a = diag_csr(diag);

    SolverConfig cfg;
    cfg.k = 3;
    cfg.m = 12;
    cfg.eta = 1e-10;
    cfg.seed = 29;
    cfg.deflation = DeflationMode::Lock;
    SolverResult res = solve(a, cfg);

    CHECK(res.converged);
    CHECK(res.locked_count >= 1);
    CHECK(res.perturbation_bound > 0.0);
    auto vals = sorted_reals(res.values);
    CHECK(vals[0] == doctest::Approx(32.0).epsilon(1e-9));
    CHECK(vals[1] == doctest::Approx(16.0).epsilon(1e-9));
    CHECK(vals[2] == doctest::Approx(8.0).epsilon(1e-9));

    // Locked residual: ||A U_q - U_q T_qq|| = ||u|| ||b_zeroed|| per
    // event, each within the nominal deflation bound.
    for (const LockEvent& ev : res.lock_events) {
      const double safety = std::sqrt((1.0 + 1.0 / std::sqrt(2.0)) /
                                      (1.0 - 1.0 / std::sqrt(2.0)));
      CHECK(ev.u_norm * ev.b_norm <=
            std::sqrt(static_cast<double>(ev.q)) * safety * cfg.eta);
    }

    // Direct check of the locked prefix in the final factorization.
    const size_t q = res.locked_count;
    const size_t n = a.n;
    std::vector<double> col(n);
    double acc = 0.0;
    for (size_t c = 0; c < q; ++c) {
      spmv(a, res.schur_basis.col(c), col.data());
      for (size_t p = 0; p < q; ++p) {
        kernels::serial::axpy(n, -res.t_small(p, c), res.schur_basis.col(p),
                              col.data());
      }
      for (size_t r = 0; r < n; ++r) {
        acc += col[r] * col[r];
      }
    }
    const double safety = std::sqrt(1.0 / (1.0 - 1.0 / std::sqrt(2.0)));
    CHECK(std::sqrt(acc) <=
          std::sqrt(static_cast<double>(q)) * safety * cfg.eta * 10.0);
  }

  TEST_CASE("solve - block atomicity in locking") {
    // A conjugate pair with one coupling entry above the threshold
    // must not lock.
    DenseMatrix t(2, 2);
    t(0, 0) = 1.0;
    t(0, 1) = 2.0;
    t(1, 0) = -2.0;
    t(1, 1) = 1.0;
    // lockable_prefix is internal; exercise through residual_estimates
    // semantics instead: the estimates of both pair members coincide.
    auto pairs = residual_estimates(t, {1e-12, 1.0});
    CHECK(pairs[0].residual_estimate == doctest::Approx(
            pairs[1].residual_estimate));
    CHECK(pairs[0].residual_estimate > 1e-6);
  }

  TEST_CASE("solve - fixed restart mode runs exactly that many restarts") {
    SyntheticSpec spec;
    spec.kind = SyntheticKind::Exponential;
    spec.n = 500;
    spec.noise_scale = 0.01;
    spec.seed = 2;
    const CsrMatrix a = make_synthetic(spec);

    SolverConfig cfg;
    cfg.k = 5;
    cfg.m = 20;
    cfg.eta = 1e-10;
    cfg.seed = 31;
    cfg.fixed_restarts = 7;
    SolverResult res = solve(a, cfg);
    CHECK(res.counters.restarts == 7);
    CHECK(res.residual_history.size() == 8);
  }

  TEST_CASE("solve - configuration validation") {
    const CsrMatrix a = diag_csr({1.0, 2.0, 3.0});
    SolverConfig cfg;
    cfg.k = 2;
    cfg.m = 2; // k == m
    CHECK_THROWS_AS(solve(a, cfg), std::invalid_argument);
    cfg.m = 5; // m > n
    CHECK_THROWS_AS(solve(a, cfg), std::invalid_argument);
    cfg.m = 3;
    cfg.eta = 0.0;
    CHECK_THROWS_AS(solve(a, cfg), std::invalid_argument);
  }

  TEST_CASE("solve - agrees with the dense oracle on a random matrix") {
    const CsrMatrix a = random_sparse(50, 0.15, 37);
    const DenseMatrix ad = dense_from_csr(a);
    const auto oracle = oracle_eigenvalues(ad);

    SolverConfig cfg;
    cfg.k = 4;
    cfg.m = 20;
    cfg.eta = 1e-9;
    cfg.seed = 37;
    cfg.max_restarts = 200;
    SolverResult res = solve(a, cfg);
    CHECK(res.converged);
    const double scale = a.norm1();
    for (const auto& v : res.values) {
      double best = 1e300;
      for (const auto& w : oracle) {
        best = std::min(best, std::abs(v - w));
      }
      CHECK(best <= 1e-7 * scale);
    }
  }

} // namespace rks::testing
