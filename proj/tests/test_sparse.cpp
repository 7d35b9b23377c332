#include <doctest.h>

#include <cmath>
#include <sstream>

#include <rks/sparse.hpp>

#include "test_support.hpp"

namespace rks::testing {

  TEST_CASE("parse_matrix_market - 1x1") {
    std::istringstream in("%%MatrixMarket matrix coordinate real general\n"
                          "1 1 1\n"
                          "1 1 3.5\n");
    CsrMatrix a = parse_matrix_market(in);
    CHECK(a.n == 1);
    CHECK(a.nnz() == 1);
    CHECK(a.values[0] == 3.5);
  }

  TEST_CASE("parse_matrix_market - symmetric expansion") {
    std::istringstream in("%%MatrixMarket matrix coordinate real symmetric\n"
                          "% comment line\n"
                          "2 2 2\n"
                          "1 1 1.0\n"
                          "2 1 5.0\n");
    CsrMatrix a = parse_matrix_market(in);
    CHECK(a.n == 2);
    CHECK(a.nnz() == 3);
    DenseMatrix d = dense_from_csr(a);
    CHECK(d(0, 1) == 5.0);
    CHECK(d(1, 0) == 5.0);
    CHECK(d(0, 0) == 1.0);
  }

  TEST_CASE("parse_matrix_market - rejects unsupported fields") {
    std::istringstream p("%%MatrixMarket matrix coordinate pattern general\n"
                         "1 1 1\n"
                         "1 1\n");
    CHECK_THROWS_AS(parse_matrix_market(p), ParseError);
    std::istringstream c("%%MatrixMarket matrix coordinate complex general\n"
                         "1 1 1\n"
                         "1 1 1.0 0.0\n");
    CHECK_THROWS_AS(parse_matrix_market(c), ParseError);
    std::istringstream bad_index(
      "%%MatrixMarket matrix coordinate real general\n"
      "2 2 1\n"
      "3 1 1.0\n");
    CHECK_THROWS_AS(parse_matrix_market(bad_index), ParseError);
  }

  TEST_CASE("parse_matrix_market - duplicates summed, rows sorted") {
    std::istringstream in("%%MatrixMarket matrix coordinate real general\n"
                          "2 2 3\n"
                          "1 2 1.5\n"
                          "1 1 1.0\n"
                          "1 2 0.5\n");
    CsrMatrix a = parse_matrix_market(in);
    CHECK(a.nnz() == 2);
    CHECK(a.col_idx[0] == 0);
    CHECK(a.col_idx[1] == 1);
    CHECK(a.values[1] == 2.0);
  }

  TEST_CASE("matrix market - write then parse is the identity") {
    const CsrMatrix a = random_sparse(30, 0.1, 91);
    std::ostringstream out;
    write_matrix_market(a, out);
    std::istringstream in(out.str());
    CsrMatrix b = parse_matrix_market(in);
    REQUIRE(b.n == a.n);
    REQUIRE(b.nnz() == a.nnz());
    CHECK(b.row_ptr == a.row_ptr);
    CHECK(b.col_idx == a.col_idx);
    for (size_t i = 0; i < a.nnz(); ++i) {
      CHECK(b.values[i] == a.values[i]);
    }
  }

  TEST_CASE("spmv - identity and diagonal") {
    CsrMatrix eye = diag_csr({1.0, 1.0, 1.0});
    std::vector<double> x{1.0, 2.0, 3.0};
    CHECK(spmv(eye, x) == x);

    CsrMatrix d = diag_csr({1.0, 2.0, 3.0, 4.0, 5.0});
    std::vector<double> ones(5, 1.0);
    auto y = spmv(d, ones);
    for (size_t i = 0; i < 5; ++i) {
      CHECK(y[i] == static_cast<double>(i + 1));
    }
  }

  TEST_CASE("spmv - agrees with the dense oracle") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const CsrMatrix a = random_sparse(50, 0.2, 100 + seed);
      const DenseMatrix ad = dense_from_csr(a);
      std::mt19937_64 rng{200 + seed};
      std::uniform_real_distribution<double> dist{-1.0, 1.0};
      std::vector<double> x(50);
      for (double& t : x) {
        t = dist(rng);
      }
      auto y = spmv(a, x);
      double xnorm = 0.0, err = 0.0;
      for (size_t r = 0; r < 50; ++r) {
        double acc = 0.0;
        for (size_t c = 0; c < 50; ++c) {
          acc += ad(r, c) * x[c];
        }
        err = std::max(err, std::abs(acc - y[r]));
        xnorm = std::max(xnorm, std::abs(acc));
      }
      CHECK(err <= 1e-13 * std::max(xnorm, 1.0));
    }
  }

  TEST_CASE("make_synthetic - noise-free diagonals match the spectra") {
    SyntheticSpec spec;
    spec.kind = SyntheticKind::Exponential;
    spec.n = 3;
    spec.noise_scale = 0.0;
    CsrMatrix a = make_synthetic(spec);
    CHECK(a.nnz() == 3);
    DenseMatrix d = dense_from_csr(a);
    CHECK(d(0, 0) == doctest::Approx(std::exp(0.2)).epsilon(1e-15));
    CHECK(d(1, 1) == doctest::Approx(std::exp(0.6)).epsilon(1e-15));
    CHECK(d(2, 2) == doctest::Approx(std::exp(1.0)).epsilon(1e-15));

    spec.kind = SyntheticKind::GeometricDecay;
    spec.n = 2;
    CsrMatrix g = make_synthetic(spec);
    DenseMatrix gd = dense_from_csr(g);
    CHECK(gd(0, 0) == doctest::Approx(std::pow(0.99, 2.0)).epsilon(1e-15));
    CHECK(gd(1, 1) == doctest::Approx(std::pow(0.99, 10.0)).epsilon(1e-15));
  }

  TEST_CASE("make_synthetic - tridiagonal with deterministic noise") {
    SyntheticSpec spec;
    spec.kind = SyntheticKind::Logarithmic;
    spec.n = 64;
    spec.noise_scale = 0.01;
    spec.seed = 5;
    CsrMatrix a = make_synthetic(spec);
    CsrMatrix b = make_synthetic(spec);
    CHECK(a.values == b.values);
    CHECK(a.nnz() == 3 * 64 - 2);
    DenseMatrix d = dense_from_csr(a);
    for (size_t r = 0; r < 64; ++r) {
      for (size_t c = 0; c < 64; ++c) {
        if (r > c + 1 || c > r + 1) { CHECK(d(r, c) == 0.0); }
      }
    }
  }

  TEST_CASE("make_synthetic - validates the spec") {
    SyntheticSpec spec;
    spec.n = 1;
    CHECK_THROWS_AS(make_synthetic(spec), std::invalid_argument);
    spec.n = 4;
    spec.noise_scale = -1.0;
    CHECK_THROWS_AS(make_synthetic(spec), std::invalid_argument);
  }

} // namespace rks::testing
