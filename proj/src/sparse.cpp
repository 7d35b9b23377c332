//
// ... Standard header files
//
#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <tuple>

//
// ... rks header files
//
#include <rks/kernels.hpp>
#include <rks/sparse.hpp>

namespace rks {

  double CsrMatrix::norm1() const {
    std::vector<double> colsum(n, 0.0);
    for (size_t p = 0; p < values.size(); ++p) {
      colsum[col_idx[p]] += std::abs(values[p]);
    }
    double best = 0.0;
    for (double s : colsum) {
      best = std::max(best, s);
    }
    return best;
  }

  void spmv(const CsrMatrix& a, const double* x, double* y) {
    kernels::spmv(a.n, a.row_ptr.data(), a.col_idx.data(), a.values.data(), x,
                  y);
  }

  std::vector<double> spmv(const CsrMatrix& a, const std::vector<double>& x) {
    if (x.size() != a.n) {
      throw std::invalid_argument("spmv: dimension mismatch");
    }
    std::vector<double> y(a.n);
    spmv(a, x.data(), y.data());
    return y;
  }

  CsrMatrix csr_from_triplets(
    size_t n, std::vector<std::tuple<size_t, size_t, double>> triplets) {
    std::sort(triplets.begin(), triplets.end(),
              [](const auto& a, const auto& b) {
                if (std::get<0>(a) != std::get<0>(b)) {
                  return std::get<0>(a) < std::get<0>(b);
                }
                return std::get<1>(a) < std::get<1>(b);
              });

    CsrMatrix m;
    m.n = n;
    m.row_ptr.assign(n + 1, 0);
    m.col_idx.reserve(triplets.size());
    m.values.reserve(triplets.size());

    size_t p = 0;
    for (size_t row = 0; row < n; ++row) {
      m.row_ptr[row] = m.values.size();
      while (p < triplets.size() && std::get<0>(triplets[p]) == row) {
        const size_t col = std::get<1>(triplets[p]);
        double v = std::get<2>(triplets[p]);
        ++p;
        // Sum duplicates.
        while (p < triplets.size() && std::get<0>(triplets[p]) == row &&
               std::get<1>(triplets[p]) == col) {
          v += std::get<2>(triplets[p]);
          ++p;
        }
        m.col_idx.push_back(col);
        m.values.push_back(v);
      }
    }
    m.row_ptr[n] = m.values.size();
    return m;
  }

  namespace {

    std::string lower(std::string s) {
      for (char& c : s) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      }
      return s;
    }

    [[noreturn]] void fail(size_t line, const std::string& what) {
      std::ostringstream msg;
      msg << "matrix market parse error at line " << line << ": " << what;
      throw ParseError(msg.str());
    }

  } // namespace

  CsrMatrix parse_matrix_market(std::istream& in) {
    std::string line;
    size_t lineno = 0;

    if (!std::getline(in, line)) { fail(1, "empty stream"); }
    ++lineno;
    std::istringstream header(line);
    std::string banner, object, format, field, symmetry;
    header >> banner >> object >> format >> field >> symmetry;
    if (lower(banner) != "%%matrixmarket" || lower(object) != "matrix") {
      fail(lineno, "expected '%%MatrixMarket matrix' header");
    }
    if (lower(format) != "coordinate") {
      fail(lineno, "only coordinate format is supported");
    }
    if (lower(field) != "real") {
      fail(lineno, "only real field is supported, got '" + field + "'");
    }
    const std::string sym = lower(symmetry);
    if (sym != "general" && sym != "symmetric") {
      fail(lineno, "only general/symmetric symmetry is supported, got '" +
                     symmetry + "'");
    }
    const bool symmetric = sym == "symmetric";

    // Size line (skipping comments).
    size_t rows = 0, cols = 0, nnz = 0;
    while (true) {
      if (!std::getline(in, line)) { fail(lineno + 1, "missing size line"); }
      ++lineno;
      if (line.empty() || line[0] == '%') { continue; }
      std::istringstream ss(line);
      if (!(ss >> rows >> cols >> nnz)) { fail(lineno, "malformed size line"); }
      break;
    }
    if (rows != cols) { fail(lineno, "matrix must be square"); }

    std::vector<std::tuple<size_t, size_t, double>> triplets;
    triplets.reserve(symmetric ? 2 * nnz : nnz);
    size_t seen = 0;
    while (seen < nnz) {
      if (!std::getline(in, line)) {
        fail(lineno + 1, "unexpected end of stream");
      }
      ++lineno;
      if (line.empty() || line[0] == '%') { continue; }
      std::istringstream ss(line);
      size_t i = 0, j = 0;
      double v = 0.0;
      if (!(ss >> i >> j >> v)) { fail(lineno, "malformed entry"); }
      if (i < 1 || i > rows || j < 1 || j > cols) {
        fail(lineno, "index out of range");
      }
      if (!std::isfinite(v)) { fail(lineno, "non-finite value"); }
      triplets.emplace_back(i - 1, j - 1, v);
      if (symmetric && i != j) {
        triplets.emplace_back(j - 1, i - 1, v);
      }
      ++seen;
    }
    return csr_from_triplets(rows, std::move(triplets));
  }

  CsrMatrix read_matrix_market(const std::string& path) {
    std::ifstream in(path);
    if (!in) { throw ParseError("cannot open '" + path + "'"); }
    return parse_matrix_market(in);
  }

  void write_matrix_market(const CsrMatrix& a, std::ostream& out) {
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << a.n << " " << a.n << " " << a.nnz() << "\n";
    out.precision(17);
    for (size_t row = 0; row < a.n; ++row) {
      for (size_t p = a.row_ptr[row]; p < a.row_ptr[row + 1]; ++p) {
        out << row + 1 << " " << a.col_idx[p] + 1 << " " << a.values[p]
            << "\n";
      }
    }
  }

  std::vector<double> synthetic_diagonal(SyntheticKind kind, size_t n) {
    std::vector<double> diag(n);
    for (size_t j = 0; j < n; ++j) {
      // n equispaced points from 2 to 10, endpoints included.
      const double i =
        n == 1 ? 2.0
               : 2.0 + 8.0 * static_cast<double>(j) /
                         static_cast<double>(n - 1);
      switch (kind) {
        case SyntheticKind::Exponential:
          diag[j] = std::exp(i / 10.0);
          break;
        case SyntheticKind::Logarithmic:
          diag[j] = std::log(i + 1.0);
          break;
        case SyntheticKind::HarmonicRoots:
          diag[j] = 1.0 + 1.0 / (i * i);
          break;
        case SyntheticKind::GeometricDecay:
          diag[j] = std::pow(0.99, i);
          break;
      }
    }
    return diag;
  }

  CsrMatrix make_synthetic(const SyntheticSpec& spec) {
    if (spec.n < 2) {
      throw std::invalid_argument("make_synthetic: n must be >= 2");
    }
    if (spec.noise_scale < 0.0) {
      throw std::invalid_argument("make_synthetic: noise_scale must be >= 0");
    }
    const size_t n = spec.n;
    const std::vector<double> diag = synthetic_diagonal(spec.kind, n);

    std::mt19937_64 rng{spec.seed};
    std::normal_distribution<double> gauss{0.0, 1.0};

    CsrMatrix m;
    m.n = n;
    m.row_ptr.assign(n + 1, 0);
    const bool noisy = spec.noise_scale > 0.0;
    m.col_idx.reserve(noisy ? 3 * n : n);
    m.values.reserve(noisy ? 3 * n : n);

    // Tridiagonal rows in order: sub, diag, super.
    std::vector<double> sub(n, 0.0), sup(n, 0.0);
    if (noisy) {
      for (size_t i = 0; i + 1 < n; ++i) {
        sub[i] = gauss(rng) * spec.noise_scale; // entry (i+1, i)
        sup[i] = gauss(rng) * spec.noise_scale; // entry (i, i+1)
      }
    }

    for (size_t row = 0; row < n; ++row) {
      m.row_ptr[row] = m.values.size();
      if (noisy && row > 0) {
        m.col_idx.push_back(row - 1);
        m.values.push_back(sub[row - 1]);
      }
      m.col_idx.push_back(row);
      m.values.push_back(diag[row]);
      if (noisy && row + 1 < n) {
        m.col_idx.push_back(row + 1);
        m.values.push_back(sup[row]);
      }
    }
    m.row_ptr[n] = m.values.size();
    return m;
  }

} // namespace rks
