//
// ... Standard header files
//
#include <algorithm>
#include <cmath>
#include <numeric>

//
// ... rks header files
//
#include <rks/dense_core.hpp>
#include <rks/ritz.hpp>

namespace rks {

  namespace {

    double primary_key(Selector sel, std::complex<double> v) {
      switch (sel) {
        case Selector::LargestModulus: return -std::abs(v);
        case Selector::SmallestModulus: return std::abs(v);
        case Selector::LargestReal: return -v.real();
        case Selector::SmallestReal: return v.real();
      }
      return 0.0;
    }

  } // namespace

  bool selector_prefers(Selector sel, std::complex<double> a,
                        std::complex<double> b) {
    const double ka = primary_key(sel, a);
    const double kb = primary_key(sel, b);
    if (ka != kb) { return ka < kb; }
    if (std::abs(a) != std::abs(b)) { return std::abs(a) > std::abs(b); }
    if (a.real() != b.real()) { return a.real() > b.real(); }
    const bool apos = a.imag() >= 0.0;
    const bool bpos = b.imag() >= 0.0;
    if (apos != bpos) { return apos; }
    return false;
  }

  std::vector<size_t> select_ritz(
    const std::vector<std::complex<double>>& values, Selector sel, size_t k) {
    const size_t m = values.size();
    if (k > m) { k = m; }

    // Conjugate partner of each value (pairs are adjacent, +imag first).
    std::vector<size_t> partner(m, static_cast<size_t>(-1));
    for (size_t i = 0; i + 1 < m; ++i) {
      if (values[i].imag() > 0.0 &&
          values[i + 1] == std::conj(values[i])) {
        partner[i] = i + 1;
        partner[i + 1] = i;
      }
    }

    std::vector<size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      if (selector_prefers(sel, values[a], values[b])) { return true; }
      if (selector_prefers(sel, values[b], values[a])) { return false; }
      return a < b;
    });

    std::vector<size_t> rank(m);
    for (size_t pos = 0; pos < m; ++pos) {
      rank[order[pos]] = pos;
    }

    std::vector<char> chosen(m, 0);
    for (size_t pos = 0; pos < k; ++pos) {
      chosen[order[pos]] = 1;
    }

    // Keep conjugate pairs atomic: if the cut splits a pair, keep both
    // when the better member ranks within the top k, else drop both.
    for (size_t i = 0; i < m; ++i) {
      const size_t p = partner[i];
      if (p == static_cast<size_t>(-1) || p < i) { continue; }
      if (chosen[i] == chosen[p]) { continue; }
      const size_t best_rank = std::min(rank[i], rank[p]);
      const char keep = best_rank < k ? 1 : 0;
      chosen[i] = keep;
      chosen[p] = keep;
    }

    std::vector<size_t> out;
    for (size_t i = 0; i < m; ++i) {
      if (chosen[i]) { out.push_back(i); }
    }
    return out;
  }

  std::vector<RitzPair> residual_estimates(const DenseMatrix& t,
                                           const std::vector<double>& b_row) {
    const size_t m = t.rows();
    EigenPairsSmall eig = eig_quasi_triangular(t);
    const double tnorm = frobenius_norm(t);

    std::vector<RitzPair> pairs(m);
    for (size_t i = 0; i < m; ++i) {
      RitzPair& p = pairs[i];
      p.value = eig.values[i];
      p.y.assign(eig.vec(i), eig.vec(i) + m);
      p.clustered = eig.clustered[i] != 0;

      std::complex<double> by{0.0, 0.0};
      for (size_t r = 0; r < m; ++r) {
        by += b_row[r] * p.y[r];
      }
      const double num = std::abs(by);
      const double mod = std::abs(p.value);
      p.residual_estimate = mod < 1e-14 * tnorm ? num : num / mod;
    }
    return pairs;
  }

} // namespace rks
