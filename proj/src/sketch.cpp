//
// ... Standard header files
//
#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

//
// ... rks header files
//
#include <rks/dense_core.hpp>
#include <rks/kernels.hpp>
#include <rks/sketch.hpp>

namespace rks {

  SparseSignEmbedding::SparseSignEmbedding(size_t d, size_t n, size_t zeta,
                                           std::uint64_t seed)
      : d_{d}, n_{n}, zeta_{zeta}, seed_{seed} {
    if (zeta < 1 || zeta > d || d > n) {
      throw std::invalid_argument(
        "build_embedding: need 1 <= zeta <= d <= n");
    }
    scale_ = 1.0 / std::sqrt(static_cast<double>(zeta));
    rows_.resize(n * zeta);
    signs_.resize(n * zeta);

    std::mt19937_64 rng{seed};
    std::vector<size_t> pick;
    pick.reserve(zeta);
    for (size_t col = 0; col < n; ++col) {
      // Floyd's sampling: zeta distinct rows from [0, d).
      pick.clear();
      for (size_t t = d - zeta; t < d; ++t) {
        const size_t r =
          static_cast<size_t>(rng() % static_cast<std::uint64_t>(t + 1));
        bool dup = false;
        for (size_t u : pick) {
          if (u == r) {
            dup = true;
            break;
          }
        }
        pick.push_back(dup ? t : r);
      }
      std::sort(pick.begin(), pick.end());
      const size_t off = col * zeta;
      for (size_t t = 0; t < zeta; ++t) {
        rows_[off + t] = pick[t];
        signs_[off + t] = (rng() & 1u) ? std::int8_t{1} : std::int8_t{-1};
      }
    }
  }

  SparseSignEmbedding SparseSignEmbedding::identity(size_t n) {
    SparseSignEmbedding e(n, n, 1, 0);
    e.scale_ = 1.0;
    for (size_t col = 0; col < n; ++col) {
      e.rows_[col] = col;
      e.signs_[col] = 1;
    }
    return e;
  }

  void SparseSignEmbedding::apply(const double* x, double* y) const {
    kernels::sketch_apply(n_, d_, zeta_, rows_.data(), signs_.data(), scale_,
                          x, y);
  }

  std::vector<double> SparseSignEmbedding::apply(
    const std::vector<double>& x) const {
    if (x.size() != n_) {
      throw std::invalid_argument("sketch apply: dimension mismatch");
    }
    std::vector<double> y(d_);
    apply(x.data(), y.data());
    return y;
  }

  DenseMatrix SparseSignEmbedding::apply_block(const DenseMatrix& x) const {
    if (x.rows() != n_) {
      throw std::invalid_argument("sketch apply_block: dimension mismatch");
    }
    DenseMatrix out(d_, x.cols());
    for (size_t c = 0; c < x.cols(); ++c) {
      apply(x.col(c), out.col(c));
    }
    return out;
  }

  double SparseSignEmbedding::sketch_norm(const double* x) const {
    std::vector<double> y(d_);
    apply(x, y.data());
    return kernels::norm2(d_, y.data());
  }

  double SparseSignEmbedding::sketch_norm(const std::vector<double>& x) const {
    if (x.size() != n_) {
      throw std::invalid_argument("sketch_norm: dimension mismatch");
    }
    return sketch_norm(x.data());
  }

  double estimate_distortion(const SparseSignEmbedding& omega,
                             const DenseMatrix& basis) {
    // Orthonormalize so the Gram spectrum measures the subspace alone.
    QrResult qr = householder_qr(basis);
    if (qr.rank_deficient) {
      throw std::invalid_argument("estimate_distortion: basis is degenerate");
    }
    DenseMatrix sq = omega.apply_block(qr.q);
    DenseMatrix gram = matmul_tn(sq, sq);
    // Symmetric, so the Schur form is diagonal.
    RealSchurForm schur = real_schur(gram);
    double eps = 0.0;
    for (size_t i = 0; i < gram.rows(); ++i) {
      eps = std::max(eps, std::abs(schur.t(i, i) - 1.0));
    }
    return eps;
  }

} // namespace rks
