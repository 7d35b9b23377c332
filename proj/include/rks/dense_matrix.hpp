#pragma once

//
// ... Standard header files
//
#include <cassert>
#include <cstddef>
#include <vector>

namespace rks {

  using std::size_t;

  /**
   * @brief Dense column-major matrix of doubles.
   *
   * Used both for the small factors (Rayleigh quotients, Schur forms,
   * dimensions up to max(d, m)) and as storage for the large n-by-j
   * Krylov bases, whose columns are appended incrementally.
   */
  class DenseMatrix {
  public:
    DenseMatrix() = default;

    DenseMatrix(size_t rows, size_t cols, double fill = 0.0)
        : rows_{rows}, cols_{cols}, data_(rows * cols, fill) {}

    static DenseMatrix identity(size_t m) {
      DenseMatrix eye(m, m);
      for (size_t i = 0; i < m; ++i) {
        eye(i, i) = 1.0;
      }
      return eye;
    }

    size_t rows() const { return rows_; }
    size_t cols() const { return cols_; }
    bool empty() const { return rows_ == 0 || cols_ == 0; }

    double& operator()(size_t i, size_t j) {
      assert(i < rows_ && j < cols_);
      return data_[i + j * rows_];
    }
    double operator()(size_t i, size_t j) const {
      assert(i < rows_ && j < cols_);
      return data_[i + j * rows_];
    }

    double* col(size_t j) { return data_.data() + j * rows_; }
    const double* col(size_t j) const { return data_.data() + j * rows_; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    void reserve_cols(size_t cols) { data_.reserve(rows_ * cols); }

    /// Append one column (v must have rows() entries). Valid on an
    /// empty matrix if rows was set via resize_rows first.
    void append_col(const double* v) {
      if (rows_ > 0) {
        data_.insert(data_.end(), v, v + rows_);
      }
      ++cols_;
    }

    void resize_rows(size_t rows) {
      assert(cols_ == 0);
      rows_ = rows;
    }

    /// Keep the leading k columns.
    void truncate_cols(size_t k) {
      assert(k <= cols_);
      data_.resize(rows_ * k);
      cols_ = k;
    }

    void drop_leading_cols(size_t q) {
      assert(q <= cols_);
      data_.erase(data_.begin(),
                  data_.begin() + static_cast<std::ptrdiff_t>(q * rows_));
      cols_ -= q;
    }

  private:
    size_t rows_ = 0;
    size_t cols_ = 0;
    std::vector<double> data_;
  };

  //
  // Small-dimension helpers (serial; intended for matrices whose sizes
  // are bounded by the sketch dimension d or Krylov dimension m).
  //

  /// C = A * B
  DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);

  /// C = A^T * B
  DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);

  DenseMatrix transpose(const DenseMatrix& a);

  double frobenius_norm(const DenseMatrix& a);

  /// Max absolute column sum.
  double norm1(const DenseMatrix& a);

  /// ||A^T A - I||_F, the orthonormality defect of the columns.
  double orthonormality_defect(const DenseMatrix& a);

} // namespace rks
