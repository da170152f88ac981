#pragma once
// Dense row-major FP64 matrices plus the handful of kernels everything else
// builds on. matmul fixes its summation order (k ascending per output entry),
// so results are bit-reproducible across runs and row-block decompositions
// match the monolithic product bit-for-bit.

#include <cstddef>
#include <vector>

namespace flashlab {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols);  // zero-filled
  Matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> vals);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }

  double* row_ptr(std::size_t i) { return data_.data() + i * cols_; }
  const double* row_ptr(std::size_t i) const { return data_.data() + i * cols_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// c = a*b, or a*b^T when transpose_b is set. FP64 accumulation, k ascending
// per entry. Throws std::invalid_argument on inner-dimension mismatch.
Matrix matmul(const Matrix& a, const Matrix& b, bool transpose_b = false);

Matrix transpose(const Matrix& m);

// Copy of the block [r0, r0+nrows) x [c0, c0+ncols). Bounds-checked.
Matrix block(const Matrix& m, std::size_t r0, std::size_t nrows, std::size_t c0,
             std::size_t ncols);

// Rowwise max / sum. -inf entries are legal inputs for row_max (masking);
// both throw on an empty matrix.
std::vector<double> row_max(const Matrix& m);
std::vector<double> row_sum(const Matrix& m);

// Root-mean-square difference over all entries; shapes must match.
double rmse(const Matrix& a, const Matrix& b);
double max_abs_diff(const Matrix& a, const Matrix& b);

namespace detail {

// c[i][j] += sum_p a[i][p] * bt[p][j] with bt laid out k-major [k x n].
// The j loop carries no dependency, so this vectorizes while keeping the
// per-entry addition order fixed (p ascending).
template <typename T>
void gemm_kt_major(const T* a, std::size_t m, std::size_t k, const T* bt,
                   std::size_t n, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* ar = a + i * k;
    T* cr = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = ar[p];
      const T* br = bt + p * n;
      for (std::size_t j = 0; j < n; ++j) cr[j] += av * br[j];
    }
  }
}

}  // namespace detail

}  // namespace flashlab
