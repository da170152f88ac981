#include "flashlab/matrix.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace flashlab {

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> vals)
    : rows_(rows), cols_(cols), data_(vals) {
  if (data_.size() != rows * cols)
    throw std::invalid_argument("Matrix: initializer size " + std::to_string(data_.size()) +
                                " does not match " + std::to_string(rows) + "x" +
                                std::to_string(cols));
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix matmul(const Matrix& a, const Matrix& b, bool transpose_b) {
  const std::size_t k = a.cols();
  const std::size_t bk = transpose_b ? b.cols() : b.rows();
  const std::size_t n = transpose_b ? b.rows() : b.cols();
  if (k != bk)
    throw std::invalid_argument("matmul: inner dimensions " + std::to_string(k) + " vs " +
                                std::to_string(bk));
  Matrix c(a.rows(), n);
  if (transpose_b) {
    Matrix bt = transpose(b);  // k-major layout; per-entry order unchanged
    detail::gemm_kt_major(a.data(), a.rows(), k, bt.data(), n, c.data());
  } else {
    detail::gemm_kt_major(a.data(), a.rows(), k, b.data(), n, c.data());
  }
  return c;
}

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  return t;
}

Matrix block(const Matrix& m, std::size_t r0, std::size_t nrows, std::size_t c0,
             std::size_t ncols) {
  if (r0 + nrows > m.rows() || c0 + ncols > m.cols())
    throw std::invalid_argument("block: range out of bounds");
  Matrix out(nrows, ncols);
  for (std::size_t i = 0; i < nrows; ++i)
    for (std::size_t j = 0; j < ncols; ++j) out(i, j) = m(r0 + i, c0 + j);
  return out;
}

std::vector<double> row_max(const Matrix& m) {
  if (m.rows() == 0 || m.cols() == 0) throw std::invalid_argument("row_max: empty matrix");
  std::vector<double> out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double best = -std::numeric_limits<double>::infinity();
    const double* r = m.row_ptr(i);
    for (std::size_t j = 0; j < m.cols(); ++j)
      if (r[j] > best) best = r[j];
    out[i] = best;
  }
  return out;
}

std::vector<double> row_sum(const Matrix& m) {
  if (m.rows() == 0 || m.cols() == 0) throw std::invalid_argument("row_sum: empty matrix");
  std::vector<double> out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    const double* r = m.row_ptr(i);
    for (std::size_t j = 0; j < m.cols(); ++j) s += r[j];
    out[i] = s;
  }
  return out;
}

double rmse(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("rmse: shape mismatch");
  if (a.empty()) throw std::invalid_argument("rmse: empty matrix");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(a.size()));
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
  double best = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::fabs(a.data()[i] - b.data()[i]);
    if (d > best) best = d;
  }
  return best;
}

}  // namespace flashlab
