#include "flashlab/hadamard.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

#include "flashlab/rng.hpp"

namespace flashlab {

void fwht(std::span<double> v) {
  const std::size_t n = v.size();
  if (n == 0 || !std::has_single_bit(n))
    throw std::invalid_argument("fwht: length must be a power of two");
  for (std::size_t len = 1; len < n; len <<= 1) {
    for (std::size_t i = 0; i < n; i += len << 1) {
      for (std::size_t j = i; j < i + len; ++j) {
        const double a = v[j];
        const double b = v[j + len];
        v[j] = a + b;
        v[j + len] = a - b;
      }
    }
  }
  const double norm = 1.0 / std::sqrt(static_cast<double>(n));
  for (double& x : v) x *= norm;
}

void DHTransform::apply(std::span<double> v) const {
  if (v.size() != dim) throw std::invalid_argument("DHTransform: length mismatch");
  for (std::size_t i = 0; i < dim; ++i) v[i] *= signs[i];
  fwht(v);
}

void DHTransform::apply_inverse(std::span<double> v) const {
  if (v.size() != dim) throw std::invalid_argument("DHTransform: length mismatch");
  fwht(v);
  for (std::size_t i = 0; i < dim; ++i) v[i] *= signs[i];
}

void DHTransform::apply_rows(Matrix& m) const {
  if (m.cols() != dim) throw std::invalid_argument("DHTransform: column count mismatch");
  for (std::size_t i = 0; i < m.rows(); ++i) apply(std::span<double>(m.row_ptr(i), dim));
}

void DHTransform::apply_inverse_rows(Matrix& m) const {
  if (m.cols() != dim) throw std::invalid_argument("DHTransform: column count mismatch");
  for (std::size_t i = 0; i < m.rows(); ++i)
    apply_inverse(std::span<double>(m.row_ptr(i), dim));
}

Matrix DHTransform::dense() const {
  // Row i of the result is the image of the i-th unit row vector, which is
  // exactly row i of M under the q' = q * M convention.
  Matrix m = Matrix::identity(dim);
  apply_rows(m);
  return m;
}

DHTransform random_dh_transform(std::size_t dim, std::uint64_t seed) {
  if (dim == 0 || !std::has_single_bit(dim))
    throw std::invalid_argument("random_dh_transform: dim must be a power of two");
  return DHTransform{dim, sample_sign_vector(dim, seed)};
}

}  // namespace flashlab
