#pragma once
// Fast Walsh-Hadamard transform and the random sign-flip orthogonal transform
// built from it. With M = diag(signs) * H / sqrt(d), applying M to the rows of
// both Q and K leaves Q K^T unchanged while spreading any single large entry
// across all d coordinates.

#include <cstdint>
#include <span>

#include "flashlab/matrix.hpp"

namespace flashlab {

// In-place normalized transform (H v / sqrt(n)); n must be a power of two.
// Involution: applying it twice recovers the input up to FP64 roundoff.
void fwht(std::span<double> v);

struct DHTransform {
  std::size_t dim = 0;
  std::vector<double> signs;  // entries exactly +1 or -1

  // w = H (signs o v) / sqrt(d): sign flip then normalized Hadamard.
  void apply(std::span<double> v) const;
  // Inverse (= transpose): normalized Hadamard then sign flip.
  void apply_inverse(std::span<double> v) const;

  // Applied to every row in place.
  void apply_rows(Matrix& m) const;
  void apply_inverse_rows(Matrix& m) const;

  // Dense d x d matrix equal to diag(signs) * H / sqrt(d); rows of a matrix
  // are transformed as q' = q * dense(). Test and inspection aid.
  Matrix dense() const;
};

DHTransform random_dh_transform(std::size_t dim, std::uint64_t seed);

}  // namespace flashlab
