#pragma once
// Shared helpers for the unit tests: independent oracles kept deliberately
// naive so they cross-check the library kernels rather than mirror them.

#include <algorithm>
#include <cmath>
#include <vector>

#include "flashlab/matrix.hpp"

namespace testutil {

// Scalar triple loop, one accumulator per output entry, k ascending.
inline flashlab::Matrix matmul_oracle(const flashlab::Matrix& a, const flashlab::Matrix& b,
                                      bool transpose_b = false) {
  const std::size_t k = a.cols();
  const std::size_t n = transpose_b ? b.rows() : b.cols();
  flashlab::Matrix c(a.rows(), n);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p)
        acc += a(i, p) * (transpose_b ? b(j, p) : b(p, j));
      c(i, j) = acc;
    }
  return c;
}

// All positive finite e4m3 values (OCP convention, 126 of them), ascending.
inline const std::vector<double>& e4m3_positive_values() {
  static const std::vector<double> vals = [] {
    std::vector<double> v;
    for (int exp = 0; exp < 16; ++exp)
      for (int mant = 0; mant < 8; ++mant) {
        if (exp == 15 && mant == 7) continue;  // NaN slot
        if (exp == 0 && mant == 0) continue;   // zero handled separately
        const double m = mant / 8.0;
        v.push_back(exp == 0 ? m * std::ldexp(1.0, -6)
                             : (1.0 + m) * std::ldexp(1.0, exp - 7));
      }
    std::sort(v.begin(), v.end());
    return v;
  }();
  return vals;
}

inline bool bit_equal(const flashlab::Matrix& a, const flashlab::Matrix& b) {
  if (!a.same_shape(b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.data()[i] != b.data()[i]) return false;
  return true;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double amax(const flashlab::Matrix& m) {
  double a = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i)
    a = std::max(a, std::fabs(m.data()[i]));
  return a;
}

}  // namespace testutil
