#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "flashlab/hadamard.hpp"
#include "flashlab/matrix.hpp"
#include "flashlab/rng.hpp"
#include "test_util.hpp"

using flashlab::Matrix;

namespace {

// Sylvester construction of the unnormalized Hadamard matrix.
Matrix dense_hadamard(std::size_t n) {
  Matrix h(1, 1, {1.0});
  for (std::size_t m = 1; m < n; m <<= 1) {
    Matrix next(2 * m, 2 * m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        next(i, j) = h(i, j);
        next(i, j + m) = h(i, j);
        next(i + m, j) = h(i, j);
        next(i + m, j + m) = -h(i, j);
      }
    h = next;
  }
  return h;
}

}  // namespace

TEST_SUITE("hadamard") {

TEST_CASE("unit impulse spreads uniformly") {
  std::vector<double> v{1.0, 0.0, 0.0, 0.0};
  flashlab::fwht(v);
  for (double x : v) CHECK(x == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("normalized transform is an involution") {
  Matrix m = flashlab::sample_gaussian_matrix(1, 64, 9);
  std::vector<double> v(m.data(), m.data() + 64);
  std::vector<double> orig = v;
  flashlab::fwht(v);
  flashlab::fwht(v);
  for (std::size_t i = 0; i < v.size(); ++i)
    CHECK(std::fabs(v[i] - orig[i]) < 1e-12);
}

TEST_CASE("butterfly equals dense Hadamard product across dims") {
  for (std::size_t d : {2u, 4u, 8u, 16u, 32u, 64u, 128u, 256u}) {
    Matrix h = dense_hadamard(d);
    Matrix x = flashlab::sample_gaussian_matrix(d, 1, 100 + d);
    // Dense reference: H x / sqrt(d).
    Matrix hx = testutil::matmul_oracle(h, x);
    std::vector<double> v(d);
    for (std::size_t i = 0; i < d; ++i) v[i] = x(i, 0);
    flashlab::fwht(v);
    const double norm = 1.0 / std::sqrt(static_cast<double>(d));
    for (std::size_t i = 0; i < d; ++i)
      CHECK(std::fabs(v[i] - hx(i, 0) * norm) < 1e-12);
  }
}

TEST_CASE("length must be a power of two") {
  std::vector<double> v3(3), v12(12), v0;
  CHECK_THROWS_AS(flashlab::fwht(v3), std::invalid_argument);
  CHECK_THROWS_AS(flashlab::fwht(v12), std::invalid_argument);
  CHECK_THROWS_AS(flashlab::fwht(v0), std::invalid_argument);
  CHECK_THROWS_AS(flashlab::random_dh_transform(24, 1), std::invalid_argument);
}

TEST_CASE("random transform is orthogonal") {
  for (std::size_t d : {8u, 64u}) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      auto t = flashlab::random_dh_transform(d, seed);
      Matrix m = t.dense();
      Matrix mmt = flashlab::matmul(m, m, true);
      Matrix id = Matrix::identity(d);
      CHECK(flashlab::max_abs_diff(mmt, id) < 1e-12);
    }
  }
}

TEST_CASE("apply_rows agrees with multiplication by the dense matrix") {
  auto t = flashlab::random_dh_transform(16, 77);
  Matrix q = flashlab::sample_gaussian_matrix(5, 16, 78);
  Matrix expected = flashlab::matmul(q, t.dense());
  Matrix got = q;
  t.apply_rows(got);
  CHECK(flashlab::max_abs_diff(got, expected) < 1e-12);
}

TEST_CASE("inverse transform restores the input") {
  auto t = flashlab::random_dh_transform(128, 5);
  Matrix q = flashlab::sample_outlier_matrix(4, 128, 6);
  Matrix roundtrip = q;
  t.apply_rows(roundtrip);
  t.apply_inverse_rows(roundtrip);
  CHECK(flashlab::max_abs_diff(roundtrip, q) < 1e-12);
}

TEST_CASE("paired transforms preserve score products") {
  auto t = flashlab::random_dh_transform(64, 11);
  Matrix q = flashlab::sample_outlier_matrix(32, 64, 12);
  Matrix k = flashlab::sample_outlier_matrix(32, 64, 13);
  Matrix s_ref = flashlab::matmul(q, k, true);
  Matrix qt = q, kt = k;
  t.apply_rows(qt);
  t.apply_rows(kt);
  Matrix s_got = flashlab::matmul(qt, kt, true);
  CHECK(flashlab::max_abs_diff(s_got, s_ref) < 1e-10);
}

TEST_CASE("signs are deterministic in the seed") {
  auto a = flashlab::random_dh_transform(32, 9);
  auto b = flashlab::random_dh_transform(32, 9);
  auto c = flashlab::random_dh_transform(32, 10);
  CHECK(a.signs == b.signs);
  CHECK(a.signs != c.signs);
}

}  // TEST_SUITE
