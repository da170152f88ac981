#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "flashlab/quantize.hpp"
#include "flashlab/rng.hpp"
#include "test_util.hpp"

using flashlab::FloatFormatId;
using flashlab::Matrix;
using flashlab::QuantizedTensor;

namespace {

// Worst-case absolute error of rounding |x| <= amax onto the scaled e4m3
// grid: half the code gap around x/scale, found from the enumerated values.
double half_gap_at(double code_mag) {
  const auto& vals = testutil::e4m3_positive_values();
  auto it = std::upper_bound(vals.begin(), vals.end(), code_mag);
  const double above = it == vals.end() ? vals.back() : *it;
  const double below = it == vals.begin() ? 0.0 : *(it - 1);
  return 0.5 * (above - below) + 1e-18;
}

}  // namespace

TEST_SUITE("quantize") {

TEST_CASE("zero matrix quantizes to scale 1") {
  auto t = flashlab::quantize_per_tensor(Matrix(3, 3), FloatFormatId::fp8e4m3);
  CHECK(t.scales.size() == 1);
  CHECK(t.scales[0] == 1.0);
  for (std::size_t i = 0; i < t.codes.size(); ++i) CHECK(t.codes.data()[i] == 0.0);
}

TEST_CASE("scale is amax over max finite") {
  Matrix m(2, 2, {1.0, -896.0, 0.25, 3.0});
  auto t = flashlab::quantize_per_tensor(m, FloatFormatId::fp8e4m3);
  CHECK(t.scales[0] == 2.0);        // 896 / 448
  CHECK(t.codes(0, 1) == -448.0);   // the amax entry lands exactly on max finite
  CHECK(flashlab::dequantize(t)(0, 1) == -896.0);
}

TEST_CASE("round trip errors stay within half a code gap") {
  Matrix m = flashlab::sample_outlier_matrix(64, 32, 90);
  auto t = flashlab::quantize_per_tensor(m, FloatFormatId::fp8e4m3);
  Matrix back = flashlab::dequantize(t);
  const double s = t.scales[0];
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double code_mag = std::fabs(m.data()[i]) / s;
    CHECK(std::fabs(back.data()[i] - m.data()[i]) <= s * half_gap_at(code_mag));
  }
}

TEST_CASE("non-finite input is rejected") {
  Matrix m(1, 2, {1.0, std::numeric_limits<double>::infinity()});
  CHECK_THROWS_AS(flashlab::quantize_per_tensor(m, FloatFormatId::fp8e4m3),
                  std::invalid_argument);
  CHECK_THROWS_AS(flashlab::quantize_per_block(Matrix(), 4, FloatFormatId::fp8e4m3),
                  std::invalid_argument);
  CHECK_THROWS_AS(flashlab::quantize_per_block(Matrix(4, 4), 0, FloatFormatId::fp8e4m3),
                  std::invalid_argument);
}

TEST_CASE("single block degenerates to per-tensor") {
  Matrix m = flashlab::sample_outlier_matrix(48, 16, 91);
  auto whole = flashlab::quantize_per_tensor(m, FloatFormatId::fp8e4m3);
  auto blocked = flashlab::quantize_per_block(m, 48, FloatFormatId::fp8e4m3);
  CHECK(blocked.scales.size() == 1);
  CHECK(blocked.scales[0] == whole.scales[0]);
  CHECK(testutil::bit_equal(blocked.codes, whole.codes));
  // Oversized block count behaves the same.
  auto oversize = flashlab::quantize_per_block(m, 128, FloatFormatId::fp8e4m3);
  CHECK(oversize.scales[0] == whole.scales[0]);
}

TEST_CASE("an outlier inflates only its own block scale") {
  Matrix clean = flashlab::sample_gaussian_matrix(64, 8, 92);
  Matrix dirty = clean;
  dirty(40, 3) = 400.0;  // lands in block 2 of 16-row blocks
  auto qc = flashlab::quantize_per_block(clean, 16, FloatFormatId::fp8e4m3);
  auto qd = flashlab::quantize_per_block(dirty, 16, FloatFormatId::fp8e4m3);
  REQUIRE(qc.scales.size() == 4);
  CHECK(qd.scales[0] == qc.scales[0]);
  CHECK(qd.scales[1] == qc.scales[1]);
  CHECK(qd.scales[2] > 10.0 * qc.scales[2]);
  CHECK(qd.scales[3] == qc.scales[3]);
}

TEST_CASE("ragged last block gets its own scale") {
  Matrix m = flashlab::sample_gaussian_matrix(20, 4, 93);
  auto t = flashlab::quantize_per_block(m, 8, FloatFormatId::fp8e4m3);
  CHECK(t.scales.size() == 3);  // 8 + 8 + 4 rows
  CHECK(t.scale_for_row(19) == t.scales[2]);
}

TEST_CASE("per-block beats per-tensor on outlier-contaminated data") {
  int wins = 0;
  const int trials = 10;
  for (int s = 0; s < trials; ++s) {
    Matrix m = flashlab::sample_outlier_matrix(2048, 128, 1000 + s);
    auto pt = flashlab::quantize_per_tensor(m, FloatFormatId::fp8e4m3);
    auto pb = flashlab::quantize_per_block(m, 128, FloatFormatId::fp8e4m3);
    const double e_pt = flashlab::rmse(flashlab::dequantize(pt), m);
    const double e_pb = flashlab::rmse(flashlab::dequantize(pb), m);
    wins += (e_pb <= e_pt);
  }
  CHECK(wins >= 9);  // allow one freak seed in ten
}

TEST_CASE("low-precision product of exactly representable integers is exact") {
  // Integers up to 16 and the 448 pin are all e4m3 values, so scale is 1 and
  // codes equal inputs; fp32 accumulation of such small products is exact.
  Matrix a(2, 3, {1, 2, 3, 4, 5, 448});
  Matrix b(3, 2, {2, 1, 0, 3, 1, 448});
  auto qa = flashlab::quantize_per_tensor(a, FloatFormatId::fp8e4m3);
  auto qb = flashlab::quantize_per_tensor(b, FloatFormatId::fp8e4m3);
  CHECK(qa.scales[0] == 1.0);
  CHECK(qb.scales[0] == 1.0);
  Matrix got = flashlab::emulated_matmul(qa, qb, FloatFormatId::fp32);
  Matrix expected = flashlab::matmul(a, b);
  CHECK(testutil::bit_equal(got, expected));
}

TEST_CASE("all-ones inner product counts the contraction length") {
  Matrix row(1, 8, {1, 1, 1, 1, 1, 1, 1, 1});
  Matrix col(8, 1, {1, 1, 1, 1, 1, 1, 1, 1});
  // Pin the scale to 1 by per-tensor quantizing values that include 1 only.
  auto qr = flashlab::quantize_per_tensor(row, FloatFormatId::fp8e4m3);
  auto qc = flashlab::quantize_per_tensor(col, FloatFormatId::fp8e4m3);
  CHECK(qr.scales[0] == doctest::Approx(1.0 / 448.0));
  Matrix got = flashlab::emulated_matmul(qr, qc, FloatFormatId::fp32);
  CHECK(got(0, 0) == doctest::Approx(8.0).epsilon(1e-12));
}

TEST_CASE("emulated matmul matches a scalar code-level oracle bit for bit") {
  Matrix a = flashlab::sample_outlier_matrix(32, 24, 94);
  Matrix bT = flashlab::sample_outlier_matrix(16, 24, 95);
  auto qa = flashlab::quantize_per_block(a, 8, FloatFormatId::fp8e4m3);
  auto qb = flashlab::quantize_per_block(bT, 8, FloatFormatId::fp8e4m3);

  Matrix got = flashlab::emulated_matmul(qa, qb, FloatFormatId::fp32, true);

  // Oracle: float accumulator, k ascending, scales applied once at the end.
  for (std::size_t i = 0; i < 32; ++i)
    for (std::size_t j = 0; j < 16; ++j) {
      float acc = 0.0f;
      for (std::size_t p = 0; p < 24; ++p)
        acc += static_cast<float>(qa.codes(i, p)) * static_cast<float>(qb.codes(j, p));
      // Scales are applied as one multiply by the scale product.
      const double want =
          static_cast<double>(acc) * (qa.scale_for_row(i) * qb.scale_for_row(j));
      CHECK(got(i, j) == want);
    }
}

TEST_CASE("fp64 accumulator matches plain matmul of codes") {
  Matrix a = flashlab::sample_gaussian_matrix(8, 8, 96);
  auto qa = flashlab::quantize_per_tensor(a, FloatFormatId::fp8e4m3);
  Matrix got = flashlab::emulated_matmul(qa, qa, FloatFormatId::fp64, true);
  Matrix codes_prod = flashlab::matmul(qa.codes, qa.codes, true);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j)
      CHECK(got(i, j) == codes_prod(i, j) * (qa.scales[0] * qa.scales[0]));
}

TEST_CASE("contract violations throw") {
  Matrix a = flashlab::sample_gaussian_matrix(8, 6, 97);
  Matrix b = flashlab::sample_gaussian_matrix(6, 4, 98);
  auto qa = flashlab::quantize_per_tensor(a, FloatFormatId::fp8e4m3);
  auto qb_blocked = flashlab::quantize_per_block(b, 2, FloatFormatId::fp8e4m3);
  CHECK_THROWS_AS(flashlab::emulated_matmul(qa, qb_blocked, FloatFormatId::fp32),
                  std::invalid_argument);
  auto qb = flashlab::quantize_per_tensor(b, FloatFormatId::fp8e4m3);
  CHECK_THROWS_AS(flashlab::emulated_matmul(qa, qb, FloatFormatId::fp16),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      flashlab::emulated_matmul(qa, flashlab::quantize_per_tensor(
                                        Matrix(5, 4), FloatFormatId::fp8e4m3),
                                FloatFormatId::fp32),
      std::invalid_argument);
}

}  // TEST_SUITE
