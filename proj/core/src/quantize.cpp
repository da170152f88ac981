#include "flashlab/quantize.hpp"

#include <cmath>
#include <stdexcept>

namespace flashlab {

namespace {

double abs_max(const Matrix& m, std::size_t r0, std::size_t r1) {
  double amax = 0.0;
  for (std::size_t i = r0; i < r1; ++i) {
    const double* row = m.row_ptr(i);
    for (std::size_t j = 0; j < m.cols(); ++j) {
      const double a = std::fabs(row[j]);
      if (!std::isfinite(a)) throw std::invalid_argument("quantize: non-finite input entry");
      if (a > amax) amax = a;
    }
  }
  return amax;
}

void encode_rows(const Matrix& src, Matrix& dst, std::size_t r0, std::size_t r1,
                 double scale, const FloatFormat& fmt, OverflowPolicy overflow) {
  const double inv = 1.0 / scale;
  for (std::size_t i = r0; i < r1; ++i) {
    const double* s = src.row_ptr(i);
    double* d = dst.row_ptr(i);
    for (std::size_t j = 0; j < src.cols(); ++j) d[j] = round_to(s[j] * inv, fmt, overflow);
  }
}

}  // namespace

QuantizedTensor quantize_per_tensor(const Matrix& m, FloatFormatId fmt,
                                    OverflowPolicy overflow) {
  if (m.empty()) throw std::invalid_argument("quantize_per_tensor: empty matrix");
  const FloatFormat& f = float_format(fmt);
  const double amax = abs_max(m, 0, m.rows());
  const double scale = amax == 0.0 ? 1.0 : amax / f.max_finite;
  QuantizedTensor t{Matrix(m.rows(), m.cols()), fmt, {scale}, 0};
  encode_rows(m, t.codes, 0, m.rows(), scale, f, overflow);
  return t;
}

QuantizedTensor quantize_per_block(const Matrix& m, std::size_t block_rows,
                                   FloatFormatId fmt, OverflowPolicy overflow) {
  if (m.empty()) throw std::invalid_argument("quantize_per_block: empty matrix");
  if (block_rows == 0) throw std::invalid_argument("quantize_per_block: block_rows == 0");
  const FloatFormat& f = float_format(fmt);
  QuantizedTensor t{Matrix(m.rows(), m.cols()), fmt, {}, block_rows};
  for (std::size_t r0 = 0; r0 < m.rows(); r0 += block_rows) {
    const std::size_t r1 = std::min(m.rows(), r0 + block_rows);
    const double amax = abs_max(m, r0, r1);
    const double scale = amax == 0.0 ? 1.0 : amax / f.max_finite;
    t.scales.push_back(scale);
    encode_rows(m, t.codes, r0, r1, scale, f, overflow);
  }
  return t;
}

Matrix dequantize(const QuantizedTensor& t) {
  Matrix out(t.codes.rows(), t.codes.cols());
  for (std::size_t i = 0; i < out.rows(); ++i) {
    const double s = t.scale_for_row(i);
    const double* c = t.codes.row_ptr(i);
    double* o = out.row_ptr(i);
    for (std::size_t j = 0; j < out.cols(); ++j) o[j] = c[j] * s;
  }
  return out;
}

namespace {

// Shared low-precision GEMM core: bt is k-major [k x n] float codes.
void gemm_codes_f32(const std::vector<float>& a, std::size_t m, std::size_t k,
                    const std::vector<float>& bt, std::size_t n, std::vector<float>& c) {
  detail::gemm_kt_major(a.data(), m, k, bt.data(), n, c.data());
}

std::vector<float> to_f32(const Matrix& m, bool transposed) {
  // Code values in any supported narrow format are exactly representable in
  // binary32, so this conversion is lossless.
  std::vector<float> out(m.size());
  if (!transposed) {
    for (std::size_t i = 0; i < m.size(); ++i) out[i] = static_cast<float>(m.data()[i]);
  } else {
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t j = 0; j < m.cols(); ++j)
        out[j * m.rows() + i] = static_cast<float>(m(i, j));
  }
  return out;
}

}  // namespace

Matrix emulated_matmul(const QuantizedTensor& a, const QuantizedTensor& b,
                       FloatFormatId acc_fmt, bool transpose_b) {
  const Matrix& ac = a.codes;
  const Matrix& bc = b.codes;
  const std::size_t k = ac.cols();
  const std::size_t bk = transpose_b ? bc.cols() : bc.rows();
  const std::size_t n = transpose_b ? bc.rows() : bc.cols();
  if (k != bk) throw std::invalid_argument("emulated_matmul: inner dimensions mismatch");
  // Row blocks of b become output columns under transpose_b and stay legal;
  // without transpose_b they would vary along the contraction dimension.
  if (!transpose_b && b.per_block() && b.num_blocks() > 1)
    throw std::invalid_argument(
        "emulated_matmul: per-block right operand varies along the contraction "
        "dimension; pass it transposed");

  Matrix out(ac.rows(), n);
  if (acc_fmt == FloatFormatId::fp32) {
    std::vector<float> af = to_f32(ac, false);
    std::vector<float> btf = transpose_b ? to_f32(bc, true) : to_f32(bc, false);
    std::vector<float> cf(ac.rows() * n, 0.0f);
    gemm_codes_f32(af, ac.rows(), k, btf, n, cf);
    for (std::size_t i = 0; i < ac.rows(); ++i)
      for (std::size_t j = 0; j < n; ++j) out(i, j) = static_cast<double>(cf[i * n + j]);
  } else if (acc_fmt == FloatFormatId::fp64) {
    out = matmul(ac, bc, transpose_b);
  } else {
    throw std::invalid_argument("emulated_matmul: accumulator must be fp32 or fp64");
  }

  for (std::size_t i = 0; i < out.rows(); ++i) {
    const double sa = a.scale_for_row(i);
    double* row = out.row_ptr(i);
    for (std::size_t j = 0; j < n; ++j) {
      const double sb = transpose_b ? b.scale_for_row(j) : b.scales[0];
      row[j] *= sa * sb;
    }
  }
  return out;
}

}  // namespace flashlab
