#include "flashlab/lowprec.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "flashlab/quantize.hpp"

namespace flashlab {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double to_f32(double x) { return static_cast<double>(static_cast<float>(x)); }

Matrix round_matrix(const Matrix& m, FloatFormatId fmt) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.size(); ++i)
    out.data()[i] = round_to(m.data()[i], fmt);
  return out;
}

// Values already in the target format, scale one: emulated_matmul then only
// contributes the exact code products and the fp32 accumulator.
QuantizedTensor codes_of(Matrix m, FloatFormatId fmt) {
  return {std::move(m), fmt, {1.0}, 0};
}

void check_block(std::size_t block_rows) {
  if (block_rows == 0)
    throw std::invalid_argument("baseline_lowprec_attention: block_rows == 0");
}

void mask_causal(Matrix& s, std::size_t r0) {
  for (std::size_t i = 0; i < s.rows(); ++i) {
    double* row = s.row_ptr(i);
    for (std::size_t j = r0 + i + 1; j < s.cols(); ++j) row[j] = kNegInf;
  }
}

// Standard attention with every softmax intermediate in fp16, streamed over
// query row blocks.
ForwardOutput fp16_baseline(const AttentionInputs& in, std::size_t block_rows) {
  const std::size_t n = in.q.rows();
  const std::size_t d = in.q.cols();
  const Matrix q16 = round_matrix(in.q, FloatFormatId::fp16);
  const QuantizedTensor k16 = codes_of(round_matrix(in.k, FloatFormatId::fp16),
                                       FloatFormatId::fp16);
  const QuantizedTensor v16 = codes_of(round_matrix(in.v, FloatFormatId::fp16),
                                       FloatFormatId::fp16);

  ForwardOutput out{Matrix(n, d), std::vector<double>(n, 0.0)};
  for (std::size_t r0 = 0; r0 < n; r0 += block_rows) {
    const std::size_t nr = std::min(block_rows, n - r0);
    Matrix s = emulated_matmul(codes_of(block(q16, r0, nr, 0, d), FloatFormatId::fp16),
                               k16, FloatFormatId::fp32, true);
    for (std::size_t i = 0; i < s.size(); ++i)
      s.data()[i] = round_to(s.data()[i] * in.alpha, FloatFormatId::fp16);
    if (in.causal) mask_causal(s, r0);

    for (std::size_t i = 0; i < nr; ++i) {
      double* row = s.row_ptr(i);
      double m = kNegInf;
      for (std::size_t j = 0; j < n; ++j) m = std::max(m, row[j]);
      double ell = 0.0;  // fp32 carrier
      for (std::size_t j = 0; j < n; ++j) {
        row[j] = round_to(std::exp(row[j] - m), FloatFormatId::fp16);
        ell = to_f32(ell + row[j]);
      }
      for (std::size_t j = 0; j < n; ++j)
        row[j] = round_to(row[j] / ell, FloatFormatId::fp16);
      out.logsumexp[r0 + i] = m + std::log(ell);
    }

    const Matrix o = emulated_matmul(codes_of(std::move(s), FloatFormatId::fp16),
                                     v16, FloatFormatId::fp32, false);
    for (std::size_t i = 0; i < nr; ++i)
      for (std::size_t j = 0; j < d; ++j)
        out.o(r0 + i, j) = round_to(o(i, j), FloatFormatId::fp16);
  }
  return out;
}

// Standard attention with per-tensor e4m3 operands: S is the fp32
// accumulator output, softmax intermediates are fp16, and P is requantized
// with one amax-derived scale for the value GEMM. The normalized
// probabilities are staged in a float buffer so the global amax is known
// before any P codes are formed.
ForwardOutput fp8_baseline(const AttentionInputs& in, std::size_t block_rows,
                           OverflowPolicy overflow) {
  const std::size_t n = in.q.rows();
  const std::size_t d = in.q.cols();
  const auto e4m3 = FloatFormatId::fp8e4m3;
  const QuantizedTensor qq = quantize_per_tensor(in.q, e4m3, overflow);
  const QuantizedTensor qk = quantize_per_tensor(in.k, e4m3, overflow);
  const QuantizedTensor qv = quantize_per_tensor(in.v, e4m3, overflow);
  const double descale = in.alpha * qq.scales[0] * qk.scales[0];
  const QuantizedTensor kcodes = codes_of(qk.codes, e4m3);
  const QuantizedTensor vcodes = codes_of(qv.codes, e4m3);

  std::vector<float> pbuf(n * n);
  ForwardOutput out{Matrix(n, d), std::vector<double>(n, 0.0)};
  double amax = 0.0;
  for (std::size_t r0 = 0; r0 < n; r0 += block_rows) {
    const std::size_t nr = std::min(block_rows, n - r0);
    Matrix s = emulated_matmul(codes_of(block(qq.codes, r0, nr, 0, d), e4m3),
                               kcodes, FloatFormatId::fp32, true);
    for (std::size_t i = 0; i < s.size(); ++i)
      s.data()[i] = to_f32(s.data()[i] * descale);
    if (in.causal) mask_causal(s, r0);

    for (std::size_t i = 0; i < nr; ++i) {
      double* row = s.row_ptr(i);
      double m = kNegInf;
      for (std::size_t j = 0; j < n; ++j) m = std::max(m, row[j]);
      double ell = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        row[j] = round_to(std::exp(row[j] - m), FloatFormatId::fp16);
        ell = to_f32(ell + row[j]);
      }
      float* prow = pbuf.data() + (r0 + i) * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double p = round_to(row[j] / ell, FloatFormatId::fp16);
        prow[j] = static_cast<float>(p);
        amax = std::max(amax, p);
      }
      out.logsumexp[r0 + i] = m + std::log(ell);
    }
  }

  const double sp = amax == 0.0 ? 1.0 : amax / float_format(e4m3).max_finite;
  const double sv = qv.scales[0];
  for (std::size_t r0 = 0; r0 < n; r0 += block_rows) {
    const std::size_t nr = std::min(block_rows, n - r0);
    Matrix pcodes(nr, n);
    for (std::size_t i = 0; i < nr; ++i) {
      const float* src = pbuf.data() + (r0 + i) * n;
      double* dst = pcodes.row_ptr(i);
      for (std::size_t j = 0; j < n; ++j)
        dst[j] = round_to(src[j] / sp, e4m3, overflow);
    }
    const Matrix o = emulated_matmul(codes_of(std::move(pcodes), e4m3),
                                     vcodes, FloatFormatId::fp32);
    for (std::size_t i = 0; i < nr; ++i)
      for (std::size_t j = 0; j < d; ++j)
        out.o(r0 + i, j) = round_to(o(i, j) * (sp * sv), FloatFormatId::fp16);
  }
  return out;
}

}  // namespace

ForwardOutput baseline_lowprec_attention(const AttentionInputs& in, FloatFormatId fmt,
                                         std::size_t block_rows,
                                         OverflowPolicy overflow) {
  validate_inputs(in);
  check_block(block_rows);
  if (fmt == FloatFormatId::fp16) return fp16_baseline(in, block_rows);
  if (fmt == FloatFormatId::fp8e4m3) return fp8_baseline(in, block_rows, overflow);
  throw std::invalid_argument("baseline_lowprec_attention: fmt must be fp16 or fp8e4m3");
}

ForwardOutput fp16_flash_fwd(const AttentionInputs& in, const TileConfig& cfg) {
  validate_inputs(in);
  if (cfg.block_rows == 0 || cfg.block_cols == 0)
    throw std::invalid_argument("fp16_flash_fwd: tile sizes must be positive");
  const std::size_t n = in.q.rows();
  const std::size_t d = in.q.cols();
  const auto fp16 = FloatFormatId::fp16;
  const Matrix q16 = round_matrix(in.q, fp16);
  const Matrix k16 = round_matrix(in.k, fp16);
  const Matrix v16 = round_matrix(in.v, fp16);

  ForwardOutput out{Matrix(n, d), std::vector<double>(n, 0.0)};
  for (std::size_t r0 = 0; r0 < n; r0 += cfg.block_rows) {
    const std::size_t nr = std::min(cfg.block_rows, n - r0);
    const QuantizedTensor qrows = codes_of(block(q16, r0, nr, 0, d), fp16);
    // Online softmax state and output accumulator live in fp32.
    std::vector<double> m(nr, kNegInf), ell(nr, 0.0);
    Matrix o_acc(nr, d);
    for (std::size_t c0 = 0; c0 < n; c0 += cfg.block_cols) {
      const std::size_t nc = std::min(cfg.block_cols, n - c0);
      if (in.causal && c0 > r0 + nr - 1) continue;
      Matrix s = emulated_matmul(qrows, codes_of(block(k16, c0, nc, 0, d), fp16),
                                 FloatFormatId::fp32, true);
      for (std::size_t i = 0; i < s.size(); ++i)
        s.data()[i] = to_f32(s.data()[i] * in.alpha);
      std::vector<double> rescale(nr, 0.0);
      for (std::size_t i = 0; i < nr; ++i) {
        double* row = s.row_ptr(i);
        if (in.causal) {
          const std::size_t qpos = r0 + i;
          for (std::size_t j = 0; j < nc; ++j)
            if (c0 + j > qpos) row[j] = kNegInf;
        }
        double m_new = m[i];
        for (std::size_t j = 0; j < nc; ++j) m_new = std::max(m_new, row[j]);
        if (m_new == kNegInf) {
          for (std::size_t j = 0; j < nc; ++j) row[j] = 0.0;
          continue;
        }
        const double r = to_f32(std::exp(m[i] - m_new));
        double block_sum = 0.0;
        for (std::size_t j = 0; j < nc; ++j) {
          const double e = to_f32(std::exp(row[j] - m_new));
          block_sum = to_f32(block_sum + e);
          // The GEMM operand is fp16; the running sum keeps the fp32 value.
          row[j] = round_to(e, fp16);
        }
        ell[i] = to_f32(to_f32(r * ell[i]) + block_sum);
        m[i] = m_new;
        rescale[i] = r;
      }
      const Matrix g = emulated_matmul(codes_of(std::move(s), fp16),
                                       codes_of(block(v16, c0, nc, 0, d), fp16),
                                       FloatFormatId::fp32);
      for (std::size_t i = 0; i < nr; ++i) {
        double* orow = o_acc.row_ptr(i);
        const double* grow = g.row_ptr(i);
        for (std::size_t j = 0; j < d; ++j)
          orow[j] = to_f32(to_f32(orow[j] * rescale[i]) + grow[j]);
      }
    }
    for (std::size_t i = 0; i < nr; ++i) {
      double* row = o_acc.row_ptr(i);
      if (ell[i] > 0.0) {
        for (std::size_t j = 0; j < d; ++j)
          out.o(r0 + i, j) = round_to(row[j] / ell[i], fp16);
        out.logsumexp[r0 + i] = m[i] + std::log(ell[i]);
      } else {
        for (std::size_t j = 0; j < d; ++j) out.o(r0 + i, j) = 0.0;
        out.logsumexp[r0 + i] = kNegInf;
      }
    }
  }
  return out;
}

}  // namespace flashlab
