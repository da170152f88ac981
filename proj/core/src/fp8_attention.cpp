#include "flashlab/fp8_attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "flashlab/hadamard.hpp"

namespace flashlab {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double to_f32(double x) { return static_cast<double>(static_cast<float>(x)); }

// Row slice of a quantized tensor with the scale stripped (set to one); the
// kernel applies scales itself so alpha can fold into the same multiply.
QuantizedTensor unit_slice(const QuantizedTensor& t, std::size_t r0, std::size_t nr) {
  return {block(t.codes, r0, nr, 0, t.codes.cols()), t.format, {1.0}, 0};
}

QuantizedTensor quantize(const Matrix& m, std::size_t block_rows,
                         const Fp8AttentionConfig& cfg) {
  if (cfg.granularity == QuantGranularity::per_block)
    return quantize_per_block(m, block_rows, FloatFormatId::fp8e4m3, cfg.overflow);
  return quantize_per_tensor(m, FloatFormatId::fp8e4m3, cfg.overflow);
}

}  // namespace

std::pair<Matrix, Matrix> preprocess_incoherent(const Matrix& q, const Matrix& k,
                                                std::uint64_t seed) {
  if (q.cols() != k.cols())
    throw std::invalid_argument("preprocess_incoherent: column mismatch");
  const DHTransform t = random_dh_transform(q.cols(), seed);
  Matrix qo = q, ko = k;
  t.apply_rows(qo);
  t.apply_rows(ko);
  return {std::move(qo), std::move(ko)};
}

std::vector<std::size_t> accumulator_permutation(std::size_t width) {
  if (width == 0 || width % 16 != 0)
    throw std::invalid_argument(
        "accumulator_permutation: width must be a positive multiple of 16");
  static constexpr std::size_t kPattern[8] = {0, 1, 4, 5, 2, 3, 6, 7};
  std::vector<std::size_t> perm(width);
  for (std::size_t base = 0; base < width; base += 8)
    for (std::size_t t = 0; t < 8; ++t) perm[base + t] = base + kPattern[t];
  return perm;
}

Matrix permute_accumulator(const Matrix& m) {
  const auto perm = accumulator_permutation(m.cols());
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* src = m.row_ptr(i);
    double* dst = out.row_ptr(i);
    for (std::size_t t = 0; t < m.cols(); ++t) dst[t] = src[perm[t]];
  }
  return out;
}

Matrix vtile_transpose(const Matrix& vblock, bool permute_rows) {
  if (!permute_rows) return transpose(vblock);
  const auto perm = accumulator_permutation(vblock.rows());
  Matrix out(vblock.cols(), vblock.rows());
  for (std::size_t c = 0; c < vblock.cols(); ++c) {
    double* dst = out.row_ptr(c);
    for (std::size_t t = 0; t < vblock.rows(); ++t) dst[t] = vblock(perm[t], c);
  }
  return out;
}

ForwardOutput fp8_flash_fwd(const AttentionInputs& in, const Fp8AttentionConfig& cfg) {
  validate_inputs(in);
  if (cfg.tile.block_rows == 0 || cfg.tile.block_cols == 0)
    throw std::invalid_argument("fp8_flash_fwd: tile sizes must be positive");
  const std::size_t n = in.q.rows();
  const std::size_t d = in.q.cols();
  if (cfg.permuted_value_layout &&
      (cfg.tile.block_cols % 16 != 0 || n % 16 != 0))
    throw std::invalid_argument(
        "fp8_flash_fwd: permuted layout needs block_cols and N divisible by 16");

  Matrix q = in.q, k = in.k;
  if (cfg.incoherent) {
    auto pre = preprocess_incoherent(q, k, cfg.seed);  // throws unless d is a power of two
    q = std::move(pre.first);
    k = std::move(pre.second);
  }
  const QuantizedTensor qq = quantize(q, cfg.tile.block_rows, cfg);
  const QuantizedTensor qk = quantize(k, cfg.tile.block_cols, cfg);
  const QuantizedTensor qv = quantize(in.v, cfg.tile.block_cols, cfg);

  ForwardOutput out{Matrix(n, d), std::vector<double>(n, 0.0)};
  for (std::size_t r0 = 0; r0 < n; r0 += cfg.tile.block_rows) {
    const std::size_t nr = std::min(cfg.tile.block_rows, n - r0);
    const double sq = qq.scale_for_row(r0);
    const QuantizedTensor qrows = unit_slice(qq, r0, nr);
    SoftmaxState st(nr);
    Matrix o_acc(nr, d);
    for (std::size_t c0 = 0; c0 < n; c0 += cfg.tile.block_cols) {
      const std::size_t nc = std::min(cfg.tile.block_cols, n - c0);
      if (in.causal && c0 > r0 + nr - 1) continue;
      const double sk = qk.scale_for_row(c0);
      const double sv = qv.scale_for_row(c0);

      // Score block on codes; alpha and both scales land in one multiply on
      // the fp32 accumulator output.
      Matrix s = emulated_matmul(qrows, unit_slice(qk, c0, nc),
                                 FloatFormatId::fp32, true);
      const double descale = in.alpha * sq * sk;
      for (std::size_t i = 0; i < nr; ++i) {
        double* row = s.row_ptr(i);
        for (std::size_t j = 0; j < nc; ++j) row[j] = to_f32(row[j] * descale);
        if (in.causal) {
          const std::size_t qpos = r0 + i;
          for (std::size_t j = 0; j < nc; ++j)
            if (c0 + j > qpos) row[j] = kNegInf;
        }
      }

      SoftmaxStep step = online_softmax_step(st, s);
      QuantizedTensor qp;
      if (cfg.granularity == QuantGranularity::per_block) {
        // One fresh scale per score block; amax <= 1, so never saturating.
        qp = quantize_per_tensor(step.p_tilde, FloatFormatId::fp8e4m3, cfg.overflow);
      } else {
        // Per-tensor scaling covers the probabilities too. Their tensor-wide
        // amax is exactly 1 (each row's max exponential is exp(0)), so the
        // scale is a constant and needs no extra pass.
        const double max_finite = float_format(FloatFormatId::fp8e4m3).max_finite;
        qp.codes = Matrix(nr, nc);
        for (std::size_t i = 0; i < step.p_tilde.size(); ++i)
          qp.codes.data()[i] = round_to(step.p_tilde.data()[i] * max_finite,
                                        FloatFormatId::fp8e4m3, cfg.overflow);
        qp.format = FloatFormatId::fp8e4m3;
        qp.scales = {1.0 / max_finite};
        qp.block_rows = 0;
      }
      Matrix g;
      if (cfg.permuted_value_layout) {
        const QuantizedTensor pperm{permute_accumulator(qp.codes),
                                    FloatFormatId::fp8e4m3, {1.0}, 0};
        const QuantizedTensor wt{
            vtile_transpose(block(qv.codes, c0, nc, 0, d), true),
            FloatFormatId::fp8e4m3,
            {1.0},
            0};
        g = emulated_matmul(pperm, wt, FloatFormatId::fp32, true);
      } else {
        g = emulated_matmul(QuantizedTensor{qp.codes, qp.format, {1.0}, 0},
                            unit_slice(qv, c0, nc), FloatFormatId::fp32, false);
      }
      const double gscale = qp.scales[0] * sv;
      for (std::size_t i = 0; i < nr; ++i) {
        const double r = step.rescale[i];
        double* orow = o_acc.row_ptr(i);
        const double* grow = g.row_ptr(i);
        for (std::size_t j = 0; j < d; ++j)
          orow[j] = to_f32(to_f32(orow[j] * r) + to_f32(grow[j] * gscale));
      }
    }
    for (std::size_t i = 0; i < nr; ++i) {
      const double ell = st.row_sum[i];
      double* row = o_acc.row_ptr(i);
      if (ell > 0.0) {
        const double inv = 1.0 / ell;
        for (std::size_t j = 0; j < d; ++j) out.o(r0 + i, j) = row[j] * inv;
        out.logsumexp[r0 + i] = st.row_max[i] + std::log(ell);
      } else {
        for (std::size_t j = 0; j < d; ++j) out.o(r0 + i, j) = 0.0;
        out.logsumexp[r0 + i] = kNegInf;
      }
    }
  }
  return out;
}

}  // namespace flashlab
