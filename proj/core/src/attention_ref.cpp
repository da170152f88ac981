#include "flashlab/attention_ref.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace flashlab {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

AttentionInputs attention_inputs(Matrix q, Matrix k, Matrix v, bool causal) {
  const double alpha = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  return AttentionInputs{std::move(q), std::move(k), std::move(v), alpha, causal};
}

void validate_inputs(const AttentionInputs& in) {
  if (in.q.rows() == 0 || in.q.cols() == 0)
    throw std::invalid_argument("attention: empty inputs");
  if (in.q.cols() != in.k.cols() || in.k.cols() != in.v.cols())
    throw std::invalid_argument("attention: head dimension mismatch");
  if (in.q.rows() != in.k.rows() || in.k.rows() != in.v.rows())
    throw std::invalid_argument("attention: sequence length mismatch");
  if (!std::isfinite(in.alpha) || in.alpha == 0.0)
    throw std::invalid_argument("attention: alpha must be finite and nonzero");
}

namespace {

// Shared softmax-and-accumulate over a row slice [r0, r0+nrows) given the
// alpha-scaled masked score slice; writes O rows and logsumexp entries.
void softmax_rows(const Matrix& s, std::size_t r0, const Matrix& v, Matrix& p_out,
                  Matrix& o_out, std::vector<double>& lse_out) {
  const std::size_t n = s.cols();
  for (std::size_t i = 0; i < s.rows(); ++i) {
    const double* srow = s.row_ptr(i);
    double m = kNegInf;
    for (std::size_t j = 0; j < n; ++j)
      if (srow[j] > m) m = srow[j];
    double* prow = p_out.row_ptr(i);
    if (m == kNegInf) {
      // Fully masked row (nonstandard masks only): P row 0, O row 0, L = -inf.
      for (std::size_t j = 0; j < n; ++j) prow[j] = 0.0;
      lse_out[r0 + i] = kNegInf;
      continue;
    }
    double ell = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double e = std::exp(srow[j] - m);  // exp(-inf - m) == 0 for masked
      prow[j] = e;
      ell += e;
    }
    const double inv = 1.0 / ell;
    for (std::size_t j = 0; j < n; ++j) prow[j] *= inv;
    lse_out[r0 + i] = m + std::log(ell);
  }
  Matrix o_block = matmul(p_out, v);
  for (std::size_t i = 0; i < o_block.rows(); ++i)
    for (std::size_t j = 0; j < o_block.cols(); ++j) o_out(r0 + i, j) = o_block(i, j);
}

Matrix scaled_masked_scores(const AttentionInputs& in, std::size_t r0, std::size_t nrows) {
  Matrix s = matmul(block(in.q, r0, nrows, 0, in.q.cols()), in.k, true);
  for (std::size_t i = 0; i < nrows; ++i) {
    double* row = s.row_ptr(i);
    for (std::size_t j = 0; j < s.cols(); ++j) row[j] *= in.alpha;
    if (in.causal)
      for (std::size_t j = r0 + i + 1; j < s.cols(); ++j) row[j] = kNegInf;
  }
  return s;
}

}  // namespace

StdForward std_attention_fwd(const AttentionInputs& in) {
  validate_inputs(in);
  const std::size_t n = in.q.rows();
  StdForward out;
  out.s = scaled_masked_scores(in, 0, n);
  out.p = Matrix(n, n);
  out.o = Matrix(n, in.v.cols());
  out.logsumexp.assign(n, 0.0);
  // softmax_rows writes P into a scratch with local row indexing; reuse out.p.
  softmax_rows(out.s, 0, in.v, out.p, out.o, out.logsumexp);
  return out;
}

AttentionGrads std_attention_bwd(const AttentionInputs& in, const Matrix& p,
                                 const Matrix& dO) {
  validate_inputs(in);
  const std::size_t n = in.q.rows();
  if (p.rows() != n || p.cols() != n)
    throw std::invalid_argument("std_attention_bwd: P must be N x N");
  if (!dO.same_shape(in.q))
    throw std::invalid_argument("std_attention_bwd: dO shape mismatch");

  AttentionGrads g;
  g.dv = matmul(transpose(p), dO);
  Matrix dp = matmul(dO, in.v, true);
  Matrix ds(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < n; ++j) dot += p(i, j) * dp(i, j);
    for (std::size_t j = 0; j < n; ++j) ds(i, j) = p(i, j) * (dp(i, j) - dot);
  }
  g.dq = matmul(ds, in.k);
  g.dk = matmul(transpose(ds), in.q);
  for (std::size_t i = 0; i < g.dq.size(); ++i) g.dq.data()[i] *= in.alpha;
  for (std::size_t i = 0; i < g.dk.size(); ++i) g.dk.data()[i] *= in.alpha;
  return g;
}

ForwardOutput reference_attention_o(const AttentionInputs& in, std::size_t block_rows) {
  validate_inputs(in);
  if (block_rows == 0) throw std::invalid_argument("reference_attention_o: block_rows == 0");
  const std::size_t n = in.q.rows();
  ForwardOutput out{Matrix(n, in.v.cols()), std::vector<double>(n, 0.0)};
  for (std::size_t r0 = 0; r0 < n; r0 += block_rows) {
    const std::size_t nrows = std::min(block_rows, n - r0);
    Matrix s = scaled_masked_scores(in, r0, nrows);
    Matrix p(nrows, n);
    softmax_rows(s, r0, in.v, p, out.o, out.logsumexp);
  }
  return out;
}

std::vector<std::size_t> gqa_head_map(std::size_t heads, std::size_t kv_heads) {
  if (heads == 0 || kv_heads == 0 || heads % kv_heads != 0)
    throw std::invalid_argument("gqa_head_map: heads must be a multiple of kv_heads");
  const std::size_t group = heads / kv_heads;
  std::vector<std::size_t> map(heads);
  for (std::size_t h = 0; h < heads; ++h) map[h] = h / group;
  return map;
}

}  // namespace flashlab
