#pragma once
// Exact FP64 standard attention: the ground truth every tiled or
// low-precision path is judged against. The forward materializes scores S,
// probabilities P, and the logsumexp vector; the backward follows the
// softmax-Jacobian form. reference_attention_o computes the same values in
// query row blocks without ever holding an N x N matrix, so it scales to the
// long-sequence error experiments.

#include <vector>

#include "flashlab/matrix.hpp"

namespace flashlab {

struct AttentionInputs {
  Matrix q, k, v;       // all N x d
  double alpha = 0.0;   // score scale, conventionally 1/sqrt(d)
  bool causal = false;
};

// Convenience factory that fills in alpha = 1/sqrt(d).
AttentionInputs attention_inputs(Matrix q, Matrix k, Matrix v, bool causal = false);

// Throws std::invalid_argument unless shapes agree and alpha is finite and
// nonzero.
void validate_inputs(const AttentionInputs& in);

struct ForwardOutput {
  Matrix o;                       // N x d
  std::vector<double> logsumexp;  // per row: max + log(sum exp(S - max))
};

struct StdForward {
  Matrix s;                       // masked scores, -inf where causally hidden
  Matrix p;                       // row-stochastic; masked entries exactly 0
  Matrix o;
  std::vector<double> logsumexp;
};

StdForward std_attention_fwd(const AttentionInputs& in);

struct AttentionGrads {
  Matrix dq, dk, dv;
};

// Gradients of sum(dO o O) with P taken from the forward pass.
AttentionGrads std_attention_bwd(const AttentionInputs& in, const Matrix& p,
                                 const Matrix& dO);

// Row-blocked forward producing O and logsumexp only; bitwise identical to
// std_attention_fwd, O(block_rows * N) memory.
ForwardOutput reference_attention_o(const AttentionInputs& in,
                                    std::size_t block_rows = 128);

// Grouped-query head map: query head h reads K/V head h / (heads/kv_heads).
// heads must be divisible by kv_heads.
std::vector<std::size_t> gqa_head_map(std::size_t heads, std::size_t kv_heads);

}  // namespace flashlab
