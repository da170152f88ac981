#pragma once
// Tiled attention forward passes with online softmax. All three schedules
// (basic, 2-stage, 3-stage) perform the same per-element arithmetic in the
// same order and differ only in statement scheduling and live-buffer usage,
// mirroring how the warp-specialized kernels pipeline their GEMMs; their
// outputs are bit-identical in FP64. The running state per row is
// (row_max m, row_sum ell), with output accumulated unnormalized and the
// final rescale diag(1/ell) plus L = m + log(ell) applied in the epilogue.
//
// Rescale convention: the output block is multiplied by exp(m_old - m_new)
// when the running max advances; on the first real block that factor is
// exp(-inf) = 0 acting on a zero accumulator (0 * 0 = 0).

#include <cstdint>

#include "flashlab/attention_ref.hpp"
#include "flashlab/matrix.hpp"

namespace flashlab {

struct TileConfig {
  std::size_t block_rows = 64;  // B_r
  std::size_t block_cols = 64;  // B_c
};

struct SoftmaxState {
  std::vector<double> row_max;  // -inf until a row sees an unmasked column
  std::vector<double> row_sum;  // >= 0; 0 exactly while row_max is -inf

  explicit SoftmaxState(std::size_t rows);
};

struct SoftmaxStep {
  Matrix p_tilde;               // exp(S - m_new), masked entries exactly 0
  std::vector<double> rescale;  // exp(m_old - m_new), 0 on first real block
};

// One online-softmax update for a score block; mutates state in place and
// returns the block's unnormalized probabilities plus the rescale factors to
// apply to the output accumulator.
SoftmaxStep online_softmax_step(SoftmaxState& state, const Matrix& s_block);

// Structural probes: block bookkeeping and the extra pipeline state each
// schedule keeps live. Pure observation, never part of the math.
struct FlashFwdStats {
  std::size_t blocks_visited = 0;     // score blocks actually computed
  std::size_t blocks_skipped = 0;     // causally empty blocks never touched
  std::size_t max_pending_scores = 0; // computed-but-not-softmaxed S blocks
  std::size_t max_live_probs = 0;     // P-tilde blocks awaiting their GEMM
  bool deferred_output_scale = false; // 3-stage scale_o path active
  bool fell_back_to_basic = false;
};

ForwardOutput flash_fwd_basic(const AttentionInputs& in, const TileConfig& cfg,
                              FlashFwdStats* stats = nullptr);

// Pipelined mainloop: the next score block is computed before the current
// probabilities finish their value GEMM. Falls back to basic for T_c < 2.
ForwardOutput flash_fwd_2stage(const AttentionInputs& in, const TileConfig& cfg,
                               FlashFwdStats* stats = nullptr);

// Deeper pipeline with the output rescale deferred into a scale_o factor
// applied right before each accumulation. Falls back to basic for T_c < 4.
ForwardOutput flash_fwd_3stage(const AttentionInputs& in, const TileConfig& cfg,
                               FlashFwdStats* stats = nullptr);

// Model FLOP count: 4 * seqlen^2 * headdim * heads, halved for causal,
// backward charged at 2.5x the forward.
constexpr std::uint64_t flops_forward(std::uint64_t seqlen, std::uint64_t headdim,
                                      std::uint64_t heads, bool causal) {
  const std::uint64_t f = 4ull * seqlen * seqlen * headdim * heads;
  return causal ? f / 2 : f;
}
constexpr std::uint64_t flops_backward(std::uint64_t seqlen, std::uint64_t headdim,
                                       std::uint64_t heads, bool causal) {
  return flops_forward(seqlen, headdim, heads, causal) * 5 / 2;
}

}  // namespace flashlab
