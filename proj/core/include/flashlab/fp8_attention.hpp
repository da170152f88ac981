#pragma once
// Tiled attention forward on emulated fp8 (e4m3) operands. Q, K, V are
// quantized per tensor or per tile-aligned row block, probabilities are
// requantized per score block, and every GEMM runs on codes with an fp32
// accumulator; the scales and the score multiplier alpha fold into one
// per-entry multiply at the accumulator output, mirroring the hardware
// descale epilogue. An optional orthogonal preprocessing step (random sign
// flips followed by a normalized Walsh-Hadamard transform on each row of Q
// and K) leaves Q K^T mathematically unchanged while spreading outlier
// coordinates before quantization.
//
// The value-layout helpers model the register-layout fixup the fp8 tensor
// core path needs: the first GEMM's accumulator columns arrive in the order
// {0 1 4 5 2 3 6 7} per 8, and the in-kernel V transpose writes the matching
// row order so the probability-value product is unchanged.

#include <cstdint>
#include <utility>
#include <vector>

#include "flashlab/attention_ref.hpp"
#include "flashlab/flash_fwd.hpp"
#include "flashlab/quantize.hpp"

namespace flashlab {

enum class QuantGranularity { per_tensor, per_block };

struct Fp8AttentionConfig {
  QuantGranularity granularity = QuantGranularity::per_block;
  bool incoherent = true;
  std::uint64_t seed = 0;  // drives the random sign vector
  TileConfig tile{64, 64};
  OverflowPolicy overflow = OverflowPolicy::saturate;
  // Route the probability-value GEMM through the permuted accumulator and
  // the row-permuted V tiles; requires block_cols and N divisible by 16.
  bool permuted_value_layout = false;
};

// Same orthogonal row transform applied to Q and K. d must be a power of two.
std::pair<Matrix, Matrix> preprocess_incoherent(const Matrix& q, const Matrix& k,
                                                std::uint64_t seed);

// Forward pass per the config. Output and logsumexp are FP64 carriers of the
// fp32 accumulator states; no final rounding is applied.
ForwardOutput fp8_flash_fwd(const AttentionInputs& in, const Fp8AttentionConfig& cfg);

// Column index permutation {0 1 4 5 2 3 6 7} replicated per 8 columns; an
// involution. width must be divisible by 16.
std::vector<std::size_t> accumulator_permutation(std::size_t width);

// out(:, t) = in(:, perm[t]) within each 8-column group.
Matrix permute_accumulator(const Matrix& block);

// Transpose of a B_c x d value tile; with permute_rows the result's column t
// holds V row perm[t], matching a permuted left operand.
Matrix vtile_transpose(const Matrix& vblock, bool permute_rows = false);

}  // namespace flashlab
