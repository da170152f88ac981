#pragma once
// Low-precision reference implementations used as error baselines: standard
// (non-tiled) attention with fp16 or fp8 operands, and the fp16 tiled forward
// that keeps its softmax in fp32. Both stream over query row blocks so an
// N x N probability matrix is never held in FP64.
//
// Rounding policies:
//   fp16 baseline  - Q, K, V, S, exp outputs, normalized P, and O in fp16;
//                    GEMM accumulators and row reductions in fp32.
//   fp8 baseline   - Q, K, V and P quantized per tensor to e4m3 with
//                    amax/448 scales; S stays fp32 (it is the accumulator
//                    output); softmax intermediates in fp16; O in fp16.
//   fp16 tiled     - Q, K, V in fp16, scores and the online softmax in fp32,
//                    probabilities rounded to fp16 as the second GEMM's
//                    operand, O accumulated in fp32 and written in fp16.

#include "flashlab/attention_ref.hpp"
#include "flashlab/flash_fwd.hpp"
#include "flashlab/formats.hpp"

namespace flashlab {

// fmt selects the policy: fp16 or fp8e4m3. overflow applies to the e4m3
// quantizers only.
ForwardOutput baseline_lowprec_attention(const AttentionInputs& in, FloatFormatId fmt,
                                         std::size_t block_rows = 128,
                                         OverflowPolicy overflow = OverflowPolicy::saturate);

ForwardOutput fp16_flash_fwd(const AttentionInputs& in, const TileConfig& cfg);

}  // namespace flashlab
