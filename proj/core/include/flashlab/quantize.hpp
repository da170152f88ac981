#pragma once
// Scaled quantization onto emulated formats plus the low-precision GEMM that
// consumes the result. A QuantizedTensor stores codes (values already in the
// target format's value set, on an FP64 carrier) and one scale per tensor or
// per contiguous row block; dequantized value = code * scale.
//
// emulated_matmul reproduces tensor-core semantics at code level: products of
// codes are exact (narrow significands), the accumulator is rounded at every
// add in the accumulator format, and scales are applied once per output
// entry. Per-block scales must be constant along the contraction dimension,
// which is why a per-block right operand requires transpose_b.

#include <vector>

#include "flashlab/formats.hpp"
#include "flashlab/matrix.hpp"

namespace flashlab {

struct QuantizedTensor {
  Matrix codes;
  FloatFormatId format = FloatFormatId::fp8e4m3;
  std::vector<double> scales;  // size 1, or ceil(rows/block_rows)
  std::size_t block_rows = 0;  // 0 means per-tensor

  bool per_block() const { return block_rows != 0; }
  std::size_t num_blocks() const { return scales.size(); }
  double scale_for_row(std::size_t r) const {
    return per_block() ? scales[r / block_rows] : scales[0];
  }
};

// scale = amax/max_finite (1 if the tensor is all zero); codes are
// round_to(x/scale). Throws on non-finite input entries.
QuantizedTensor quantize_per_tensor(const Matrix& m, FloatFormatId fmt,
                                    OverflowPolicy overflow = OverflowPolicy::saturate);

// Independent scale per block of block_rows consecutive rows; the last block
// may be ragged. An outlier inflates only its own block's scale.
QuantizedTensor quantize_per_block(const Matrix& m, std::size_t block_rows,
                                   FloatFormatId fmt,
                                   OverflowPolicy overflow = OverflowPolicy::saturate);

Matrix dequantize(const QuantizedTensor& t);

// out = dequant(a) * dequant(b) (or * dequant(b)^T) with code-level
// accumulation in acc_fmt (fp32 or fp64). Per-output-entry summation order is
// k ascending, matching the scalar oracle bit-for-bit.
Matrix emulated_matmul(const QuantizedTensor& a, const QuantizedTensor& b,
                       FloatFormatId acc_fmt, bool transpose_b = false);

}  // namespace flashlab
