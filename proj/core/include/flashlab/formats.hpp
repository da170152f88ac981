#pragma once
// Software emulation of narrow floating-point value sets on an FP64 carrier.
// A format is (exponent bits, mantissa bits, max finite); round_to snaps a
// double to the nearest representable value with round-to-nearest-even,
// keeps subnormals exact, and saturates past max finite by default.
//
// fp8e4m3 follows the OCP/FN convention: bias 7, top mantissa pattern of the
// top binade reserved for NaN, so max finite is 448 and there are 253
// distinct finite values (126 positive, 126 negative, and zero counted once).

#include <string_view>

namespace flashlab {

enum class FloatFormatId { fp64, fp32, fp16, bf16, fp8e4m3 };

enum class OverflowPolicy { saturate, infinite };

struct FloatFormat {
  FloatFormatId id;
  std::string_view name;
  int exponent_bits;
  int mantissa_bits;
  double max_finite;

  int bias() const { return (1 << (exponent_bits - 1)) - 1; }
  int min_normal_exponent() const { return 1 - bias(); }
  // Smallest positive subnormal: 2^(min_normal_exponent - mantissa_bits).
  double min_subnormal() const;
};

const FloatFormat& float_format(FloatFormatId id);
const FloatFormat& float_format(std::string_view name);  // throws on unknown name

// Nearest representable value in the format. NaN propagates; values beyond
// max finite saturate (or overflow to +-inf under OverflowPolicy::infinite).
double round_to(double x, const FloatFormat& fmt,
                OverflowPolicy overflow = OverflowPolicy::saturate);
double round_to(double x, FloatFormatId id,
                OverflowPolicy overflow = OverflowPolicy::saturate);

}  // namespace flashlab
