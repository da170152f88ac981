#include "flashlab/formats.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace flashlab {

namespace {

constexpr double kFp16Max = 65504.0;                  // (2 - 2^-10) * 2^15
constexpr double kBf16Max = 0x1.FEp127;               // (2 - 2^-7) * 2^127
constexpr double kFp32Max = 0x1.FFFFFEp127;           // (2 - 2^-23) * 2^127
constexpr double kFp64Max = 0x1.FFFFFFFFFFFFFp1023;

constexpr std::array<FloatFormat, 5> kFormats{{
    {FloatFormatId::fp64, "fp64", 11, 52, kFp64Max},
    {FloatFormatId::fp32, "fp32", 8, 23, kFp32Max},
    {FloatFormatId::fp16, "fp16", 5, 10, kFp16Max},
    {FloatFormatId::bf16, "bf16", 8, 7, kBf16Max},
    // e4m3: S.1111.111 is NaN, S.1111.110 = 448 is the top finite value.
    {FloatFormatId::fp8e4m3, "fp8e4m3", 4, 3, 448.0},
}};

}  // namespace

double FloatFormat::min_subnormal() const {
  return std::ldexp(1.0, min_normal_exponent() - mantissa_bits);
}

const FloatFormat& float_format(FloatFormatId id) {
  for (const auto& f : kFormats)
    if (f.id == id) return f;
  throw std::invalid_argument("float_format: unknown id");
}

const FloatFormat& float_format(std::string_view name) {
  for (const auto& f : kFormats)
    if (f.name == name) return f;
  throw std::invalid_argument("float_format: unknown name '" + std::string(name) + "'");
}

double round_to(double x, const FloatFormat& fmt, OverflowPolicy overflow) {
  if (fmt.id == FloatFormatId::fp64 || std::isnan(x) || x == 0.0) return x;
  if (std::isinf(x)) return x;

  const double ax = std::fabs(x);
  int e = std::ilogb(ax);
  if (e < fmt.min_normal_exponent()) e = fmt.min_normal_exponent();
  // Quantum of the binade (or of the subnormal range); nearbyint rounds
  // ties-to-even under the default FP environment.
  const double q = std::ldexp(1.0, e - fmt.mantissa_bits);
  double r = std::nearbyint(ax / q) * q;
  if (r > fmt.max_finite) {
    r = (overflow == OverflowPolicy::saturate) ? fmt.max_finite
                                               : std::numeric_limits<double>::infinity();
  }
  return std::copysign(r, x);
}

double round_to(double x, FloatFormatId id, OverflowPolicy overflow) {
  return round_to(x, float_format(id), overflow);
}

}  // namespace flashlab
