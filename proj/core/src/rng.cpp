#include "flashlab/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace flashlab {

namespace {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t substream(std::uint64_t seed, std::uint64_t salt) {
  return mix64(seed ^ mix64(salt + kGamma));
}

std::uint64_t CounterRng::word(std::uint64_t counter) const {
  return mix64(seed_ + (counter + 1) * kGamma);
}

double CounterRng::uniform(std::uint64_t counter) const {
  return static_cast<double>(word(counter) >> 11) * 0x1.0p-53;
}

double CounterRng::uniform_pos(std::uint64_t counter) const {
  return static_cast<double>((word(counter) >> 11) + 1) * 0x1.0p-53;
}

double CounterRng::gaussian(std::uint64_t counter) const {
  const double u1 = uniform_pos(2 * counter);
  const double u2 = uniform(2 * counter + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Matrix sample_gaussian_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  CounterRng rng(seed);
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.gaussian(i);
  return m;
}

Matrix sample_outlier_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                             double outlier_prob) {
  if (outlier_prob < 0.0 || outlier_prob > 1.0)
    throw std::invalid_argument("sample_outlier_matrix: probability out of range");
  CounterRng rng(seed);
  Matrix m(rows, cols);
  for (std::size_t e = 0; e < m.size(); ++e) {
    const std::uint64_t base = 5 * e;
    const double u1 = rng.uniform_pos(base);
    const double u2 = rng.uniform(base + 1);
    const double z0 = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    double v = z0;
    if (rng.uniform(base + 2) < outlier_prob) {
      const double u3 = rng.uniform_pos(base + 3);
      const double u4 = rng.uniform(base + 4);
      const double z1 = std::sqrt(-2.0 * std::log(u3)) * std::cos(2.0 * std::numbers::pi * u4);
      v += 10.0 * z1;
    }
    m.data()[e] = v;
  }
  return m;
}

std::vector<double> sample_sign_vector(std::size_t n, std::uint64_t seed) {
  CounterRng rng(seed);
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = (rng.word(i) & 1ull) ? 1.0 : -1.0;
  return s;
}

}  // namespace flashlab
