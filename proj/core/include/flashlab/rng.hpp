#pragma once
// Counter-based deterministic RNG. Every draw is a pure function of
// (seed, counter): word(c) = splitmix64_mix(seed + (c+1) * 0x9E3779B97F4A7C15).
// There is no hidden stream state, so any matrix entry can be regenerated in
// isolation and results are identical across platforms and run counts.
//
// Layout conventions used by the samplers are part of the contract:
//   gaussian(c)            consumes words 2c and 2c+1 (Box-Muller)
//   outlier matrix entry e consumes words 5e .. 5e+4
//                          (normal pair, Bernoulli draw, second normal pair)
//   sign vector entry i    consumes word i

#include <cstdint>

#include "flashlab/matrix.hpp"

namespace flashlab {

// Derive an independent stream seed; used to give Q/K/V/dO their own streams.
std::uint64_t substream(std::uint64_t seed, std::uint64_t salt);

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t word(std::uint64_t counter) const;

  double uniform(std::uint64_t counter) const;      // [0, 1)
  double uniform_pos(std::uint64_t counter) const;  // (0, 1], safe for log()

  // Standard normal from words {2c, 2c+1}.
  double gaussian(std::uint64_t counter) const;

 private:
  std::uint64_t seed_;
};

// rows x cols of i.i.d. N(0,1) draws; entry (i,j) uses gaussian counter i*cols+j.
Matrix sample_gaussian_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed);

// Heavy-tailed test distribution: N(0,1) + N(0,100) * Bernoulli(p).
// Entry std is sqrt(1 + 100p); about 4e-4 of entries exceed 8 in magnitude
// at the default p = 0.001.
Matrix sample_outlier_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                             double outlier_prob = 0.001);

// n entries of exactly +1 or -1, one word each.
std::vector<double> sample_sign_vector(std::size_t n, std::uint64_t seed);

}  // namespace flashlab
