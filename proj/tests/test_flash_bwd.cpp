#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "flashlab/attention_ref.hpp"
#include "flashlab/flash_bwd.hpp"
#include "flashlab/flash_fwd.hpp"
#include "flashlab/rng.hpp"
#include "test_util.hpp"

using flashlab::AttentionGrads;
using flashlab::AttentionInputs;
using flashlab::ForwardOutput;
using flashlab::Matrix;
using flashlab::TileConfig;

namespace {

AttentionInputs random_inputs(std::size_t n, std::size_t d, std::uint64_t seed,
                              bool causal = false) {
  return flashlab::attention_inputs(
      flashlab::sample_gaussian_matrix(n, d, flashlab::substream(seed, 0)),
      flashlab::sample_gaussian_matrix(n, d, flashlab::substream(seed, 1)),
      flashlab::sample_gaussian_matrix(n, d, flashlab::substream(seed, 2)), causal);
}

double worst_grad_diff(const AttentionGrads& a, const AttentionGrads& b) {
  return std::max({flashlab::max_abs_diff(a.dq, b.dq),
                   flashlab::max_abs_diff(a.dk, b.dk),
                   flashlab::max_abs_diff(a.dv, b.dv)});
}

double weighted_loss(const AttentionInputs& in, const Matrix& w) {
  const Matrix o = flashlab::std_attention_fwd(in).o;
  double acc = 0.0;
  for (std::size_t i = 0; i < o.size(); ++i) acc += o.data()[i] * w.data()[i];
  return acc;
}

}  // namespace

TEST_SUITE("flash_bwd") {

TEST_CASE("preprocess is the rowwise dot of dO and O") {
  const Matrix dO(2, 3, {1.0, 2.0, 3.0, -1.0, 0.5, 2.0});
  const Matrix o(2, 3, {4.0, 5.0, 6.0, 2.0, 2.0, 2.0});
  const auto d = flashlab::bwd_preprocess(dO, o);
  CHECK(d.size() == 2);
  CHECK(d[0] == 32.0);  // 4 + 10 + 18
  CHECK(d[1] == 3.0);   // -2 + 1 + 4
  CHECK_THROWS_AS(flashlab::bwd_preprocess(dO, Matrix(3, 2)),
                  std::invalid_argument);
}

TEST_CASE("zero upstream gradient yields zero gradients") {
  AttentionInputs in = random_inputs(32, 8, 930, true);
  const TileConfig cfg{16, 16};
  const auto fwd = flashlab::flash_fwd_basic(in, cfg);
  const auto g = flashlab::flash_bwd(in, Matrix(32, 8), fwd, cfg);
  for (std::size_t i = 0; i < g.dq.size(); ++i) {
    CHECK(g.dq.data()[i] == 0.0);
    CHECK(g.dk.data()[i] == 0.0);
    CHECK(g.dv.data()[i] == 0.0);
  }
}

TEST_CASE("tiled gradients match the dense backward") {
  for (bool causal : {false, true}) {
    AttentionInputs in = random_inputs(64, 16, 931, causal);
    const Matrix dO = flashlab::sample_gaussian_matrix(64, 16, 932);
    const auto ref_fwd = flashlab::std_attention_fwd(in);
    const auto ref = flashlab::std_attention_bwd(in, ref_fwd.p, dO);
    for (TileConfig cfg : {TileConfig{32, 32}, TileConfig{16, 24}}) {
      const auto fwd = flashlab::flash_fwd_basic(in, cfg);
      const auto g = flashlab::flash_bwd(in, dO, fwd, cfg);
      CHECK(worst_grad_diff(g, ref) <= 1e-11);
    }
  }
}

TEST_CASE("tiled gradients agree with central finite differences") {
  const double h = 1e-5;
  AttentionInputs in = random_inputs(12, 4, 933, true);
  const Matrix w = flashlab::sample_gaussian_matrix(12, 4, 934);
  const TileConfig cfg{4, 8};
  const auto fwd = flashlab::flash_fwd_basic(in, cfg);
  const auto g = flashlab::flash_bwd(in, w, fwd, cfg);

  auto fd_check = [&](Matrix AttentionInputs::* field, const Matrix& analytic) {
    for (std::size_t i = 0; i < 12; ++i)
      for (std::size_t j = 0; j < 4; ++j) {
        AttentionInputs up = in, dn = in;
        (up.*field)(i, j) += h;
        (dn.*field)(i, j) -= h;
        const double fd = (weighted_loss(up, w) - weighted_loss(dn, w)) / (2 * h);
        CHECK(std::fabs(fd - analytic(i, j)) < 1e-6);
      }
  };
  fd_check(&AttentionInputs::q, g.dq);
  fd_check(&AttentionInputs::k, g.dk);
  fd_check(&AttentionInputs::v, g.dv);
}

TEST_CASE("a corrupted logsumexp poisons the gradients quietly") {
  AttentionInputs in = random_inputs(32, 8, 935);
  const Matrix dO = flashlab::sample_gaussian_matrix(32, 8, 936);
  const TileConfig cfg{16, 16};
  const auto fwd = flashlab::flash_fwd_basic(in, cfg);
  const auto good = flashlab::flash_bwd(in, dO, fwd, cfg);
  ForwardOutput bad = fwd;
  bad.logsumexp[0] += 0.05;
  const auto g = flashlab::flash_bwd(in, dO, bad, cfg);
  // No exception, every entry finite, but row 0's probabilities are off by
  // exp(-0.05), which shows up as a visible gradient error.
  for (std::size_t i = 0; i < g.dq.size(); ++i)
    CHECK(std::isfinite(g.dq.data()[i]));
  CHECK(worst_grad_diff(g, good) > 1e-4);
}

TEST_CASE("repeated runs are bit-identical") {
  AttentionInputs in = random_inputs(48, 8, 937, true);
  const Matrix dO = flashlab::sample_gaussian_matrix(48, 8, 938);
  const TileConfig cfg{16, 16};
  const auto fwd = flashlab::flash_fwd_basic(in, cfg);
  const auto a = flashlab::flash_bwd(in, dO, fwd, cfg);
  const auto b = flashlab::flash_bwd(in, dO, fwd, cfg);
  CHECK(testutil::bit_equal(a.dq, b.dq));
  CHECK(testutil::bit_equal(a.dk, b.dk));
  CHECK(testutil::bit_equal(a.dv, b.dv));
}

TEST_CASE("shape mismatches are rejected") {
  AttentionInputs in = random_inputs(8, 4, 939);
  const TileConfig cfg{4, 4};
  const auto fwd = flashlab::flash_fwd_basic(in, cfg);
  CHECK_THROWS_AS(flashlab::flash_bwd(in, Matrix(7, 4), fwd, cfg),
                  std::invalid_argument);
  ForwardOutput trimmed = fwd;
  trimmed.logsumexp.pop_back();
  CHECK_THROWS_AS(flashlab::flash_bwd(in, Matrix(8, 4), trimmed, cfg),
                  std::invalid_argument);
}

}  // TEST_SUITE
