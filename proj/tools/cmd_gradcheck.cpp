// Gradient checks for the tiled backward pass. Each trial draws a small
// problem, compares the tiled gradients against the standard softmax-
// Jacobian backward to 1e-11, and against central finite differences of the
// scalar loss sum(dO o O) to 1e-6 with step 1e-5. Trials alternate the
// causal mask. --corrupt-l damages the stored logsumexp first, which must
// make the check fail: the backward trusts its forward statistics.

#include <cmath>
#include <iostream>
#include <vector>

#include "commands.hpp"
#include "flashlab/attention_ref.hpp"
#include "flashlab/flash_bwd.hpp"
#include "flashlab/rng.hpp"
#include "report.hpp"

namespace flashlab::cli {

namespace {

constexpr double kTolAnalytic = 1e-11;
constexpr double kTolFd = 1e-6;
constexpr double kFdStep = 1e-5;

double weighted_output(const AttentionInputs& in, const Matrix& dO) {
  const StdForward f = std_attention_fwd(in);
  double s = 0.0;
  for (std::size_t i = 0; i < f.o.size(); ++i) s += dO.data()[i] * f.o.data()[i];
  return s;
}

double max_grad_diff(const AttentionGrads& a, const AttentionGrads& b) {
  return std::max({max_abs_diff(a.dq, b.dq), max_abs_diff(a.dk, b.dk),
                   max_abs_diff(a.dv, b.dv)});
}

// Central differences on every coordinate of q, k, and v.
double max_fd_diff(const AttentionInputs& in, const Matrix& dO,
                   const AttentionGrads& got) {
  double worst = 0.0;
  const Matrix* analytic[3] = {&got.dq, &got.dk, &got.dv};
  for (int which = 0; which < 3; ++which) {
    AttentionInputs probe = in;
    Matrix& m = which == 0 ? probe.q : which == 1 ? probe.k : probe.v;
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double saved = m.data()[i];
      m.data()[i] = saved + kFdStep;
      const double up = weighted_output(probe, dO);
      m.data()[i] = saved - kFdStep;
      const double down = weighted_output(probe, dO);
      m.data()[i] = saved;
      const double fd = (up - down) / (2.0 * kFdStep);
      worst = std::max(worst, std::fabs(fd - analytic[which]->data()[i]));
    }
  }
  return worst;
}

}  // namespace

int cmd_gradcheck(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.seqlen > 64)
    throw ConfigError("gradcheck runs finite differences over every "
                      "coordinate; seqlen is capped at 64");

  CsvReport csv("flashlab.gradcheck.v1",
                {"trial", "n", "d", "causal", "max_err_analytic", "max_err_fd",
                 "status"});
  const TileConfig tile{cfg.block_rows, cfg.block_cols};
  std::size_t failures = 0;

  for (std::size_t t = 0; t < cfg.trials; ++t) {
    const bool causal = t % 2 == 1;
    const std::uint64_t base = cfg.seed + t;
    AttentionInputs in = attention_inputs(
        sample_gaussian_matrix(cfg.seqlen, cfg.headdim, substream(base, 1)),
        sample_gaussian_matrix(cfg.seqlen, cfg.headdim, substream(base, 2)),
        sample_gaussian_matrix(cfg.seqlen, cfg.headdim, substream(base, 3)),
        causal);
    const Matrix dO =
        sample_gaussian_matrix(cfg.seqlen, cfg.headdim, substream(base, 4));

    ForwardOutput fwd = flash_fwd_basic(in, tile);
    if (cfg.corrupt_l)
      for (double& l : fwd.logsumexp) l += 0.5;
    const AttentionGrads got = flash_bwd(in, dO, fwd, tile);

    const StdForward ref = std_attention_fwd(in);
    const AttentionGrads want = std_attention_bwd(in, ref.p, dO);

    const double err_analytic = max_grad_diff(got, want);
    const double err_fd = max_fd_diff(in, dO, got);
    const bool ok = err_analytic <= kTolAnalytic && err_fd <= kTolFd;
    failures += !ok;
    csv.add_row({format_size(t), format_size(cfg.seqlen), format_size(cfg.headdim),
                 causal ? "1" : "0", format_double(err_analytic),
                 format_double(err_fd), ok ? "pass" : "fail"});
  }

  write_report(cfg.out, csv.text());
  std::cerr << "gradcheck: " << cfg.trials - failures << "/" << cfg.trials
            << " trials within tolerance\n";
  return failures == 0 ? kExitOk : kExitTolerance;
}

}  // namespace flashlab::cli
