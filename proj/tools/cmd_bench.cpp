// Model-FLOP accounting plus wall-clock timing of the software kernels.
// The FLOPs column is the closed-form count (4 N^2 d per head, halved for
// causal, backward charged at 2.5x) and is exact and deterministic; the
// seconds and throughput columns time this scalar emulation and are labeled
// emulation_gflops because they say nothing about any hardware kernel.

#include <chrono>
#include <iostream>
#include <vector>

#include "commands.hpp"
#include "flashlab/attention_ref.hpp"
#include "flashlab/flash_bwd.hpp"
#include "flashlab/flash_fwd.hpp"
#include "flashlab/rng.hpp"
#include "report.hpp"

namespace flashlab::cli {

int cmd_bench(const ExperimentConfig& cfg) {
  cfg.validate();

  CsvReport csv("flashlab.bench.v1",
                {"pass", "seqlen", "headdim", "heads", "batch", "causal", "flops",
                 "wall_seconds", "emulation_gflops"});
  const TileConfig tile{cfg.block_rows, cfg.block_cols};

  using clock = std::chrono::steady_clock;
  const std::size_t units = cfg.batch * cfg.heads;

  std::vector<AttentionInputs> inputs;
  inputs.reserve(units);
  for (std::size_t u = 0; u < units; ++u) {
    const std::uint64_t base = cfg.seed + u;
    inputs.push_back(attention_inputs(
        sample_gaussian_matrix(cfg.seqlen, cfg.headdim, substream(base, 1)),
        sample_gaussian_matrix(cfg.seqlen, cfg.headdim, substream(base, 2)),
        sample_gaussian_matrix(cfg.seqlen, cfg.headdim, substream(base, 3)),
        cfg.causal));
  }

  std::vector<ForwardOutput> fwds;
  fwds.reserve(units);
  const auto t0 = clock::now();
  for (const auto& in : inputs) fwds.push_back(flash_fwd_2stage(in, tile));
  const double fwd_seconds = std::chrono::duration<double>(clock::now() - t0).count();

  const std::uint64_t fwd_flops =
      flops_forward(cfg.seqlen, cfg.headdim, cfg.heads, cfg.causal) * cfg.batch;
  auto emit = [&](const char* pass, std::uint64_t flops, double seconds) {
    csv.add_row({pass, format_size(cfg.seqlen), format_size(cfg.headdim),
                 format_size(cfg.heads), format_size(cfg.batch),
                 cfg.causal ? "1" : "0", std::to_string(flops),
                 format_double(seconds),
                 format_double(seconds > 0.0 ? flops / seconds / 1e9 : 0.0)});
  };
  emit("forward", fwd_flops, fwd_seconds);

  if (cfg.backward) {
    std::vector<Matrix> douts;
    douts.reserve(units);
    for (std::size_t u = 0; u < units; ++u)
      douts.push_back(sample_gaussian_matrix(cfg.seqlen, cfg.headdim,
                                             substream(cfg.seed + u, 4)));
    const auto t1 = clock::now();
    for (std::size_t u = 0; u < units; ++u)
      flash_bwd(inputs[u], douts[u], fwds[u], tile);
    const double bwd_seconds =
        std::chrono::duration<double>(clock::now() - t1).count();
    emit("backward",
         flops_backward(cfg.seqlen, cfg.headdim, cfg.heads, cfg.causal) * cfg.batch,
         bwd_seconds);
  }

  write_report(cfg.out, csv.text());
  std::cerr << "bench: forward " << fwd_seconds << "s over " << units
            << " head-instances\n";
  return kExitOk;
}

}  // namespace flashlab::cli
