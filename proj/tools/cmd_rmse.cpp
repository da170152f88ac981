// Numerical-error table on the heavy-tailed workload: per trial, Q/K/V are
// drawn from the outlier distribution, a row-blocked FP64 forward serves as
// ground truth, and six variants are scored by output RMSE: fp16 baseline,
// fp16 tiled, fp8 baseline, the full fp8 pipeline, and the fp8 pipeline
// with block scaling or orthogonal preprocessing ablated. Per-trial rows
// are followed by one median row per variant.

#include <algorithm>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "commands.hpp"
#include "flashlab/attention_ref.hpp"
#include "flashlab/fp8_attention.hpp"
#include "flashlab/lowprec.hpp"
#include "flashlab/rng.hpp"
#include "report.hpp"

namespace flashlab::cli {

namespace {

double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

}  // namespace

int cmd_rmse(const ExperimentConfig& cfg) {
  cfg.validate();

  const char* variants[] = {"fp16-baseline", "fp16-flash",       "fp8-baseline",
                            "fp8-full",      "fp8-no-block",     "fp8-no-incoherent"};
  std::map<std::string, std::vector<double>> series;

  CsvReport csv("flashlab.rmse.v1", {"trial", "variant", "rmse"});

  for (std::size_t t = 0; t < cfg.trials; ++t) {
    const std::uint64_t base = cfg.seed + t;
    AttentionInputs in = attention_inputs(
        sample_outlier_matrix(cfg.seqlen, cfg.headdim, substream(base, 1)),
        sample_outlier_matrix(cfg.seqlen, cfg.headdim, substream(base, 2)),
        sample_outlier_matrix(cfg.seqlen, cfg.headdim, substream(base, 3)),
        cfg.causal);
    const ForwardOutput ref = reference_attention_o(in);

    Fp8AttentionConfig full;
    full.tile = {cfg.block_rows, cfg.block_cols};
    full.seed = substream(base, 9);
    Fp8AttentionConfig no_block = full;
    no_block.granularity = QuantGranularity::per_tensor;
    Fp8AttentionConfig no_incoherent = full;
    no_incoherent.incoherent = false;

    const ForwardOutput outs[] = {
        baseline_lowprec_attention(in, FloatFormatId::fp16),
        fp16_flash_fwd(in, {cfg.fp16_tile, cfg.fp16_tile}),
        baseline_lowprec_attention(in, FloatFormatId::fp8e4m3),
        fp8_flash_fwd(in, full),
        fp8_flash_fwd(in, no_block),
        fp8_flash_fwd(in, no_incoherent),
    };
    for (std::size_t v = 0; v < 6; ++v) {
      const double e = rmse(outs[v].o, ref.o);
      series[variants[v]].push_back(e);
      csv.add_row({format_size(t), variants[v], format_double(e)});
    }
  }

  for (const char* v : variants)
    csv.add_row({"median", v, format_double(median(series[v]))});

  write_report(cfg.out, csv.text());
  std::cerr << "rmse: " << cfg.trials << " trials, medians"
            << " fp16 " << format_double(median(series["fp16-baseline"])) << "/"
            << format_double(median(series["fp16-flash"])) << ", fp8 "
            << format_double(median(series["fp8-baseline"])) << "/"
            << format_double(median(series["fp8-full"])) << "\n";
  return kExitOk;
}

}  // namespace flashlab::cli
