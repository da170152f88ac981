// flashlab: numerics and scheduling laboratory for tiled attention.
// Subcommands: check (equivalence suites), gradcheck (backward pass),
// rmse (low-precision error table), bench (FLOP accounting + timing),
// simulate (pipeline schedule model). Exit codes: 0 success, 1 tolerance
// breach or failed run, 2 configuration error.

#include <exception>
#include <functional>
#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "config.hpp"

namespace {

using flashlab::cli::ExperimentConfig;

void add_shape_options(CLI::App* cmd, ExperimentConfig& c) {
  cmd->add_option("--seqlen", c.seqlen, "sequence length N")->capture_default_str();
  cmd->add_option("--headdim", c.headdim, "head dimension d")->capture_default_str();
}

void add_tile_options(CLI::App* cmd, ExperimentConfig& c) {
  cmd->add_option("--block-rows", c.block_rows, "query tile rows B_r")
      ->capture_default_str();
  cmd->add_option("--block-cols", c.block_cols, "key/value tile columns B_c")
      ->capture_default_str();
}

void add_output_option(CLI::App* cmd, ExperimentConfig& c) {
  cmd->add_option("--out", c.out,
                  "report file; default stdout, relative paths join "
                  "$FLASHLAB_OUT_DIR");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace flashlab::cli;

  CLI::App app{"flashlab: numerics and scheduling laboratory for tiled attention"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "0.1.0");
  app.set_config("--config", "",
                 "key=value config file ([section] per subcommand); "
                 "command-line flags override");

  int rc = kExitOk;

  ExperimentConfig check_cfg;
  auto* check = app.add_subcommand(
      "check", "forward- and schedule-equivalence suites over a shape grid");
  check->fallthrough();
  check->add_option("--seed", check_cfg.seed, "base data seed")->capture_default_str();
  add_output_option(check, check_cfg);
  check->callback([&] { rc = cmd_check(check_cfg); });

  ExperimentConfig grad_cfg;
  grad_cfg.seqlen = 12;
  grad_cfg.headdim = 8;
  grad_cfg.trials = 20;
  grad_cfg.block_rows = 8;
  grad_cfg.block_cols = 4;
  auto* grad = app.add_subcommand(
      "gradcheck", "backward pass vs analytic and finite-difference gradients");
  grad->fallthrough();
  add_shape_options(grad, grad_cfg);
  add_tile_options(grad, grad_cfg);
  grad->add_option("--trials", grad_cfg.trials, "instances to check")
      ->capture_default_str();
  grad->add_option("--seed", grad_cfg.seed, "base data seed")->capture_default_str();
  grad->add_flag("--corrupt-l", grad_cfg.corrupt_l,
                 "damage the stored logsumexp; the check must then fail");
  add_output_option(grad, grad_cfg);
  grad->callback([&] { rc = cmd_gradcheck(grad_cfg); });

  ExperimentConfig rmse_cfg;
  auto* rmse = app.add_subcommand(
      "rmse", "low-precision error table on the outlier workload");
  rmse->fallthrough();
  add_shape_options(rmse, rmse_cfg);
  add_tile_options(rmse, rmse_cfg);
  rmse->add_option("--trials", rmse_cfg.trials, "independent data draws")
      ->capture_default_str();
  rmse->add_option("--seed", rmse_cfg.seed, "base data seed")->capture_default_str();
  rmse->add_option("--fp16-tile", rmse_cfg.fp16_tile,
                   "tile edge for the fp16 tiled forward")
      ->capture_default_str();
  rmse->add_flag("--causal", rmse_cfg.causal, "apply the causal mask");
  add_output_option(rmse, rmse_cfg);
  rmse->callback([&] { rc = cmd_rmse(rmse_cfg); });

  ExperimentConfig bench_cfg;
  bench_cfg.seqlen = 512;
  bench_cfg.headdim = 64;
  bench_cfg.heads = 32;
  auto* bench = app.add_subcommand(
      "bench", "model-FLOP accounting and emulation wall-clock");
  bench->fallthrough();
  add_shape_options(bench, bench_cfg);
  add_tile_options(bench, bench_cfg);
  bench->add_option("--heads", bench_cfg.heads, "attention heads")
      ->capture_default_str();
  bench->add_option("--batch", bench_cfg.batch, "batch size")->capture_default_str();
  bench->add_flag("--causal", bench_cfg.causal, "apply the causal mask");
  bench->add_flag("--backward", bench_cfg.backward, "also time the backward pass");
  bench->add_option("--seed", bench_cfg.seed, "base data seed")->capture_default_str();
  add_output_option(bench, bench_cfg);
  bench->callback([&] { rc = cmd_bench(bench_cfg); });

  ExperimentConfig sim_cfg;
  auto* sim = app.add_subcommand(
      "simulate", "discrete-event model of the kernel execution schedules");
  sim->fallthrough();
  add_shape_options(sim, sim_cfg);
  add_tile_options(sim, sim_cfg);
  sim->add_option("--schedule", sim_cfg.schedule,
                  "serial | warpspec | warpspec+pingpong | pingpong+2stage | "
                  "pingpong+3stage | overlap-only")
      ->capture_default_str();
  sim->add_option("--format", sim_cfg.format, "fp16 | fp8")->capture_default_str();
  sim->add_option("--buffer-stages", sim_cfg.buffer_stages,
                  "override the model's buffer depth (0 keeps it)");
  sim->add_flag("--backward", sim_cfg.backward, "simulate the backward schedule");
  sim->add_flag("--ablation", sim_cfg.ablation,
                "run full / no-overlap / no-warpspec rows instead of --schedule");
  sim->add_option("--model", sim_cfg.model_file,
                  "resource model file (key = value lines)");
  sim->add_option("--trace", sim_cfg.trace_out, "also write the event trace CSV");
  add_output_option(sim, sim_cfg);
  sim->callback([&] { rc = cmd_simulate(sim_cfg); });

  try {
    app.parse(argc, argv);
    return rc;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitTolerance;
  }
}
