#pragma once
// Shared experiment configuration for the command-line harness. Every
// subcommand binds a subset of these fields to flags; a key=value config
// file (CLI11 ini dialect, sections per subcommand) fills defaults and
// command-line flags override it. Exit codes are uniform across commands:
// 0 success, 1 tolerance breach or failed run, 2 configuration error.

#include <cstdint>
#include <stdexcept>
#include <string>

#include "flashlab/formats.hpp"
#include "flashlab/pipeline_sim.hpp"

namespace flashlab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitTolerance = 1;
inline constexpr int kExitConfig = 2;

// Invalid configuration; main() maps this to kExitConfig.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::size_t seqlen = 8192;
  std::size_t headdim = 128;
  std::size_t heads = 1;
  std::size_t batch = 1;
  bool causal = false;
  std::uint64_t seed = 1;
  std::size_t trials = 10;
  std::string format = "fp16";  // fp16 | fp8
  std::string quant = "per-block";
  bool incoherent = true;
  std::size_t block_rows = 64;
  std::size_t block_cols = 64;
  std::size_t fp16_tile = 128;  // rmse: tile edge for the fp16 tiled forward
  std::string schedule = "pingpong+2stage";
  std::size_t buffer_stages = 0;  // 0 keeps the resource model's value
  bool backward = false;
  bool ablation = false;     // simulate: run the three-row schedule ablation
  bool corrupt_l = false;    // gradcheck: damage the stored logsumexp
  std::string out;           // report path; empty writes to stdout
  std::string trace_out;     // simulate: optional event-trace CSV
  std::string model_file;    // simulate: resource model description

  // Common invariants; commands add their own checks on top.
  void validate() const;
};

// "fp16" or "fp8"; anything else is a ConfigError.
FloatFormatId parse_format(const std::string& name);

// Schedule name -> kind. Accepted names: serial, warpspec,
// warpspec+pingpong, pingpong+2stage, pingpong+3stage, overlap-only.
ScheduleKind parse_schedule(const std::string& name, bool fp8);

// Relative paths are joined onto $FLASHLAB_OUT_DIR when it is set; parent
// directories are created. Absolute paths pass through.
std::string resolve_output_path(const std::string& name);

}  // namespace flashlab::cli
