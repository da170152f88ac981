#pragma once
// Discrete-event simulator for attention tile schedules on an abstract GPU
// streaming multiprocessor. Agents are one producer warpgroup (async block
// loads into an s-stage circular buffer) and a set of consumer warpgroups
// (score GEMM, softmax, output GEMM per key/value block). Shared resources:
// the tensor core, the special-function unit (exp), the load engine, and a
// serialized gradient-accumulation port in backward mode.
//
// Time is in cycles. Default rates approximate an H100 SXM5 at 1830 MHz,
// divided evenly over 132 SMs: 989e12 FLOP/s -> 4096 FLOP/cycle/SM of fp16
// matmul, 3.9e12 exp/s -> 16 exp/cycle/SM, 12 TB/s L2 bandwidth -> 49.68
// bytes/cycle/SM, 128 bytes/cycle of shared-memory bandwidth.
//
// Schedule variants:
//   serial             - one warpgroup, synchronous loads, no overlap at all.
//   warp-specialized   - producer prefetches; consumers run without barriers,
//                        so concurrent GEMMs and exps timeshare their units.
//   + pingpong         - cross-warpgroup barriers give each consumer the
//                        tensor core in alternating exclusive phases.
//   + 2/3-stage        - a consumer may run the score GEMM of a later
//                        iteration while the current softmax is in flight
//                        (one extra score buffer per stage).
//   overlap-only       - the 2-stage software pipeline inside a single
//                        monolithic warpgroup with synchronous loads; the
//                        ablation point for overlap without specialization.
// The fp8 flag doubles the tensor-core rate, halves element bytes, and adds
// a producer-side value-transpose after each load.

#include <cstddef>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "flashlab/formats.hpp"

namespace flashlab {

struct ResourceModel {
  double tensor_flops_per_cycle = 4096.0;
  double mufu_exp_per_cycle = 16.0;
  double load_bandwidth_bytes_per_cycle = 49.68;
  double load_latency_cycles = 600.0;
  double smem_bandwidth_bytes_per_cycle = 128.0;
  std::size_t consumer_warpgroups = 2;
  std::size_t buffer_stages = 2;
  // Per-thread register ceiling used by the tile feasibility check.
  double register_limit = 255.0;

  void validate() const;
};

// key = value lines, '#' comments, unknown keys rejected. The inverse
// serializes every field so a round trip is exact.
ResourceModel parse_resource_model(const std::string& text);
std::string resource_model_text(const ResourceModel& model);

struct ScheduleKind {
  bool warp_specialized = true;
  bool pingpong = true;
  int overlap_stages = 2;  // 1 = no compute overlap
  bool fp8 = false;

  static ScheduleKind serial() { return {false, false, 1, false}; }
  static ScheduleKind warpspec() { return {true, false, 1, false}; }
  static ScheduleKind warpspec_pingpong() { return {true, true, 1, false}; }
  static ScheduleKind pingpong_2stage() { return {true, true, 2, false}; }
  static ScheduleKind pingpong_3stage() { return {true, true, 3, false}; }
  static ScheduleKind overlap_only() { return {false, false, 2, false}; }

  void validate() const;  // pingpong needs warp specialization
};

std::string kind_name(const ScheduleKind& kind);

struct SimShape {
  std::size_t n = 8192;
  std::size_t d = 128;
  std::size_t block_rows = 64;
  std::size_t block_cols = 64;
  bool backward = false;

  std::size_t t_rows() const { return (n + block_rows - 1) / block_rows; }
  std::size_t t_cols() const { return (n + block_cols - 1) / block_cols; }
  void validate() const;
};

struct SimEvent {
  double time = 0.0;
  std::string agent;
  std::string action;
  std::size_t block = 0;  // global key/value block id: round * t_cols + j
  std::size_t stage = 0;  // circular-buffer slot, block % stages
};

struct SimReport {
  double makespan = 0.0;
  std::map<std::string, double> busy;         // occupied time per resource
  std::map<std::string, double> utilization;  // busy / makespan
  std::vector<SimEvent> trace;
  ScheduleKind kind;
  SimShape shape;
  std::size_t buffer_stages = 0;
  std::size_t consumers = 0;
};

struct WorkModel {
  double matmul_flops_per_exp = 0.0;
  // Special-function time as a share of tensor-core time for one score
  // entry: tensor_rate / (mufu_rate * 4d). 0.5 at d=128 in fp16 defaults;
  // doubling the tensor rate (fp8) doubles it.
  double softmax_cycle_fraction = 0.0;
};

WorkModel work_model(std::size_t seqlen, std::size_t headdim, FloatFormatId format,
                     const ResourceModel& model = ResourceModel{});

// Raised when the event loop stalls with work outstanding; the message names
// the blocking dependency edge.
struct SimDeadlock : std::runtime_error {
  explicit SimDeadlock(const std::string& what) : std::runtime_error(what) {}
};

SimReport simulate(const SimShape& shape, const ResourceModel& model,
                   const ScheduleKind& kind);

struct TraceViolation {
  std::string what;
  std::size_t event_index = 0;
};

std::vector<TraceViolation> validate_trace(const SimReport& report);

// First cycle found in a dependency graph (adjacency[i] = nodes i waits on),
// as a node sequence v0 -> v1 -> ... -> v0; empty when acyclic. Used by the
// deadlock reporter.
std::vector<std::size_t> wait_graph_cycle(
    const std::vector<std::vector<std::size_t>>& adjacency);

}  // namespace flashlab
