// Pipeline simulation front end. Builds the shape and resource model from
// the config (plus an optional key=value model file), runs one schedule or
// the three-row ablation (full pipeline, no compute overlap, no warp
// specialization), validates every event trace, and emits a JSON report.
// --trace additionally dumps the validated event stream as CSV.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "commands.hpp"
#include "flashlab/pipeline_sim.hpp"
#include "report.hpp"

namespace flashlab::cli {

namespace {

using nlohmann::json;

json model_to_json(const ResourceModel& m) {
  return {{"tensor_flops_per_cycle", m.tensor_flops_per_cycle},
          {"mufu_exp_per_cycle", m.mufu_exp_per_cycle},
          {"load_bandwidth_bytes_per_cycle", m.load_bandwidth_bytes_per_cycle},
          {"load_latency_cycles", m.load_latency_cycles},
          {"smem_bandwidth_bytes_per_cycle", m.smem_bandwidth_bytes_per_cycle},
          {"consumer_warpgroups", m.consumer_warpgroups},
          {"buffer_stages", m.buffer_stages},
          {"register_limit", m.register_limit}};
}

json run_to_json(const std::string& label, const SimReport& r) {
  json busy = json::object(), util = json::object();
  for (const auto& [name, b] : r.busy) busy[name] = b;
  for (const auto& [name, u] : r.utilization) util[name] = u;
  return {{"row", label},
          {"schedule", kind_name(r.kind)},
          {"makespan_cycles", r.makespan},
          {"busy_cycles", busy},
          {"utilization", util},
          {"events", r.trace.size()}};
}

}  // namespace

int cmd_simulate(const ExperimentConfig& cfg) {
  cfg.validate();

  ResourceModel model;
  if (!cfg.model_file.empty()) {
    std::ifstream f(cfg.model_file);
    if (!f) throw ConfigError("cannot open resource model file " + cfg.model_file);
    std::stringstream buf;
    buf << f.rdbuf();
    try {
      model = parse_resource_model(buf.str());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("resource model file: ") + e.what());
    }
  }
  if (cfg.buffer_stages > 0) model.buffer_stages = cfg.buffer_stages;

  const bool fp8 = cfg.format == "fp8";
  const SimShape shape{cfg.seqlen, cfg.headdim, cfg.block_rows, cfg.block_cols,
                       cfg.backward};

  std::vector<std::pair<std::string, ScheduleKind>> plan;
  if (cfg.ablation) {
    plan.emplace_back("full", ScheduleKind::pingpong_2stage());
    plan.emplace_back("no-overlap", ScheduleKind::warpspec());
    plan.emplace_back("no-warpspec", ScheduleKind::overlap_only());
    for (auto& [label, kind] : plan) kind.fp8 = fp8;
  } else {
    plan.emplace_back("run", parse_schedule(cfg.schedule, fp8));
  }

  const WorkModel wm = work_model(cfg.seqlen, cfg.headdim, parse_format(cfg.format),
                                  model);
  json doc = {{"schema", "flashlab.simulate.v1"},
              {"shape",
               {{"seqlen", cfg.seqlen},
                {"headdim", cfg.headdim},
                {"block_rows", cfg.block_rows},
                {"block_cols", cfg.block_cols},
                {"backward", cfg.backward},
                {"format", cfg.format}}},
              {"model", model_to_json(model)},
              {"work_model",
               {{"matmul_flops_per_exp", wm.matmul_flops_per_exp},
                {"softmax_cycle_fraction", wm.softmax_cycle_fraction}}},
              {"runs", json::array()}};

  std::vector<SimReport> reports;
  for (const auto& [label, kind] : plan) {
    SimReport r;
    try {
      r = simulate(shape, model, kind);
    } catch (const SimDeadlock& e) {
      std::cerr << "simulate: deadlock in " << kind_name(kind) << ": " << e.what()
                << "\n";
      return kExitTolerance;
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    const auto violations = validate_trace(r);
    if (!violations.empty()) {
      std::cerr << "simulate: " << violations.size() << " trace violations, first: "
                << violations.front().what << "\n";
      return kExitTolerance;
    }
    doc["runs"].push_back(run_to_json(label, r));
    reports.push_back(std::move(r));
  }

  write_report(cfg.out, doc.dump(2) + "\n");

  if (!cfg.trace_out.empty()) {
    CsvReport trace("flashlab.trace.v1", {"time", "agent", "action", "block", "stage"});
    for (const auto& e : reports.back().trace)
      trace.add_row({format_double(e.time), e.agent, e.action, format_size(e.block),
                     format_size(e.stage)});
    write_report(cfg.trace_out, trace.text());
  }

  std::cerr << "simulate: " << reports.size() << " run(s), makespan "
            << format_double(reports.front().makespan) << " cycles\n";
  return kExitOk;
}

}  // namespace flashlab::cli
