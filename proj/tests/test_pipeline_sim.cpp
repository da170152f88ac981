#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "flashlab/formats.hpp"
#include "flashlab/pipeline_sim.hpp"
#include "test_util.hpp"

using flashlab::ResourceModel;
using flashlab::ScheduleKind;
using flashlab::SimEvent;
using flashlab::SimReport;
using flashlab::SimShape;

namespace {

bool same_trace(const SimReport& a, const SimReport& b) {
  if (a.trace.size() != b.trace.size()) return false;
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    const SimEvent& x = a.trace[i];
    const SimEvent& y = b.trace[i];
    if (x.time != y.time || x.agent != y.agent || x.action != y.action ||
        x.block != y.block || x.stage != y.stage)
      return false;
  }
  return true;
}

std::size_t count_action(const SimReport& r, const std::string& action) {
  std::size_t n = 0;
  for (const auto& e : r.trace) n += e.action == action;
  return n;
}

}  // namespace

TEST_SUITE("pipeline_sim") {

TEST_CASE("throughput arithmetic at default rates") {
  const auto fp16 = flashlab::work_model(8192, 128, flashlab::FloatFormatId::fp16);
  CHECK(fp16.matmul_flops_per_exp == 512.0);
  CHECK(fp16.softmax_cycle_fraction == doctest::Approx(0.5).epsilon(1e-12));
  const auto fp8 = flashlab::work_model(8192, 128, flashlab::FloatFormatId::fp8e4m3);
  CHECK(fp8.matmul_flops_per_exp == 512.0);
  CHECK(fp8.softmax_cycle_fraction == doctest::Approx(1.0).epsilon(1e-12));
  const auto narrow = flashlab::work_model(512, 64, flashlab::FloatFormatId::fp16);
  CHECK(narrow.matmul_flops_per_exp == 256.0);
  CHECK(narrow.softmax_cycle_fraction == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(flashlab::work_model(0, 128, flashlab::FloatFormatId::fp16),
                  std::invalid_argument);
  CHECK_THROWS_AS(flashlab::work_model(512, 128, flashlab::FloatFormatId::fp64),
                  std::invalid_argument);
}

TEST_CASE("serial schedule is the sum of every op time") {
  SimShape shape{64, 64, 32, 32, false};
  ResourceModel model;
  const auto r = flashlab::simulate(shape, model, ScheduleKind::serial());
  const double g = 2.0 * 32 * 32 * 64 / model.tensor_flops_per_cycle;
  const double sm = 32.0 * 32 / model.mufu_exp_per_cycle;
  const double load =
      2.0 * 32 * 64 * 2 / model.load_bandwidth_bytes_per_cycle + model.load_latency_cycles;
  const double expect = 4.0 * (load + g + sm + g);
  CHECK(r.makespan == doctest::Approx(expect).epsilon(1e-12));
  CHECK(flashlab::validate_trace(r).empty());
}

TEST_CASE("schedule refinements strictly shorten the default preset") {
  SimShape shape{1024, 128, 64, 64, false};
  ResourceModel model;
  const double full =
      flashlab::simulate(shape, model, ScheduleKind::pingpong_2stage()).makespan;
  const double warpspec_only =
      flashlab::simulate(shape, model, ScheduleKind::warpspec()).makespan;
  const double overlap_only =
      flashlab::simulate(shape, model, ScheduleKind::overlap_only()).makespan;
  const double serial =
      flashlab::simulate(shape, model, ScheduleKind::serial()).makespan;
  CHECK(full < warpspec_only);
  CHECK(full < overlap_only);
  CHECK(warpspec_only < serial);
  CHECK(overlap_only < serial);
}

TEST_CASE("makespan is monotone in the buffer depth") {
  SimShape shape{1024, 128, 64, 64, false};
  std::vector<double> spans;
  for (std::size_t s = 1; s <= 4; ++s) {
    ResourceModel model;
    model.buffer_stages = s;
    spans.push_back(flashlab::simulate(shape, model, ScheduleKind::pingpong_2stage()).makespan);
  }
  CHECK(spans[0] > spans[1]);  // single buffering exposes the load each step
  for (std::size_t i = 1; i + 1 < spans.size(); ++i)
    CHECK(spans[i] >= spans[i + 1] - 1e-9);
}

TEST_CASE("compute overlap never lengthens a schedule") {
  ResourceModel model;
  for (SimShape shape : {SimShape{512, 128, 64, 64, false},
                         SimShape{512, 64, 32, 64, false},
                         SimShape{300, 128, 64, 32, false}}) {
    ScheduleKind base = ScheduleKind::warpspec_pingpong();
    const double plain = flashlab::simulate(shape, model, base).makespan;
    base.overlap_stages = 2;
    CHECK(flashlab::simulate(shape, model, base).makespan <= plain + 1e-9);
    base.overlap_stages = 3;
    CHECK(flashlab::simulate(shape, model, base).makespan <= plain + 1e-9);
    CHECK(flashlab::simulate(shape, model, ScheduleKind::overlap_only()).makespan <=
          flashlab::simulate(shape, model, ScheduleKind::serial()).makespan + 1e-9);
  }
}

TEST_CASE("pingpong overlap lifts tensor-core utilization") {
  // Holds whenever the exp time is at least a quarter of the matmul time.
  ResourceModel model;
  for (std::size_t d : {32u, 64u, 128u, 256u}) {
    SimShape shape{512, d, 64, 64, false};
    const auto wm = flashlab::work_model(shape.n, d, flashlab::FloatFormatId::fp16, model);
    REQUIRE(wm.softmax_cycle_fraction >= 0.25);
    const auto full = flashlab::simulate(shape, model, ScheduleKind::pingpong_2stage());
    const auto plain = flashlab::simulate(shape, model, ScheduleKind::warpspec());
    CHECK(full.utilization.at("tensor") > plain.utilization.at("tensor"));
  }
}

TEST_CASE("with free loads the pipeline is tensor-bound") {
  SimShape shape{2048, 128, 64, 64, false};
  ResourceModel model;
  model.load_bandwidth_bytes_per_cycle = 1e12;
  model.load_latency_cycles = 0.0;
  const auto r = flashlab::simulate(shape, model, ScheduleKind::pingpong_2stage());
  const double gemm = 2.0 * 64 * 64 * 128 / model.tensor_flops_per_cycle;
  const double pure_gemm_time = double(shape.t_rows()) * double(shape.t_cols()) * 2.0 * gemm;
  CHECK(r.makespan >= pure_gemm_time - 1e-6);
  CHECK(r.makespan <= 1.05 * pure_gemm_time);
  CHECK(r.utilization.at("tensor") > 0.95);
}

TEST_CASE("simulation is deterministic") {
  SimShape shape{512, 64, 64, 64, false};
  ResourceModel model;
  for (auto kind : {ScheduleKind::pingpong_2stage(), ScheduleKind::warpspec(),
                    ScheduleKind::overlap_only()}) {
    const auto a = flashlab::simulate(shape, model, kind);
    const auto b = flashlab::simulate(shape, model, kind);
    CHECK(a.makespan == b.makespan);
    CHECK(same_trace(a, b));
  }
}

TEST_CASE("every schedule kind yields a violation-free trace") {
  ResourceModel model;
  const ScheduleKind kinds[] = {
      ScheduleKind::serial(),          ScheduleKind::warpspec(),
      ScheduleKind::warpspec_pingpong(), ScheduleKind::pingpong_2stage(),
      ScheduleKind::pingpong_3stage(), ScheduleKind::overlap_only()};
  for (const auto& base : kinds) {
    for (bool fp8 : {false, true}) {
      for (std::size_t s : {1u, 2u, 3u}) {
        for (SimShape shape : {SimShape{256, 64, 64, 64, false},
                               SimShape{100, 32, 32, 16, false},
                               SimShape{256, 64, 64, 64, true}}) {
          ScheduleKind kind = base;
          kind.fp8 = fp8;
          ResourceModel m = model;
          m.buffer_stages = s;
          const auto r = flashlab::simulate(shape, m, kind);
          CHECK(r.makespan > 0.0);
          const auto violations = flashlab::validate_trace(r);
          CHECK(violations.empty());
          if (!violations.empty())
            MESSAGE(flashlab::kind_name(kind), " s=", s, ": ", violations[0].what);
        }
      }
    }
  }
}

TEST_CASE("fp8 halves the tensor time and transposes value tiles") {
  SimShape shape{512, 128, 64, 64, false};
  ResourceModel model;
  ScheduleKind fp16 = ScheduleKind::pingpong_2stage();
  ScheduleKind fp8 = fp16;
  fp8.fp8 = true;
  const auto a = flashlab::simulate(shape, model, fp16);
  const auto b = flashlab::simulate(shape, model, fp8);
  CHECK(b.makespan < a.makespan);
  CHECK(count_action(a, "vtranspose_start") == 0);
  CHECK(count_action(b, "vtranspose_start") == shape.t_cols() * shape.t_rows() / 2);
  CHECK(b.busy.count("smem") == 1);
  CHECK(flashlab::validate_trace(b).empty());
}

TEST_CASE("backward adds serialized gradient accumulation") {
  SimShape fwd{512, 64, 64, 64, false};
  SimShape bwd = fwd;
  bwd.backward = true;
  ResourceModel model;
  const auto f = flashlab::simulate(fwd, model, ScheduleKind::pingpong_2stage());
  const auto b = flashlab::simulate(bwd, model, ScheduleKind::pingpong_2stage());
  CHECK(b.makespan > f.makespan);
  CHECK(count_action(b, "dq_accum_start") == bwd.t_rows() * bwd.t_cols());
  CHECK(b.busy.at("dq") > 0.0);
  CHECK(flashlab::validate_trace(b).empty());
}

TEST_CASE("register ceiling rejects oversized tiles") {
  ResourceModel model;
  SimShape shape{1024, 128, 256, 256, false};
  CHECK_THROWS_AS(flashlab::simulate(shape, model, ScheduleKind::pingpong_3stage()),
                  std::invalid_argument);
  model.register_limit = 4000.0;
  CHECK_NOTHROW(flashlab::simulate(shape, model, ScheduleKind::pingpong_3stage()));
}

TEST_CASE("schedule kind and shape validation") {
  ScheduleKind bad{false, true, 1, false};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  ScheduleKind worse{true, true, 4, false};
  CHECK_THROWS_AS(worse.validate(), std::invalid_argument);
  const SimShape degenerate{0, 64, 16, 16, false};
  CHECK_THROWS_AS(degenerate.validate(), std::invalid_argument);
  CHECK(flashlab::kind_name(ScheduleKind::pingpong_2stage()) ==
        "warp-specialized+pingpong+2stage");
  CHECK(flashlab::kind_name(ScheduleKind::serial()) == "serial");
  CHECK(flashlab::kind_name(ScheduleKind::overlap_only()) == "overlap-only");
}

TEST_CASE("resource model text round-trips and rejects junk") {
  ResourceModel m;
  m.tensor_flops_per_cycle = 1234.5;
  m.consumer_warpgroups = 3;
  const auto back = flashlab::parse_resource_model(flashlab::resource_model_text(m));
  CHECK(back.tensor_flops_per_cycle == m.tensor_flops_per_cycle);
  CHECK(back.consumer_warpgroups == m.consumer_warpgroups);
  CHECK(back.buffer_stages == m.buffer_stages);

  CHECK_NOTHROW(flashlab::parse_resource_model("# just a comment\n\n"));
  CHECK_THROWS_AS(flashlab::parse_resource_model("unknown_key = 5\n"),
                  std::invalid_argument);
  CHECK_THROWS_AS(flashlab::parse_resource_model("buffer_stages = frog\n"),
                  std::invalid_argument);
  CHECK_THROWS_AS(flashlab::parse_resource_model("buffer_stages = 0\n"),
                  std::invalid_argument);
  CHECK_THROWS_AS(flashlab::parse_resource_model("tensor_flops_per_cycle\n"),
                  std::invalid_argument);
}

TEST_CASE("wait-graph cycle detection") {
  CHECK(flashlab::wait_graph_cycle({{1}, {2}, {}}).empty());
  const auto cycle = flashlab::wait_graph_cycle({{1}, {2}, {0}});
  REQUIRE(cycle.size() == 3);
  CHECK(flashlab::wait_graph_cycle({{0}}).size() == 1);
  CHECK(flashlab::wait_graph_cycle({}).empty());
}

TEST_CASE("validator flags hand-built violations") {
  SimReport r;
  r.kind = ScheduleKind::warpspec();
  r.consumers = 1;
  r.buffer_stages = 2;
  r.trace = {
      {0.0, "producer", "load_issue", 0, 0},
      {5.0, "wg0", "gemm_qk_start", 0, 0},  // consumes before the commit
      {10.0, "producer", "load_commit", 0, 0},
      {12.0, "wg0", "gemm_qk_end", 0, 0},
      {13.0, "wg0", "gemm_pv_start", 0, 0},
      {14.0, "wg0", "gemm_pv_end", 0, 0},
      {14.0, "wg0", "release", 0, 0},
  };
  const auto v = flashlab::validate_trace(r);
  REQUIRE(v.size() == 1);
  CHECK(v[0].what.find("stage 0") != std::string::npos);
  CHECK(v[0].what.find("before its commit") != std::string::npos);

  SimReport reuse = r;
  reuse.trace = {
      {0.0, "producer", "load_issue", 0, 0},
      {1.0, "producer", "load_commit", 0, 0},
      {2.0, "producer", "load_issue", 1, 0},  // stage 0 never released
      {3.0, "producer", "load_commit", 1, 0},
  };
  const auto v2 = flashlab::validate_trace(reuse);
  REQUIRE(!v2.empty());
  CHECK(v2[0].what.find("refilled") != std::string::npos);

  SimReport unsorted = r;
  unsorted.trace = {
      {5.0, "producer", "load_issue", 0, 0},
      {1.0, "producer", "load_commit", 0, 0},
  };
  CHECK(!flashlab::validate_trace(unsorted).empty());

  SimReport early_release = r;
  early_release.trace = {
      {0.0, "producer", "load_issue", 0, 0},
      {1.0, "producer", "load_commit", 0, 0},
      {2.0, "wg0", "release", 0, 0},  // released without any use
  };
  CHECK(!flashlab::validate_trace(early_release).empty());
}

}  // TEST_SUITE
