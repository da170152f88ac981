#include "flashlab/pipeline_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace flashlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Completion slack for timeshared ops whose remaining work is eroded in
// floating point.
constexpr double kEps = 1e-6;

enum class Res : int { load, xpose, tensor, mufu, dq, count };
constexpr int kResCount = static_cast<int>(Res::count);

const char* res_name(Res r) {
  switch (r) {
    case Res::load: return "load";
    case Res::xpose: return "smem";
    case Res::tensor: return "tensor";
    case Res::mufu: return "mufu";
    case Res::dq: return "dq";
    default: return "?";
  }
}

enum class OpType : int {
  load = 0,
  transpose = 1,
  gemm_qk = 2,
  softmax = 3,
  gemm_pv = 4,
  dq_accum = 5,
};

struct Op {
  OpType type = OpType::load;
  Res res = Res::load;
  double duration = 0.0;
  double post_delay = 0.0;  // dependents see completion this much later
  std::size_t agent = 0;    // consumer index; producer = npos
  std::size_t block = 0;
  std::size_t stage = 0;
  bool emits_commit = false;
  std::vector<std::size_t> deps;

  // Runtime state.
  std::size_t unmet = 0;
  double ready_time = 0.0;
  double remaining = 0.0;
  double start_time = -1.0;
  double end_time = -1.0;
  bool running = false;
  bool done = false;
};

constexpr std::size_t kProducer = static_cast<std::size_t>(-1);

struct Durations {
  double gemm_qk, softmax, gemm_pv, transfer, latency, vtranspose, dq;
};

Durations op_durations(const SimShape& shape, const ResourceModel& model,
                       const ScheduleKind& kind) {
  const double br = static_cast<double>(shape.block_rows);
  const double bc = static_cast<double>(shape.block_cols);
  const double d = static_cast<double>(shape.d);
  const double tensor_rate =
      model.tensor_flops_per_cycle * (kind.fp8 ? 2.0 : 1.0);
  const double elt_bytes = kind.fp8 ? 1.0 : 2.0;
  Durations t{};
  const double gemm = 2.0 * br * bc * d / tensor_rate;
  // Backward recomputes the score GEMM and adds one gradient GEMM per
  // operand: 5x the forward tensor work per block pair.
  t.gemm_qk = shape.backward ? 2.0 * gemm : gemm;
  t.gemm_pv = shape.backward ? 3.0 * gemm : gemm;
  t.softmax = br * bc / model.mufu_exp_per_cycle;
  t.transfer = 2.0 * bc * d * elt_bytes / model.load_bandwidth_bytes_per_cycle;
  t.latency = model.load_latency_cycles;
  t.vtranspose = bc * d * elt_bytes / model.smem_bandwidth_bytes_per_cycle;
  // Gradient accumulation streams a full fp32 query-block tile through the
  // serialized port.
  t.dq = br * d * 4.0 / model.load_bandwidth_bytes_per_cycle;
  return t;
}

void check_registers(const SimShape& shape, const ResourceModel& model,
                     const ScheduleKind& kind) {
  // Per-thread live values across a 128-thread warpgroup: the output
  // accumulator plus one score tile per overlap stage.
  const double per_thread =
      static_cast<double>(shape.block_rows) *
      (static_cast<double>(shape.d) +
       static_cast<double>(kind.overlap_stages) *
           static_cast<double>(shape.block_cols)) /
      128.0;
  if (per_thread > model.register_limit) {
    std::ostringstream msg;
    msg << "simulate: tile " << shape.block_rows << "x" << shape.block_cols
        << " with " << kind.overlap_stages
        << " overlap stages needs " << per_thread
        << " registers per thread (limit " << model.register_limit << ")";
    throw std::invalid_argument(msg.str());
  }
}

// ---------------------------------------------------------------------------
// Static op-graph construction

struct Graph {
  std::vector<Op> ops;
  std::vector<std::vector<std::size_t>> dependents;
  std::size_t consumers = 0;
  std::size_t total_blocks = 0;

  std::size_t add(Op op) {
    ops.push_back(std::move(op));
    return ops.size() - 1;
  }
  void finalize() {
    dependents.resize(ops.size());
    for (std::size_t i = 0; i < ops.size(); ++i) {
      ops[i].unmet = ops[i].deps.size();
      ops[i].remaining = ops[i].duration;
      for (std::size_t dep : ops[i].deps) dependents[dep].push_back(i);
    }
  }
};

Graph build_graph(const SimShape& shape, const ResourceModel& model,
                  const ScheduleKind& kind) {
  Graph g;
  const Durations dur = op_durations(shape, model, kind);
  const std::size_t s = model.buffer_stages;
  const std::size_t t_c = shape.t_cols();
  const std::size_t t_r = shape.t_rows();
  const std::size_t w = kind.warp_specialized ? model.consumer_warpgroups : 1;
  const std::size_t rounds = (t_r + w - 1) / w;
  const std::size_t blocks = rounds * t_c;
  const std::size_t ov = static_cast<std::size_t>(kind.overlap_stages);
  g.consumers = w;
  g.total_blocks = blocks;

  auto active_in_round = [&](std::size_t c, std::size_t r) {
    return c + r * w < t_r;
  };

  // Per-block op ids, filled as we go.
  const std::size_t npos = static_cast<std::size_t>(-1);
  std::vector<std::size_t> load_id(blocks, npos), commit_id(blocks, npos);
  std::vector<std::vector<std::size_t>> qk_id(w), sm_id(w), pv_id(w), dq_id(w);
  for (std::size_t c = 0; c < w; ++c) {
    qk_id[c].assign(blocks, npos);
    sm_id[c].assign(blocks, npos);
    pv_id[c].assign(blocks, npos);
    dq_id[c].assign(blocks, npos);
  }

  const bool sync_loads = !kind.warp_specialized;

  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t r = b / t_c;
    const std::size_t stage = b % s;

    // Load of block b. Commit is delayed by the memory latency; in fp8 the
    // producer transposes the value tile before consumers may start.
    Op ld;
    ld.type = OpType::load;
    ld.res = Res::load;
    ld.duration = dur.transfer;
    ld.post_delay = dur.latency;
    ld.agent = sync_loads ? 0 : kProducer;
    ld.block = b;
    ld.stage = stage;
    if (b >= s) {
      // Circular-buffer slot free only after every user released it.
      const std::size_t prev_r = (b - s) / t_c;
      for (std::size_t c = 0; c < w; ++c)
        if (active_in_round(c, prev_r)) ld.deps.push_back(pv_id[c][b - s]);
    }
    if (sync_loads && b > 0) {
      // The lone warpgroup performs its own loads: fully after the previous
      // iteration when serial, in the shadow of the async output GEMM when
      // pipelined.
      ld.deps.push_back(ov > 1 ? sm_id[0][b - 1] : pv_id[0][b - 1]);
    }
    load_id[b] = g.add(ld);
    commit_id[b] = load_id[b];

    if (kind.fp8) {
      Op tr;
      tr.type = OpType::transpose;
      tr.res = Res::xpose;
      tr.duration = dur.vtranspose;
      tr.agent = ld.agent;
      tr.block = b;
      tr.stage = stage;
      tr.deps.push_back(load_id[b]);
      commit_id[b] = g.add(tr);
    }
    g.ops[commit_id[b]].emits_commit = true;

    for (std::size_t c = 0; c < w; ++c) {
      if (!active_in_round(c, r)) continue;

      Op qk;
      qk.type = OpType::gemm_qk;
      qk.res = Res::tensor;
      qk.duration = dur.gemm_qk;
      qk.agent = c;
      qk.block = b;
      qk.stage = stage;
      qk.deps.push_back(commit_id[b]);
      if (b >= ov) qk.deps.push_back(pv_id[c][b - ov]);
      if (kind.pingpong) {
        // Barrier: this warpgroup's score GEMM phase starts only after the
        // previous warpgroup's phase for the same block (wrapping to the
        // last warpgroup of the previous block).
        std::size_t prev = npos;
        for (std::size_t pc = c; pc-- > 0;)
          if (qk_id[pc][b] != npos) { prev = qk_id[pc][b]; break; }
        if (prev == npos && b > 0)
          for (std::size_t pc = w; pc-- > 0;)
            if (qk_id[pc][b - 1] != npos) { prev = qk_id[pc][b - 1]; break; }
        if (prev != npos) qk.deps.push_back(prev);
      }
      qk_id[c][b] = g.add(qk);

      Op sm;
      sm.type = OpType::softmax;
      sm.res = Res::mufu;
      sm.duration = dur.softmax;
      sm.agent = c;
      sm.block = b;
      sm.stage = stage;
      sm.deps.push_back(qk_id[c][b]);
      if (b > 0 && sm_id[c][b - 1] != npos) sm.deps.push_back(sm_id[c][b - 1]);
      sm_id[c][b] = g.add(sm);

      Op pv;
      pv.type = OpType::gemm_pv;
      pv.res = Res::tensor;
      pv.duration = dur.gemm_pv;
      pv.agent = c;
      pv.block = b;
      pv.stage = stage;
      pv.deps.push_back(sm_id[c][b]);
      if (b > 0 && pv_id[c][b - 1] != npos) pv.deps.push_back(pv_id[c][b - 1]);
      if (kind.pingpong) {
        std::size_t prev = npos;
        for (std::size_t pc = c; pc-- > 0;)
          if (pv_id[pc][b] != npos) { prev = pv_id[pc][b]; break; }
        if (prev == npos && b > 0)
          for (std::size_t pc = w; pc-- > 0;)
            if (pv_id[pc][b - 1] != npos) { prev = pv_id[pc][b - 1]; break; }
        if (prev != npos) pv.deps.push_back(prev);
      }
      pv_id[c][b] = g.add(pv);

      if (shape.backward) {
        Op dq;
        dq.type = OpType::dq_accum;
        dq.res = Res::dq;
        dq.duration = dur.dq;
        dq.agent = c;
        dq.block = b;
        dq.stage = stage;
        dq.deps.push_back(pv_id[c][b]);
        if (b > 0 && dq_id[c][b - 1] != npos) dq.deps.push_back(dq_id[c][b - 1]);
        dq_id[c][b] = g.add(dq);
      }
    }
  }
  g.finalize();
  return g;
}

// ---------------------------------------------------------------------------
// Event loop

std::string agent_name(std::size_t agent) {
  if (agent == kProducer) return "producer";
  return "wg" + std::to_string(agent);
}

const char* start_action(OpType t) {
  switch (t) {
    case OpType::load: return "load_issue";
    case OpType::transpose: return "vtranspose_start";
    case OpType::gemm_qk: return "gemm_qk_start";
    case OpType::softmax: return "softmax_start";
    case OpType::gemm_pv: return "gemm_pv_start";
    case OpType::dq_accum: return "dq_accum_start";
  }
  return "?";
}

const char* end_action(OpType t) {
  switch (t) {
    case OpType::transpose: return "vtranspose_end";
    case OpType::gemm_qk: return "gemm_qk_end";
    case OpType::softmax: return "softmax_end";
    case OpType::gemm_pv: return "gemm_pv_end";
    case OpType::dq_accum: return "dq_accum_end";
    default: return "";
  }
}

struct Engine {
  Graph& g;
  const ScheduleKind& kind;
  bool timeshare;  // tensor/mufu are shared without pingpong barriers

  std::vector<SimEvent> trace;
  double now = 0.0;
  double busy[kResCount] = {};
  double busy_open[kResCount] = {};  // start of current occupied interval
  int active_count[kResCount] = {};

  // Ready-but-not-running ops per resource, ordered by static priority.
  using Key = std::tuple<std::size_t, int, std::size_t, std::size_t>;
  std::set<std::pair<Key, std::size_t>> ready[kResCount];
  std::vector<std::size_t> running[kResCount];

  Engine(Graph& graph, const ScheduleKind& k, bool share)
      : g(graph), kind(k), timeshare(share) {}

  static Key key_of(const Op& op) {
    return {op.block, static_cast<int>(op.type), op.agent, 0};
  }

  bool shared(Res r) const {
    return timeshare && (r == Res::tensor || r == Res::mufu);
  }

  void emit(double t, const Op& op, const char* action) {
    if (!*action) return;
    trace.push_back({t, agent_name(op.agent), action, op.block, op.stage});
  }

  void occupy(Res r) {
    const int i = static_cast<int>(r);
    if (active_count[i]++ == 0) busy_open[i] = now;
  }
  void vacate(Res r) {
    const int i = static_cast<int>(r);
    if (--active_count[i] == 0) busy[i] += now - busy_open[i];
  }

  void start(std::size_t id) {
    Op& op = g.ops[id];
    op.running = true;
    op.start_time = now;
    occupy(op.res);
    emit(now, op, start_action(op.type));
    const int ri = static_cast<int>(op.res);
    running[ri].push_back(id);
  }

  void complete(std::size_t id, std::vector<std::size_t>& newly_ready) {
    Op& op = g.ops[id];
    op.running = false;
    op.done = true;
    op.end_time = now;
    vacate(op.res);
    const int ri = static_cast<int>(op.res);
    auto& run = running[ri];
    run.erase(std::find(run.begin(), run.end(), id));
    emit(now, op, end_action(op.type));
    if (op.emits_commit)
      trace.push_back(
          {now + op.post_delay, agent_name(op.agent), "load_commit", op.block, op.stage});
    if (op.type == OpType::gemm_pv)
      trace.push_back({now, agent_name(op.agent), "release", op.block, op.stage});
    for (std::size_t dep : g.dependents[id]) {
      Op& next = g.ops[dep];
      next.ready_time = std::max(next.ready_time, now + op.post_delay);
      if (--next.unmet == 0) newly_ready.push_back(dep);
    }
  }

  SimReport run() {
    std::size_t remaining_ops = g.ops.size();
    std::vector<std::size_t> newly_ready;
    for (std::size_t i = 0; i < g.ops.size(); ++i)
      if (g.ops[i].unmet == 0) newly_ready.push_back(i);

    while (remaining_ops > 0) {
      // Admit ops whose dependencies are met.
      for (std::size_t id : newly_ready) {
        const Op& op = g.ops[id];
        ready[static_cast<int>(op.res)].insert({key_of(op), id});
      }
      newly_ready.clear();

      // Grant resources at the current time.
      for (int ri = 0; ri < kResCount; ++ri) {
        const Res r = static_cast<Res>(ri);
        if (shared(r)) {
          for (auto it = ready[ri].begin(); it != ready[ri].end();) {
            if (g.ops[it->second].ready_time <= now + kEps) {
              start(it->second);
              it = ready[ri].erase(it);
            } else {
              ++it;
            }
          }
        } else if (running[ri].empty() && !ready[ri].empty()) {
          // Exclusive: lowest (block, phase, agent) among arrived ops.
          auto pick = ready[ri].end();
          for (auto it = ready[ri].begin(); it != ready[ri].end(); ++it)
            if (g.ops[it->second].ready_time <= now + kEps) { pick = it; break; }
          if (pick != ready[ri].end()) {
            start(pick->second);
            ready[ri].erase(pick);
          }
        }
      }

      // Next event: a completion or a future arrival.
      double tnext = kInf;
      for (int ri = 0; ri < kResCount; ++ri) {
        const Res r = static_cast<Res>(ri);
        const double k = shared(r) ? static_cast<double>(running[ri].size()) : 1.0;
        for (std::size_t id : running[ri])
          tnext = std::min(tnext, now + g.ops[id].remaining * k);
        // Past-dated arrivals are waiting on a grant, not on time; counting
        // them here would pin tnext to now and stall the clock.
        for (const auto& entry : ready[ri]) {
          const double rt = g.ops[entry.second].ready_time;
          if (rt > now + kEps) tnext = std::min(tnext, rt);
        }
      }
      if (tnext == kInf) report_deadlock();
      const double dt = std::max(0.0, tnext - now);

      // Advance running work and collect completions.
      std::vector<std::size_t> finished;
      for (int ri = 0; ri < kResCount; ++ri) {
        const Res r = static_cast<Res>(ri);
        const double k = shared(r) ? static_cast<double>(running[ri].size()) : 1.0;
        for (std::size_t id : running[ri]) {
          g.ops[id].remaining -= dt / k;
          if (g.ops[id].remaining <= kEps) finished.push_back(id);
        }
      }
      now = tnext;
      std::sort(finished.begin(), finished.end());
      for (std::size_t id : finished) {
        complete(id, newly_ready);
        --remaining_ops;
      }
    }

    std::stable_sort(trace.begin(), trace.end(),
                     [](const SimEvent& a, const SimEvent& b) { return a.time < b.time; });

    SimReport report;
    report.makespan = now;
    report.kind = kind;
    report.trace = std::move(trace);
    const Res reported[] = {Res::load, Res::tensor, Res::mufu};
    for (Res r : reported)
      report.busy[res_name(r)] = busy[static_cast<int>(r)];
    if (kind.fp8) report.busy[res_name(Res::xpose)] = busy[static_cast<int>(Res::xpose)];
    if (busy[static_cast<int>(Res::dq)] > 0.0)
      report.busy[res_name(Res::dq)] = busy[static_cast<int>(Res::dq)];
    for (const auto& [name, b] : report.busy)
      report.utilization[name] = report.makespan > 0.0 ? b / report.makespan : 0.0;
    return report;
  }

  [[noreturn]] void report_deadlock() {
    // Wait graph over unfinished ops: op -> unfinished dependency.
    std::vector<std::vector<std::size_t>> adj(g.ops.size());
    for (std::size_t i = 0; i < g.ops.size(); ++i) {
      if (g.ops[i].done) continue;
      for (std::size_t dep : g.ops[i].deps)
        if (!g.ops[dep].done) adj[i].push_back(dep);
    }
    const auto cycle = wait_graph_cycle(adj);
    std::ostringstream msg;
    msg << "simulate: schedule stalled at t=" << now;
    if (cycle.size() >= 2) {
      const Op& a = g.ops[cycle[0]];
      const Op& b = g.ops[cycle[1]];
      msg << "; blocking edge: " << agent_name(a.agent) << " "
          << start_action(a.type) << " block " << a.block << " waits on "
          << agent_name(b.agent) << " " << start_action(b.type) << " block "
          << b.block;
    }
    throw SimDeadlock(msg.str());
  }
};

}  // namespace

// ---------------------------------------------------------------------------

void ResourceModel::validate() const {
  if (tensor_flops_per_cycle <= 0 || mufu_exp_per_cycle <= 0 ||
      load_bandwidth_bytes_per_cycle <= 0 || smem_bandwidth_bytes_per_cycle <= 0)
    throw std::invalid_argument("ResourceModel: rates must be positive");
  if (load_latency_cycles < 0)
    throw std::invalid_argument("ResourceModel: latency must be non-negative");
  if (consumer_warpgroups == 0)
    throw std::invalid_argument("ResourceModel: need at least one warpgroup");
  if (buffer_stages == 0)
    throw std::invalid_argument("ResourceModel: need at least one buffer stage");
  if (register_limit <= 0)
    throw std::invalid_argument("ResourceModel: register limit must be positive");
}

void ScheduleKind::validate() const {
  if (pingpong && !warp_specialized)
    throw std::invalid_argument(
        "ScheduleKind: pingpong requires warp specialization");
  if (overlap_stages < 1 || overlap_stages > 3)
    throw std::invalid_argument("ScheduleKind: overlap stages must be 1..3");
}

void SimShape::validate() const {
  if (n == 0 || d == 0 || block_rows == 0 || block_cols == 0)
    throw std::invalid_argument("SimShape: dimensions must be positive");
}

std::string kind_name(const ScheduleKind& kind) {
  std::string name;
  if (!kind.warp_specialized) {
    name = kind.overlap_stages > 1 ? "overlap-only" : "serial";
  } else {
    name = "warp-specialized";
    if (kind.pingpong) name += "+pingpong";
    if (kind.overlap_stages == 2) name += "+2stage";
    if (kind.overlap_stages == 3) name += "+3stage";
  }
  if (kind.fp8) name += "+fp8";
  return name;
}

WorkModel work_model(std::size_t seqlen, std::size_t headdim, FloatFormatId format,
                     const ResourceModel& model) {
  if (seqlen == 0 || headdim == 0)
    throw std::invalid_argument("work_model: dimensions must be positive");
  model.validate();
  double tensor_rate = model.tensor_flops_per_cycle;
  if (format == FloatFormatId::fp8e4m3)
    tensor_rate *= 2.0;
  else if (format != FloatFormatId::fp16)
    throw std::invalid_argument("work_model: format must be fp16 or fp8e4m3");
  WorkModel wm;
  // Two GEMMs contribute 2*2*d FLOPs per score entry; one exp per entry.
  wm.matmul_flops_per_exp = 4.0 * static_cast<double>(headdim);
  wm.softmax_cycle_fraction =
      tensor_rate / (model.mufu_exp_per_cycle * wm.matmul_flops_per_exp);
  return wm;
}

SimReport simulate(const SimShape& shape, const ResourceModel& model,
                   const ScheduleKind& kind) {
  shape.validate();
  model.validate();
  kind.validate();
  check_registers(shape, model, kind);

  Graph graph = build_graph(shape, model, kind);
  const bool share =
      kind.warp_specialized && !kind.pingpong && graph.consumers > 1;
  Engine engine(graph, kind, share);
  SimReport report = engine.run();
  report.shape = shape;
  report.buffer_stages = model.buffer_stages;
  report.consumers = graph.consumers;
  return report;
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> wait_graph_cycle(
    const std::vector<std::vector<std::size_t>>& adjacency) {
  const std::size_t n = adjacency.size();
  std::vector<int> color(n, 0);  // 0 white, 1 on stack, 2 done
  std::vector<std::size_t> parent(n, static_cast<std::size_t>(-1));
  for (std::size_t root = 0; root < n; ++root) {
    if (color[root] != 0) continue;
    // Iterative DFS with explicit edge positions.
    std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
    color[root] = 1;
    while (!stack.empty()) {
      auto& [v, pos] = stack.back();
      if (pos < adjacency[v].size()) {
        const std::size_t u = adjacency[v][pos++];
        if (u >= n) throw std::invalid_argument("wait_graph_cycle: bad node id");
        if (color[u] == 1) {
          std::vector<std::size_t> cycle{u};
          for (std::size_t x = v; x != u; x = parent[x]) cycle.push_back(x);
          std::reverse(cycle.begin() + 1, cycle.end());
          return cycle;
        }
        if (color[u] == 0) {
          color[u] = 1;
          parent[u] = v;
          stack.push_back({u, 0});
        }
      } else {
        color[v] = 2;
        stack.pop_back();
      }
    }
  }
  return {};
}

// ---------------------------------------------------------------------------

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& value);

template <>
double parse_number<double>(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("resource model: bad value for " + key);
  }
  if (pos != value.size())
    throw std::invalid_argument("resource model: bad value for " + key);
  return v;
}

template <>
std::size_t parse_number<std::size_t>(const std::string& key,
                                      const std::string& value) {
  const double v = parse_number<double>(key, value);
  if (v < 0 || v != std::floor(v))
    throw std::invalid_argument("resource model: " + key +
                                " must be a non-negative integer");
  return static_cast<std::size_t>(v);
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

ResourceModel parse_resource_model(const std::string& text) {
  ResourceModel m;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("resource model line " + std::to_string(lineno) +
                                  ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "tensor_flops_per_cycle")
      m.tensor_flops_per_cycle = parse_number<double>(key, value);
    else if (key == "mufu_exp_per_cycle")
      m.mufu_exp_per_cycle = parse_number<double>(key, value);
    else if (key == "load_bandwidth_bytes_per_cycle")
      m.load_bandwidth_bytes_per_cycle = parse_number<double>(key, value);
    else if (key == "load_latency_cycles")
      m.load_latency_cycles = parse_number<double>(key, value);
    else if (key == "smem_bandwidth_bytes_per_cycle")
      m.smem_bandwidth_bytes_per_cycle = parse_number<double>(key, value);
    else if (key == "consumer_warpgroups")
      m.consumer_warpgroups = parse_number<std::size_t>(key, value);
    else if (key == "buffer_stages")
      m.buffer_stages = parse_number<std::size_t>(key, value);
    else if (key == "register_limit")
      m.register_limit = parse_number<double>(key, value);
    else
      throw std::invalid_argument("resource model line " + std::to_string(lineno) +
                                  ": unknown key '" + key + "'");
  }
  m.validate();
  return m;
}

std::string resource_model_text(const ResourceModel& model) {
  std::ostringstream out;
  out.precision(17);
  out << "tensor_flops_per_cycle = " << model.tensor_flops_per_cycle << "\n"
      << "mufu_exp_per_cycle = " << model.mufu_exp_per_cycle << "\n"
      << "load_bandwidth_bytes_per_cycle = " << model.load_bandwidth_bytes_per_cycle
      << "\n"
      << "load_latency_cycles = " << model.load_latency_cycles << "\n"
      << "smem_bandwidth_bytes_per_cycle = " << model.smem_bandwidth_bytes_per_cycle
      << "\n"
      << "consumer_warpgroups = " << model.consumer_warpgroups << "\n"
      << "buffer_stages = " << model.buffer_stages << "\n"
      << "register_limit = " << model.register_limit << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------

namespace {

struct TraceIndex {
  // Per block: commit time, issue event index, releases.
  std::map<std::size_t, double> commit;
  std::map<std::size_t, std::size_t> release_count;
};

}  // namespace

std::vector<TraceViolation> validate_trace(const SimReport& report) {
  std::vector<TraceViolation> out;
  const auto& tr = report.trace;
  auto flag = [&](std::size_t idx, const std::string& what) {
    out.push_back({what, idx});
  };

  // Monotone timestamps.
  for (std::size_t i = 1; i < tr.size(); ++i)
    if (tr[i].time < tr[i - 1].time - 1e-9)
      flag(i, "timestamps not monotone at event " + std::to_string(i));

  // Commit times and total releases per block.
  std::map<std::size_t, double> commit;
  std::map<std::size_t, std::size_t> total_releases;
  for (const auto& e : tr) {
    if (e.action == "load_commit") commit[e.block] = e.time;
    if (e.action == "release") ++total_releases[e.block];
  }

  // Consumes after commits.
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const auto& e = tr[i];
    if (e.action != "gemm_qk_start" && e.action != "gemm_pv_start") continue;
    auto it = commit.find(e.block);
    if (it == commit.end()) {
      flag(i, "block " + std::to_string(e.block) + " consumed without a commit");
    } else if (e.time < it->second - 1e-9) {
      flag(i, "block " + std::to_string(e.block) + " stage " +
                  std::to_string(e.stage) + " consumed before its commit");
    }
  }

  // Stage reuse and in-flight count. A stage is occupied from load_issue
  // until the last release of its block.
  std::map<std::size_t, std::size_t> stage_owner;  // stage -> block
  std::map<std::size_t, std::size_t> seen_releases;
  std::size_t in_flight = 0;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const auto& e = tr[i];
    if (e.action == "load_issue") {
      auto it = stage_owner.find(e.stage);
      if (it != stage_owner.end())
        flag(i, "stage " + std::to_string(e.stage) + " refilled with block " +
                    std::to_string(e.block) + " before block " +
                    std::to_string(it->second) + " was released");
      stage_owner[e.stage] = e.block;
      ++in_flight;
      if (report.buffer_stages > 0 && in_flight > report.buffer_stages)
        flag(i, "more than " + std::to_string(report.buffer_stages) +
                    " buffer stages in flight");
    } else if (e.action == "release") {
      if (++seen_releases[e.block] == total_releases[e.block]) {
        auto it = stage_owner.find(e.stage);
        if (it != stage_owner.end() && it->second == e.block) {
          stage_owner.erase(it);
          --in_flight;
        }
      }
    }
  }

  // Pingpong alternation: for one block, warpgroup c's tensor phase starts
  // only after warpgroup c-1's phase of the same type ended.
  if (report.kind.pingpong && report.consumers > 1) {
    for (const char* op : {"gemm_qk", "gemm_pv"}) {
      const std::string start = std::string(op) + "_start";
      const std::string end = std::string(op) + "_end";
      std::map<std::pair<std::size_t, std::string>, double> start_at, end_at;
      for (const auto& e : tr) {
        if (e.action == start) start_at[{e.block, e.agent}] = e.time;
        if (e.action == end) end_at[{e.block, e.agent}] = e.time;
      }
      for (const auto& [key, t0] : start_at) {
        const auto& [block, agent] = key;
        if (agent.size() < 3 || agent.compare(0, 2, "wg") != 0) continue;
        const std::size_t idx = std::stoul(agent.substr(2));
        for (std::size_t c = 0; c < idx; ++c) {
          const std::string prev = "wg" + std::to_string(c);
          auto it = end_at.find({block, prev});
          if (it != end_at.end() && t0 < it->second - 1e-9)
            flag(0, std::string(op) + " of " + agent + " on block " +
                        std::to_string(block) + " overlaps " + prev +
                        "'s pingpong phase");
        }
      }
    }
  }

  // Releases only after the releasing warpgroup's last use.
  std::map<std::pair<std::size_t, std::string>, double> pv_end;
  for (const auto& e : tr)
    if (e.action == "gemm_pv_end") pv_end[{e.block, e.agent}] = e.time;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const auto& e = tr[i];
    if (e.action != "release") continue;
    auto it = pv_end.find({e.block, e.agent});
    if (it == pv_end.end() || e.time < it->second - 1e-9)
      flag(i, "block " + std::to_string(e.block) + " released by " + e.agent +
                  " before its last use");
  }

  return out;
}

}  // namespace flashlab
