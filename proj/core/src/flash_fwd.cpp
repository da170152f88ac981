#include "flashlab/flash_fwd.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace flashlab {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

SoftmaxState::SoftmaxState(std::size_t rows)
    : row_max(rows, kNegInf), row_sum(rows, 0.0) {}

SoftmaxStep online_softmax_step(SoftmaxState& state, const Matrix& s_block) {
  const std::size_t rows = s_block.rows();
  const std::size_t cols = s_block.cols();
  if (rows != state.row_max.size())
    throw std::invalid_argument("online_softmax_step: row count mismatch");
  SoftmaxStep step{Matrix(rows, cols), std::vector<double>(rows, 0.0)};
  for (std::size_t i = 0; i < rows; ++i) {
    const double* srow = s_block.row_ptr(i);
    double m_new = state.row_max[i];
    for (std::size_t j = 0; j < cols; ++j)
      if (srow[j] > m_new) m_new = srow[j];
    double* prow = step.p_tilde.row_ptr(i);
    if (m_new == kNegInf) {
      // Row has not seen an unmasked column yet; everything stays zero.
      step.rescale[i] = 0.0;
      for (std::size_t j = 0; j < cols; ++j) prow[j] = 0.0;
      continue;
    }
    const double r = std::exp(state.row_max[i] - m_new);  // exp(-inf) == 0
    double block_sum = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      const double e = std::exp(srow[j] - m_new);
      prow[j] = e;
      block_sum += e;
    }
    state.row_sum[i] = r * state.row_sum[i] + block_sum;
    state.row_max[i] = m_new;
    step.rescale[i] = r;
  }
  return step;
}

namespace {

struct ColBlock {
  std::size_t c0, ncols;
};

// Alpha-scaled, causally masked score block for query rows [r0, r0+nr).
Matrix score_block(const AttentionInputs& in, std::size_t r0, std::size_t nr,
                   const ColBlock& cb) {
  Matrix s = matmul(block(in.q, r0, nr, 0, in.q.cols()),
                    block(in.k, cb.c0, cb.ncols, 0, in.k.cols()), true);
  for (std::size_t i = 0; i < nr; ++i) {
    double* row = s.row_ptr(i);
    for (std::size_t j = 0; j < cb.ncols; ++j) row[j] *= in.alpha;
    if (in.causal) {
      const std::size_t qpos = r0 + i;
      for (std::size_t j = 0; j < cb.ncols; ++j)
        if (cb.c0 + j > qpos) row[j] = kNegInf;
    }
  }
  return s;
}

// O[rows] = diag(rescale) * O + p_tilde * V_block; the scale-then-add order
// per element is shared by every schedule.
void accumulate_output(Matrix& o_acc, const std::vector<double>& rescale,
                       const Matrix& p_tilde, const AttentionInputs& in,
                       const ColBlock& cb) {
  for (std::size_t i = 0; i < o_acc.rows(); ++i) {
    const double r = rescale[i];
    double* row = o_acc.row_ptr(i);
    for (std::size_t j = 0; j < o_acc.cols(); ++j) row[j] *= r;
  }
  const Matrix g =
      matmul(p_tilde, block(in.v, cb.c0, cb.ncols, 0, in.v.cols()));
  for (std::size_t i = 0; i < o_acc.rows(); ++i) {
    const double* gr = g.row_ptr(i);
    double* row = o_acc.row_ptr(i);
    for (std::size_t j = 0; j < o_acc.cols(); ++j) row[j] += gr[j];
  }
}

void epilogue(Matrix& o_acc, const SoftmaxState& st, std::size_t r0, ForwardOutput& out) {
  for (std::size_t i = 0; i < o_acc.rows(); ++i) {
    const double ell = st.row_sum[i];
    double* row = o_acc.row_ptr(i);
    if (ell > 0.0) {
      const double inv = 1.0 / ell;
      for (std::size_t j = 0; j < o_acc.cols(); ++j)
        out.o(r0 + i, j) = row[j] * inv;
      out.logsumexp[r0 + i] = st.row_max[i] + std::log(ell);
    } else {
      for (std::size_t j = 0; j < o_acc.cols(); ++j) out.o(r0 + i, j) = 0.0;
      out.logsumexp[r0 + i] = kNegInf;
    }
  }
}

// Column blocks this query block attends to; fully masked blocks are counted
// and never touched.
std::vector<ColBlock> active_col_blocks(const AttentionInputs& in, const TileConfig& cfg,
                                        std::size_t r0, std::size_t nr,
                                        FlashFwdStats& stats) {
  const std::size_t n = in.k.rows();
  std::vector<ColBlock> blocks;
  for (std::size_t c0 = 0; c0 < n; c0 += cfg.block_cols) {
    const std::size_t nc = std::min(cfg.block_cols, n - c0);
    if (in.causal && c0 > r0 + nr - 1) {
      ++stats.blocks_skipped;
      continue;
    }
    blocks.push_back({c0, nc});
  }
  return blocks;
}

void check_tile(const TileConfig& cfg) {
  if (cfg.block_rows == 0 || cfg.block_cols == 0)
    throw std::invalid_argument("TileConfig: block sizes must be positive");
}

enum class Schedule { basic, two_stage, three_stage };

void run_query_block(const AttentionInputs& in, const TileConfig& cfg, Schedule sched,
                     std::size_t r0, std::size_t nr, ForwardOutput& out,
                     FlashFwdStats& stats) {
  const auto blocks = active_col_blocks(in, cfg, r0, nr, stats);
  SoftmaxState st(nr);
  Matrix o_acc(nr, in.v.cols());
  const std::size_t cnt = blocks.size();
  stats.blocks_visited += cnt;

  if (sched == Schedule::basic || cnt < 2) {
    for (const auto& cb : blocks) {
      Matrix s = score_block(in, r0, nr, cb);
      SoftmaxStep step = online_softmax_step(st, s);
      accumulate_output(o_acc, step.rescale, step.p_tilde, in, cb);
    }
  } else if (sched == Schedule::two_stage) {
    // The score GEMM for block idx is in flight while block idx-1's
    // probabilities run their value GEMM; exactly one pending score buffer.
    Matrix s_cur = score_block(in, r0, nr, blocks[0]);
    SoftmaxStep cur = online_softmax_step(st, s_cur);
    for (std::size_t i = 0; i < nr; ++i)
      for (std::size_t j = 0; j < o_acc.cols(); ++j)
        o_acc(i, j) *= cur.rescale[i];  // 0 * 0 on the zero accumulator
    for (std::size_t idx = 1; idx < cnt; ++idx) {
      Matrix s_next = score_block(in, r0, nr, blocks[idx]);
      stats.max_pending_scores = std::max<std::size_t>(stats.max_pending_scores, 1);
      accumulate_output(o_acc, std::vector<double>(nr, 1.0), cur.p_tilde, in,
                        blocks[idx - 1]);
      cur = online_softmax_step(st, s_next);
      for (std::size_t i = 0; i < nr; ++i) {
        const double r = cur.rescale[i];
        double* row = o_acc.row_ptr(i);
        for (std::size_t j = 0; j < o_acc.cols(); ++j) row[j] *= r;
      }
    }
    accumulate_output(o_acc, std::vector<double>(nr, 1.0), cur.p_tilde, in,
                      blocks[cnt - 1]);
  } else {
    // Three stages in flight: the rescale is deferred into scale_o and
    // applied immediately before each accumulation, so one extra
    // probability block stays live alongside the pending score buffer.
    stats.deferred_output_scale = true;
    Matrix s_cur = score_block(in, r0, nr, blocks[0]);
    SoftmaxStep cur = online_softmax_step(st, s_cur);
    std::vector<double> scale_o = cur.rescale;
    Matrix s_next = score_block(in, r0, nr, blocks[1]);
    stats.max_pending_scores = std::max<std::size_t>(stats.max_pending_scores, 1);
    for (std::size_t idx = 2; idx < cnt; ++idx) {
      accumulate_output(o_acc, scale_o, cur.p_tilde, in, blocks[idx - 2]);
      SoftmaxStep next = online_softmax_step(st, s_next);
      scale_o = next.rescale;
      stats.max_live_probs = std::max<std::size_t>(stats.max_live_probs, 2);
      s_next = score_block(in, r0, nr, blocks[idx]);
      cur = std::move(next);
    }
    accumulate_output(o_acc, scale_o, cur.p_tilde, in, blocks[cnt - 2]);
    SoftmaxStep last = online_softmax_step(st, s_next);
    accumulate_output(o_acc, last.rescale, last.p_tilde, in, blocks[cnt - 1]);
  }
  epilogue(o_acc, st, r0, out);
}

ForwardOutput run_schedule(const AttentionInputs& in, const TileConfig& cfg,
                           Schedule sched, FlashFwdStats* stats_out) {
  validate_inputs(in);
  check_tile(cfg);
  const std::size_t n = in.q.rows();
  const std::size_t t_c = (n + cfg.block_cols - 1) / cfg.block_cols;
  FlashFwdStats stats;
  Schedule effective = sched;
  if ((sched == Schedule::two_stage && t_c < 2) ||
      (sched == Schedule::three_stage && t_c < 4)) {
    effective = Schedule::basic;
    stats.fell_back_to_basic = true;
  }
  ForwardOutput out{Matrix(n, in.v.cols()), std::vector<double>(n, 0.0)};
  for (std::size_t r0 = 0; r0 < n; r0 += cfg.block_rows) {
    const std::size_t nr = std::min(cfg.block_rows, n - r0);
    run_query_block(in, cfg, effective, r0, nr, out, stats);
  }
  if (stats_out) *stats_out = stats;
  return out;
}

}  // namespace

ForwardOutput flash_fwd_basic(const AttentionInputs& in, const TileConfig& cfg,
                              FlashFwdStats* stats) {
  return run_schedule(in, cfg, Schedule::basic, stats);
}

ForwardOutput flash_fwd_2stage(const AttentionInputs& in, const TileConfig& cfg,
                               FlashFwdStats* stats) {
  return run_schedule(in, cfg, Schedule::two_stage, stats);
}

ForwardOutput flash_fwd_3stage(const AttentionInputs& in, const TileConfig& cfg,
                               FlashFwdStats* stats) {
  return run_schedule(in, cfg, Schedule::three_stage, stats);
}

}  // namespace flashlab
