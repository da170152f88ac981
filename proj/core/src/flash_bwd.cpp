#include "flashlab/flash_bwd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace flashlab {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_tile(const TileConfig& cfg) {
  if (cfg.block_rows == 0 || cfg.block_cols == 0)
    throw std::invalid_argument("TileConfig: block sizes must be positive");
}

void add_into(Matrix& dst, std::size_t r0, const Matrix& src) {
  for (std::size_t i = 0; i < src.rows(); ++i) {
    double* d = dst.row_ptr(r0 + i);
    const double* s = src.row_ptr(i);
    for (std::size_t j = 0; j < src.cols(); ++j) d[j] += s[j];
  }
}

}  // namespace

std::vector<double> bwd_preprocess(const Matrix& dO, const Matrix& o) {
  if (!dO.same_shape(o))
    throw std::invalid_argument("bwd_preprocess: shape mismatch");
  std::vector<double> d(dO.rows(), 0.0);
  for (std::size_t i = 0; i < dO.rows(); ++i) {
    const double* gr = dO.row_ptr(i);
    const double* orow = o.row_ptr(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < dO.cols(); ++j) acc += gr[j] * orow[j];
    d[i] = acc;
  }
  return d;
}

AttentionGrads flash_bwd(const AttentionInputs& in, const Matrix& dO,
                         const ForwardOutput& fwd, const TileConfig& cfg) {
  validate_inputs(in);
  check_tile(cfg);
  if (!dO.same_shape(in.q))
    throw std::invalid_argument("flash_bwd: dO shape mismatch");
  if (!fwd.o.same_shape(dO) || fwd.logsumexp.size() != dO.rows())
    throw std::invalid_argument("flash_bwd: forward output shape mismatch");

  const std::size_t n = in.q.rows();
  const std::size_t d = in.q.cols();
  const std::vector<double> dsum = bwd_preprocess(dO, fwd.o);

  AttentionGrads g{Matrix(n, d), Matrix(n, d), Matrix(n, d)};

  // Key/value blocks are outermost so dK_j / dV_j accumulate locally; dQ rows
  // gather their contributions in ascending key-block order, which fixes the
  // summation order and keeps repeated runs bit-identical.
  for (std::size_t c0 = 0; c0 < n; c0 += cfg.block_cols) {
    const std::size_t nc = std::min(cfg.block_cols, n - c0);
    const Matrix kj = block(in.k, c0, nc, 0, d);
    const Matrix vj = block(in.v, c0, nc, 0, d);
    Matrix dk_j(nc, d);
    Matrix dv_j(nc, d);
    for (std::size_t r0 = 0; r0 < n; r0 += cfg.block_rows) {
      const std::size_t nr = std::min(cfg.block_rows, n - r0);
      if (in.causal && r0 + nr - 1 < c0) continue;  // every entry masked
      const Matrix qi = block(in.q, r0, nr, 0, d);
      const Matrix doi = block(dO, r0, nr, 0, d);

      // Probabilities recomputed from the stored logsumexp; same GEMM, scale,
      // mask order as the forward score path.
      Matrix p = matmul(qi, kj, true);
      for (std::size_t i = 0; i < nr; ++i) {
        double* row = p.row_ptr(i);
        for (std::size_t jc = 0; jc < nc; ++jc) row[jc] *= in.alpha;
        if (in.causal) {
          const std::size_t qpos = r0 + i;
          for (std::size_t jc = 0; jc < nc; ++jc)
            if (c0 + jc > qpos) row[jc] = kNegInf;
        }
        const double lse = fwd.logsumexp[r0 + i];
        if (lse == kNegInf) {
          // Fully masked query row: it produced no output, so no gradient
          // flows through this block.
          for (std::size_t jc = 0; jc < nc; ++jc) row[jc] = 0.0;
        } else {
          for (std::size_t jc = 0; jc < nc; ++jc)
            row[jc] = std::exp(row[jc] - lse);
        }
      }

      add_into(dv_j, 0, matmul(transpose(p), doi));

      const Matrix dp = matmul(doi, vj, true);
      Matrix ds(nr, nc);
      for (std::size_t i = 0; i < nr; ++i) {
        const double di = dsum[r0 + i];
        const double* prow = p.row_ptr(i);
        const double* dprow = dp.row_ptr(i);
        double* dsrow = ds.row_ptr(i);
        for (std::size_t jc = 0; jc < nc; ++jc)
          dsrow[jc] = prow[jc] * (dprow[jc] - di);
      }

      add_into(g.dq, r0, matmul(ds, kj));
      add_into(dk_j, 0, matmul(transpose(ds), qi));
    }
    // alpha folds in exactly once per gradient entry.
    for (std::size_t i = 0; i < nc; ++i) {
      const double* src = dk_j.row_ptr(i);
      double* dst = g.dk.row_ptr(c0 + i);
      for (std::size_t j = 0; j < d; ++j) dst[j] = in.alpha * src[j];
      const double* vsrc = dv_j.row_ptr(i);
      double* vdst = g.dv.row_ptr(c0 + i);
      for (std::size_t j = 0; j < d; ++j) vdst[j] = vsrc[j];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    double* row = g.dq.row_ptr(i);
    for (std::size_t j = 0; j < d; ++j) row[j] *= in.alpha;
  }
  return g;
}

}  // namespace flashlab
