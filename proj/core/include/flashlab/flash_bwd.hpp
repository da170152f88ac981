#pragma once
// Tiled attention backward. Probabilities are recomputed per block from the
// forward logsumexp (P = exp(S - L)), the softmax Jacobian is collapsed via
// D = rowsum(dO o O), and the key/value loop runs outermost so dK/dV blocks
// accumulate locally while dQ rows gather contributions in ascending
// key-block order (the role the dedicated accumulation agent plays in the
// warp-specialized kernel, kept deterministic here).

#include "flashlab/attention_ref.hpp"
#include "flashlab/flash_fwd.hpp"

namespace flashlab {

// rowsum(dO o O); the per-row dot that replaces rowsum(P o dP).
std::vector<double> bwd_preprocess(const Matrix& dO, const Matrix& o);

// Gradients of sum(dO o O). fwd must come from a forward pass over the same
// inputs; a corrupted logsumexp yields wrong (finite) gradients rather than
// a runtime error, surfacing only in gradient checks.
AttentionGrads flash_bwd(const AttentionInputs& in, const Matrix& dO,
                         const ForwardOutput& fwd, const TileConfig& cfg);

}  // namespace flashlab
