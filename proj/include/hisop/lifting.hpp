#pragma once

// Confidence-aware lifting of a 2D context map into a camera-frustum volume.
//
// Shapes: depth logits [D,H,W], context [C,H,W], confidence [H,W],
// lifted volume [C,D,H,W].

#include <span>

#include "hisop/numerics.hpp"

namespace hisop {

/// Winner-takes-all over the depth softmax: per pixel, the largest
/// probability across the D hypotheses. Values lie in [1/D, 1].
DenseArray depth_confidence(const DenseArray& depth_logits);

/// Linear cross-attention
///
///   out[n, :] = conf[n] * softmax_row(Q)[n, :] * (softmax_col(K)^T V)
///
/// where softmax_row normalizes each query over its channels and softmax_col
/// normalizes each key channel over the tokens. Q is [Nq, Ck], K is [Nk, Ck],
/// V is [Nk, Cv]; the result is [Nq, Cv].
DenseArray linear_cross_attention(const DenseArray& queries, const DenseArray& keys,
                                  const DenseArray& values, std::span<const double> confidence);

/// softmax_col(K)^T V, the [Ck, Cv] matrix of global context vectors.
DenseArray global_context(const DenseArray& keys, const DenseArray& values);

struct LiftResult {
  DenseArray volume;        // [C,D,H,W]
  DenseArray distribution;  // [D,H,W], sums to 1 over D
  DenseArray interacted;    // [D,H,W] logits the distribution is taken from
};

/// Confidence-gated lifting.
///
/// Query tokens are the (depth, pixel) cells of the frustum. Token (d,h,w)
/// carries the context vector at its pixel scaled by the depth probability
/// softmax_D(fd)[d,h,w]; keys and values are the raw per-pixel context
/// vectors. The attention output of each token is gated by its pixel's
/// confidence, averaged over channels, and added to the depth logits. The
/// lifted distribution is the softmax over D of that sum and
///
///   volume[c,d,h,w] = fc[c,h,w] * distribution[d,h,w].
LiftResult lift_to_voxel_volume(const DenseArray& context, const DenseArray& depth_logits,
                                const DenseArray& confidence);

/// Plain outer-product lifting with distribution softmax_D(fd); no attention.
LiftResult lift_plain(const DenseArray& context, const DenseArray& depth_logits);

}  // namespace hisop
