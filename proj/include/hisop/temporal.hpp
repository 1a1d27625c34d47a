#pragma once

#include <span>

#include "hisop/geometry.hpp"
#include "hisop/numerics.hpp"

namespace hisop {

struct FrameObservation {
  DenseArray feature;  // [C,H,W]
  Intrinsics intrinsics;
  RigidPose pose;      // world -> camera
  int time_offset = 0; // 0 for the current frame, -i for the i-th historical frame
};

/// Replicates the current map across every hypothesis slice: [C,D,H,W].
DenseArray lift_current(const FrameObservation& frame, std::size_t depth_count);
DenseArray lift_current(const FrameObservation& frame, const DepthHypothesisSet& hyps);

/// Plane-sweep resampling of a historical frame into the current view. Slice j
/// holds hist.feature sampled at the warp of every current pixel under depth
/// hyps[j]; invalid warps and out-of-image samples read zero. Warped
/// coordinates within 1e-9 of a lattice point are snapped onto it so the
/// identity pose reproduces the input exactly.
DenseArray warp_historical(const FrameObservation& hist, const FrameObservation& cur,
                           const DepthHypothesisSet& hyps, Border border = Border::zero);

struct TemporalVolume {
  DenseArray values;       // [2C,D,H,W]: current block, then historical block
  std::size_t channels = 0;  // C

  DenseArray current_block() const;
  DenseArray historical_block() const;
};

enum class HistoricalRoute {
  warp,   // plane-sweep warp into the current view
  stack,  // replicate each historical map along depth, no geometry
};

/// frames[0] is the current frame. The historical block is the element-wise
/// mean of the per-frame historical volumes.
TemporalVolume build_temporal_volume(std::span<const FrameObservation> frames,
                                     const DepthHypothesisSet& hyps,
                                     HistoricalRoute route = HistoricalRoute::warp);

/// Concatenates two [C,D,H,W] blocks on the channel axis.
TemporalVolume concat_blocks(const DenseArray& current, const DenseArray& historical);

enum class MatchMode { hadamard, absdiff };

/// (1/N) * sum_i Match(ref, warp_i) per hypothesis slice; [C,D,H,W].
DenseArray build_cost_volume(std::span<const FrameObservation> frames, const DepthHypothesisSet& hyps,
                             MatchMode mode);

}  // namespace hisop
