#include "hisop/temporal.hpp"

#include <cmath>
#include <string>

#include "hisop/errors.hpp"
#include "hisop/parallel.hpp"

namespace hisop {

DenseArray lift_current(const FrameObservation& frame, std::size_t depth_count) {
  require_rank(frame.feature, 3, "lift_current");
  if (depth_count == 0) throw ArgumentError("lift_current: depth count must be positive");
  const std::size_t C = frame.feature.extent(0), H = frame.feature.extent(1), W = frame.feature.extent(2);
  const std::size_t plane = H * W;
  DenseArray out({C, depth_count, H, W});
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t d = 0; d < depth_count; ++d)
      std::copy_n(&frame.feature[c * plane], plane, &out[(c * depth_count + d) * plane]);
  return out;
}

DenseArray lift_current(const FrameObservation& frame, const DepthHypothesisSet& hyps) {
  return lift_current(frame, hyps.size());
}

namespace {

double snap(double x) {
  const double r = std::round(x);
  return std::abs(x - r) <= 1e-9 ? r : x;
}

}  // namespace

DenseArray warp_historical(const FrameObservation& hist, const FrameObservation& cur,
                           const DepthHypothesisSet& hyps, Border border) {
  require_rank(hist.feature, 3, "warp_historical hist");
  require_rank(cur.feature, 3, "warp_historical cur");
  if (hist.feature.extent(1) != cur.feature.extent(1) || hist.feature.extent(2) != cur.feature.extent(2))
    throw ShapeError("warp_historical: frames differ in image extents");
  const std::size_t C = hist.feature.extent(0), H = cur.feature.extent(1), W = cur.feature.extent(2),
                    D = hyps.size();
  const RigidPose rel = relative_pose(cur.pose, hist.pose);
  const std::size_t plane = H * W;
  DenseArray out({C, D, H, W});
  parallel_for(D * H, [&](std::size_t begin, std::size_t end) {
    std::vector<double> sample(C);
    for (std::size_t row = begin; row < end; ++row) {
      const std::size_t d = row / H, h = row % H;
      for (std::size_t w = 0; w < W; ++w) {
        const Pixel p{static_cast<double>(w), static_cast<double>(h)};
        const WarpResult wr = warp_pixel(cur.intrinsics, hist.intrinsics, rel, p, hyps[d]);
        if (!wr.valid) continue;
        bilinear_sample_into(hist.feature, snap(wr.pixel.u), snap(wr.pixel.v), border, sample);
        for (std::size_t c = 0; c < C; ++c) out[(c * D + d) * plane + h * W + w] = sample[c];
      }
    }
  });
  return out;
}

DenseArray TemporalVolume::current_block() const {
  const std::size_t block = values.size() / 2;
  Shape s = values.shape();
  s[0] = channels;
  return DenseArray(s, std::vector<double>(values.storage().begin(), values.storage().begin() + block));
}

DenseArray TemporalVolume::historical_block() const {
  const std::size_t block = values.size() / 2;
  Shape s = values.shape();
  s[0] = channels;
  return DenseArray(s, std::vector<double>(values.storage().begin() + block, values.storage().end()));
}

TemporalVolume concat_blocks(const DenseArray& current, const DenseArray& historical) {
  require_rank(current, 4, "concat_blocks current");
  if (current.shape() != historical.shape())
    throw ShapeError("concat_blocks: " + to_string(current.shape()) + " vs " + to_string(historical.shape()));
  Shape s = current.shape();
  const std::size_t C = s[0];
  s[0] = 2 * C;
  std::vector<double> data;
  data.reserve(current.size() * 2);
  data.insert(data.end(), current.storage().begin(), current.storage().end());
  data.insert(data.end(), historical.storage().begin(), historical.storage().end());
  return {DenseArray(s, std::move(data)), C};
}

namespace {

void check_sequence(std::span<const FrameObservation> frames) {
  if (frames.size() < 2)
    throw ArgumentError("temporal volume needs a current frame and at least one historical frame, got " +
                        std::to_string(frames.size()) + " frame(s)");
  const Shape& s = frames[0].feature.shape();
  for (const auto& f : frames) {
    require_rank(f.feature, 3, "temporal frame");
    if (f.feature.shape() != s) throw ShapeError("temporal frames must share feature shape");
  }
}

}  // namespace

TemporalVolume build_temporal_volume(std::span<const FrameObservation> frames,
                                     const DepthHypothesisSet& hyps, HistoricalRoute route) {
  check_sequence(frames);
  const FrameObservation& cur = frames[0];
  DenseArray current = lift_current(cur, hyps);
  DenseArray historical(current.shape());
  const double inv_n = 1.0 / static_cast<double>(frames.size() - 1);
  for (std::size_t i = 1; i < frames.size(); ++i) {
    const DenseArray v = route == HistoricalRoute::warp ? warp_historical(frames[i], cur, hyps)
                                                        : lift_current(frames[i], hyps);
    for (std::size_t k = 0; k < v.size(); ++k) historical[k] += v[k];
  }
  for (double& x : historical.values()) x *= inv_n;
  return concat_blocks(current, historical);
}

DenseArray build_cost_volume(std::span<const FrameObservation> frames, const DepthHypothesisSet& hyps,
                             MatchMode mode) {
  check_sequence(frames);
  const DenseArray ref = lift_current(frames[0], hyps);
  DenseArray cost(ref.shape());
  const double inv_n = 1.0 / static_cast<double>(frames.size() - 1);
  for (std::size_t i = 1; i < frames.size(); ++i) {
    const DenseArray warped = warp_historical(frames[i], frames[0], hyps);
    for (std::size_t k = 0; k < cost.size(); ++k)
      cost[k] += mode == MatchMode::hadamard ? ref[k] * warped[k] : std::abs(ref[k] - warped[k]);
  }
  for (double& x : cost.values()) x *= inv_n;
  return cost;
}

}  // namespace hisop
