#include <cmath>

#include "doctest.h"
#include "hisop/errors.hpp"
#include "hisop/pipeline.hpp"
#include "hisop/scenes.hpp"
#include "hisop/temporal.hpp"
#include "support.hpp"

using namespace hisop;
using hisop::test::Rng;
using hisop::test::random_array;

namespace {

FrameObservation frame(DenseArray feature, const Intrinsics& K, const RigidPose& pose, int offset) {
  return FrameObservation{std::move(feature), K, pose, offset};
}

}  // namespace

TEST_CASE("current frame replicates along depth") {
  Rng rng(41);
  const Intrinsics K{20.0, 20.0, 3.5, 2.5};
  const auto cur = frame(random_array(rng, {3, 6, 8}), K, {}, 0);
  for (const std::size_t D : {std::size_t{1}, std::size_t{5}}) {
    const DenseArray v = lift_current(cur, D);
    REQUIRE(v.shape() == Shape{3, D, 6, 8});
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t d = 0; d < D; ++d)
        for (std::size_t p = 0; p < 48; ++p) CHECK(v[(c * D + d) * 48 + p] == cur.feature[c * 48 + p]);
  }
  CHECK(lift_current(cur, 1).reshaped({3, 6, 8}) == cur.feature);
}

TEST_CASE("identity pose warp reproduces the historical map") {
  Rng rng(42);
  const Intrinsics K{30.0, 28.0, 7.5, 5.5};
  const RigidPose pose = hisop::test::random_pose(rng, 0.5, 1.0);
  const auto cur = frame(random_array(rng, {2, 12, 16}), K, pose, 0);
  const auto his = frame(random_array(rng, {2, 12, 16}), K, pose, -1);
  const auto hyps = build_hypotheses(1.0, 9.0, 5);
  const DenseArray w = warp_historical(his, cur, hyps);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t d = 0; d < 5; ++d)
      for (std::size_t p = 0; p < 192; ++p) CHECK(w[(c * 5 + d) * 192 + p] == his.feature[c * 192 + p]);
}

TEST_CASE("z-translated constant map stays constant where in bounds") {
  const Intrinsics K{20.0, 20.0, 9.5, 7.5};
  const auto cur = frame(DenseArray({1, 16, 20}, 2.5), K, {}, 0);
  RigidPose back;
  back.translation = Vec3(0.0, 0.0, 0.7);
  const auto his = frame(DenseArray({1, 16, 20}, 2.5), K, back, -1);
  const auto hyps = build_hypotheses(2.0, 8.0, 4);
  const DenseArray w = warp_historical(his, cur, hyps);
  const RigidPose rel = relative_pose(cur.pose, his.pose);
  std::size_t checked = 0;
  for (std::size_t d = 0; d < 4; ++d)
    for (std::size_t v = 0; v < 16; ++v)
      for (std::size_t u = 0; u < 20; ++u) {
        const WarpResult r = warp_pixel(K, K, rel, {double(u), double(v)}, hyps[d]);
        if (!r.valid || r.pixel.u < 0.0 || r.pixel.v < 0.0 || r.pixel.u > 19.0 || r.pixel.v > 15.0) continue;
        ++checked;
        CHECK(std::abs(w.at(0, d, v, u) - 2.5) <= 1e-12);
      }
  CHECK(checked > 200);
}

TEST_CASE("plane warp matches the rendered current frame at the plane hypothesis") {
  const RunConfig cfg = RunConfig::load(std::string(HISOP_DATA_DIR) + "/plane.cfg");
  // Bilinear resampling error scales with the square of the texture frequency;
  // at 0.25 cycles/m the texture spans about 30 pixels per cycle here.
  SceneSpec spec = SceneSpec::load(cfg.scene_path);
  spec.texture_frequency = 0.25;
  const Scene scene(spec);
  const Intrinsics K = cfg.camera.intrinsics();
  const auto poses = cfg.frame_poses();
  const std::size_t H = cfg.camera.height, W = cfg.camera.width;
  const RenderedFrame c = render_frame(scene, K, poses[0], H, W);
  const auto hyps = build_hypotheses(cfg.d_min, cfg.d_max, cfg.depth_count, cfg.spacing);
  const auto cur = frame(c.feature, K, poses[0], 0);
  for (std::size_t i = 1; i < poses.size(); ++i) {
    const RenderedFrame h = render_frame(scene, K, poses[i], H, W);
    const auto his = frame(h.feature, K, poses[i], -static_cast<int>(i));
    const DenseArray w = warp_historical(his, cur, hyps);
    const RigidPose rel = relative_pose(poses[0], poses[i]);
    const std::size_t C = c.feature.extent(0), D = hyps.size();
    double err = 0.0;
    std::size_t count = 0;
    for (std::size_t v = 0; v < H; ++v)
      for (std::size_t u = 0; u < W; ++u) {
        const std::size_t p = v * W + u;
        if (c.primitive[p] < 0) continue;
        const std::size_t j = hyps.nearest(c.depth[p]);
        const WarpResult r = warp_pixel(K, K, rel, {double(u), double(v)}, hyps[j]);
        if (!r.valid || r.pixel.u < 1.0 || r.pixel.v < 1.0 || r.pixel.u > W - 2.0 || r.pixel.v > H - 2.0) continue;
        for (std::size_t ch = 0; ch < C; ++ch) err += std::abs(w[(ch * D + j) * H * W + p] - c.feature[ch * H * W + p]);
        count += C;
      }
    REQUIRE(count > 0);
    CHECK(err / static_cast<double>(count) <= 1e-3);
  }
}

TEST_CASE("temporal volume construction") {
  Rng rng(43);
  const Intrinsics K{25.0, 25.0, 7.5, 5.5};
  const auto hyps = build_hypotheses(2.0, 6.0, 3);
  const auto cur = frame(random_array(rng, {2, 12, 16}), K, {}, 0);
  std::vector<FrameObservation> single{cur};
  CHECK_THROWS_AS(build_temporal_volume(single, hyps), ArgumentError);

  std::vector<FrameObservation> dup{cur, frame(cur.feature, K, {}, -1)};
  const TemporalVolume tv = build_temporal_volume(dup, hyps);
  CHECK(tv.channels == 2);
  CHECK(tv.values.shape() == Shape{4, 3, 12, 16});
  CHECK(tv.historical_block() == tv.current_block());

  std::vector<FrameObservation> four{cur};
  for (int i = 1; i <= 3; ++i) {
    RigidPose p = hisop::test::random_pose(rng, 0.05, 0.3);
    four.push_back(frame(random_array(rng, {2, 12, 16}), K, p, -i));
  }
  const TemporalVolume mean = build_temporal_volume(four, hyps);
  CHECK(mean.values.extent(0) == 4);
  const DenseArray w1 = warp_historical(four[1], cur, hyps), w2 = warp_historical(four[2], cur, hyps),
                   w3 = warp_historical(four[3], cur, hyps);
  const DenseArray his = mean.historical_block();
  for (std::size_t i = 0; i < his.size(); ++i) CHECK(std::abs(his[i] - (w1[i] + w2[i] + w3[i]) / 3.0) <= 1e-12);
  CHECK(mean.current_block() == lift_current(cur, hyps));

  const TemporalVolume stacked = build_temporal_volume(four, hyps, HistoricalRoute::stack);
  const DenseArray sh = stacked.historical_block();
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t d = 0; d < 3; ++d)
      for (std::size_t p = 0; p < 192; ++p) {
        const double expect = (four[1].feature[c * 192 + p] + four[2].feature[c * 192 + p] + four[3].feature[c * 192 + p]) / 3.0;
        CHECK(std::abs(sh[(c * 3 + d) * 192 + p] - expect) <= 1e-12);
      }

  std::vector<FrameObservation> mixed{cur, frame(random_array(rng, {3, 12, 16}), K, {}, -1)};
  CHECK_THROWS_AS(build_temporal_volume(mixed, hyps), ShapeError);
}

TEST_CASE("cost volume on identical aligned frames") {
  Rng rng(44);
  const Intrinsics K{25.0, 25.0, 7.5, 5.5};
  const auto hyps = build_hypotheses(2.0, 6.0, 3);
  const auto cur = frame(random_array(rng, {2, 12, 16}), K, {}, 0);
  std::vector<FrameObservation> frames{cur, frame(cur.feature, K, {}, -1), frame(cur.feature, K, {}, -2)};
  const DenseArray had = build_cost_volume(frames, hyps, MatchMode::hadamard);
  const DenseArray abs = build_cost_volume(frames, hyps, MatchMode::absdiff);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t d = 0; d < 3; ++d)
      for (std::size_t p = 0; p < 192; ++p) {
        const double f = cur.feature[c * 192 + p];
        CHECK(std::abs(had[(c * 3 + d) * 192 + p] - f * f) <= 1e-15);
        CHECK(abs[(c * 3 + d) * 192 + p] == 0.0);
      }
}
