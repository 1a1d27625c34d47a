#include <cmath>

#include "doctest.h"
#include "hisop/errors.hpp"
#include "hisop/lifting.hpp"
#include "hisop/pipeline.hpp"
#include "hisop/scenes.hpp"
#include "support.hpp"

using namespace hisop;
using hisop::test::Rng;
using hisop::test::random_array;

TEST_CASE("depth confidence") {
  const DenseArray uniform = depth_confidence(DenseArray({4, 3, 5}, 0.7));
  for (const double c : uniform.values()) CHECK(std::abs(c - 0.25) <= 1e-15);

  DenseArray logits({3, 1, 1});
  logits[0] = std::log(2.0);
  CHECK(std::abs(depth_confidence(logits)[0] - 0.5) <= 1e-15);

  Rng rng(31);
  const DenseArray fd = random_array(rng, {7, 4, 6}, -4.0, 4.0);
  const DenseArray conf = depth_confidence(fd);
  REQUIRE(conf.shape() == Shape{4, 6});
  for (std::size_t h = 0; h < 4; ++h)
    for (std::size_t w = 0; w < 6; ++w) {
      double z = 0.0, best = 0.0;
      for (std::size_t d = 0; d < 7; ++d) z += std::exp(fd.at(d, h, w));
      for (std::size_t d = 0; d < 7; ++d) best = std::max(best, std::exp(fd.at(d, h, w)) / z);
      CHECK(std::abs(conf.at(h, w) - best) <= 1e-12);
      CHECK(conf.at(h, w) >= 1.0 / 7.0);
      CHECK(conf.at(h, w) <= 1.0);
    }
}

TEST_CASE("linear cross-attention analytic cases") {
  Rng rng(32);
  const DenseArray Q = random_array(rng, {5, 3});
  const DenseArray K = random_array(rng, {1, 3});
  const DenseArray V = random_array(rng, {1, 4});
  const std::vector<double> ones(5, 1.0);
  const DenseArray out = linear_cross_attention(Q, K, V, ones);
  for (std::size_t n = 0; n < 5; ++n)
    for (std::size_t c = 0; c < 4; ++c) CHECK(std::abs(out.at(n, c) - V.at(0, c)) <= 1e-12);

  const DenseArray K2 = random_array(rng, {6, 3});
  const DenseArray V2 = random_array(rng, {6, 4});
  std::vector<double> half(5, 1.0);
  half[2] = 0.5;
  const DenseArray full = linear_cross_attention(Q, K2, V2, ones);
  const DenseArray gated = linear_cross_attention(Q, K2, V2, half);
  for (std::size_t c = 0; c < 4; ++c) CHECK(gated.at(2, c) == 0.5 * full.at(2, c));
  for (std::size_t c = 0; c < 4; ++c) CHECK(gated.at(1, c) == full.at(1, c));

  CHECK_THROWS_AS(linear_cross_attention(Q, K2, random_array(rng, {5, 4}), ones), ShapeError);
  CHECK_THROWS_AS(linear_cross_attention(Q, random_array(rng, {6, 2}), V2, ones), ShapeError);
  CHECK_THROWS_AS(linear_cross_attention(Q, K2, V2, std::vector<double>(4, 1.0)), ShapeError);
}

TEST_CASE("linear cross-attention matches a naive triple loop") {
  Rng rng(33);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t Nq = rng.pick(1, 32), Nk = rng.pick(1, 32), C = rng.pick(1, 8);
    const DenseArray Q = random_array(rng, {Nq, C}, -3.0, 3.0);
    const DenseArray K = random_array(rng, {Nk, C}, -3.0, 3.0);
    const DenseArray V = random_array(rng, {Nk, C}, -3.0, 3.0);
    std::vector<double> conf(Nq);
    for (auto& c : conf) c = rng.uniform(0.05, 1.0);
    const DenseArray got = linear_cross_attention(Q, K, V, conf);
    double worst = 0.0;
    for (std::size_t n = 0; n < Nq; ++n) {
      double zq = 0.0;
      for (std::size_t a = 0; a < C; ++a) zq += std::exp(Q.at(n, a));
      for (std::size_t c = 0; c < C; ++c) {
        double acc = 0.0;
        for (std::size_t a = 0; a < C; ++a) {
          double zk = 0.0;
          for (std::size_t m = 0; m < Nk; ++m) zk += std::exp(K.at(m, a));
          double ctx = 0.0;
          for (std::size_t m = 0; m < Nk; ++m) ctx += std::exp(K.at(m, a)) / zk * V.at(m, c);
          acc += std::exp(Q.at(n, a)) / zq * ctx;
        }
        worst = std::max(worst, std::abs(conf[n] * acc - got.at(n, c)));
      }
    }
    CHECK(worst <= 1e-9);
  }
}

TEST_CASE("lifting places context at a collapsed hypothesis") {
  Rng rng(34);
  const std::size_t C = 3, D = 6, H = 4, W = 5;
  const DenseArray fc = random_array(rng, {C, H, W});
  DenseArray fd({D, H, W});
  std::vector<std::size_t> star(H * W);
  for (std::size_t p = 0; p < H * W; ++p) {
    star[p] = rng.pick(0, D - 1);
    fd[star[p] * H * W + p] = 1000.0;
  }
  for (const bool gated : {true, false}) {
    const LiftResult r = gated ? lift_to_voxel_volume(fc, fd, depth_confidence(fd)) : lift_plain(fc, fd);
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t d = 0; d < D; ++d)
        for (std::size_t p = 0; p < H * W; ++p) {
          const double expect = d == star[p] ? fc[c * H * W + p] : 0.0;
          CHECK(r.volume[(c * D + d) * H * W + p] == expect);
        }
  }
}

TEST_CASE("lifting conserves context along depth and ignores logit offsets") {
  Rng rng(35);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t C = rng.pick(1, 5), D = rng.pick(2, 9), H = rng.pick(1, 6), W = rng.pick(1, 6);
    const DenseArray fc = random_array(rng, {C, H, W}, -2.0, 2.0);
    const DenseArray fd = random_array(rng, {D, H, W}, -3.0, 3.0);
    const LiftResult r = lift_to_voxel_volume(fc, fd, depth_confidence(fd));
    REQUIRE(r.volume.shape() == Shape{C, D, H, W});
    CHECK(r.volume.all_finite());
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t p = 0; p < H * W; ++p) {
        double s = 0.0;
        for (std::size_t d = 0; d < D; ++d) s += r.volume[(c * D + d) * H * W + p];
        CHECK(std::abs(s - fc[c * H * W + p]) <= 1e-9);
      }
    for (std::size_t p = 0; p < H * W; ++p) {
      double s = 0.0;
      for (std::size_t d = 0; d < D; ++d) s += r.distribution[d * H * W + p];
      CHECK(std::abs(s - 1.0) <= 1e-12);
    }
    // A per-pixel constant added to every hypothesis changes neither the
    // confidence nor the lifted distribution.
    DenseArray shifted = fd;
    for (std::size_t p = 0; p < H * W; ++p) {
      const double k = rng.uniform(-10.0, 10.0);
      for (std::size_t d = 0; d < D; ++d) shifted[d * H * W + p] += k;
    }
    const LiftResult s = lift_to_voxel_volume(fc, shifted, depth_confidence(shifted));
    CHECK(hisop::test::max_abs_diff(s.volume, r.volume) <= 1e-9);
  }
  const DenseArray fc({2, 3, 3}), fd({4, 3, 3});
  CHECK_THROWS_AS(lift_to_voxel_volume(fc, DenseArray({4, 3, 2}), DenseArray({3, 2})), ShapeError);
  CHECK_THROWS_AS(lift_to_voxel_volume(fc, fd, DenseArray({3, 2})), ShapeError);
}

TEST_CASE("lifted distribution peaks at the plane depth") {
  const RunConfig cfg = RunConfig::load(std::string(HISOP_DATA_DIR) + "/plane.cfg");
  const Scene scene(SceneSpec::load(cfg.scene_path));
  const Intrinsics K = cfg.camera.intrinsics();
  const RenderedFrame f = render_frame(scene, K, cfg.frame_poses()[0], cfg.camera.height, cfg.camera.width);
  const auto hyps = build_hypotheses(cfg.d_min, cfg.d_max, cfg.depth_count, cfg.spacing);
  const DenseArray fd = depth_logits_oracle(f.depth, hyps, {cfg.depth_sigma, 0.0, 1});
  const LiftResult r = lift_to_voxel_volume(f.feature, fd, depth_confidence(fd));
  const std::size_t H = cfg.camera.height, W = cfg.camera.width, D = hyps.size();
  std::size_t textured = 0, hits = 0;
  for (std::size_t p = 0; p < H * W; ++p) {
    if (f.primitive[p] < 0) continue;
    ++textured;
    std::size_t best = 0;
    for (std::size_t d = 1; d < D; ++d)
      if (r.distribution[d * H * W + p] > r.distribution[best * H * W + p]) best = d;
    hits += best == hyps.nearest(f.depth[p]);
  }
  REQUIRE(textured > 0);
  CHECK(static_cast<double>(hits) / static_cast<double>(textured) >= 0.95);
}
