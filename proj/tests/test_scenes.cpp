#include <cmath>

#include "doctest.h"
#include "hisop/errors.hpp"
#include "hisop/scenes.hpp"
#include "support.hpp"

using namespace hisop;
using hisop::test::Rng;

namespace {

const UnifiedGridSpec kGrid{32, 32, 8, 0.4, Vec3(0.0, -6.4, 0.0)};

}  // namespace

TEST_CASE("scene specs are deterministic and round-trip through text") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const SceneSpec a = random_scene_spec(seed, kGrid), b = random_scene_spec(seed, kGrid);
    CHECK(a.serialize() == b.serialize());
    CHECK(SceneSpec::parse(a.serialize()).serialize() == a.serialize());
  }
  CHECK(random_scene_spec(1, kGrid).serialize() != random_scene_spec(2, kGrid).serialize());
}

TEST_CASE("random scenes stay inside their declared bounds") {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const SceneSpec s = random_scene_spec(seed, kGrid);
    s.validate();
    CHECK(s.primitives.size() >= 1 + RandomSceneOptions{}.min_boxes);
    for (const auto& p : s.primitives) {
      const Vec3 half = p.rotation.cwiseAbs() * (p.extents / 2.0);
      CHECK(((p.center - half).array() >= s.bounds_min.array() - 1e-12).all());
      CHECK(((p.center + half).array() <= s.bounds_max.array() + 1e-12).all());
      CHECK(p.label >= 1);
      CHECK(p.label <= s.num_classes);
    }
  }
}

TEST_CASE("scene text errors") {
  CHECK_THROWS(SceneSpec::parse("num_classes = 2\n[primitive]\nshape = box\nclass = 3\ncenter = 0 0 0\nextents = 1 1 1\n"));
  CHECK_THROWS(SceneSpec::parse("[primitive]\nshape = sphere\nclass = 1\ncenter = 0 0 0\nextents = 1 1 1\n"));
  CHECK_THROWS(SceneSpec::parse("[primitive]\nshape = box\nclass = 1\ncenter = 0 0\nextents = 1 1 1\n"));
  CHECK_THROWS(SceneSpec::parse("[primitive]\nshape = box\nclass = 1\ncenter = 0 0 0\nextents = 1 -1 1\n"));
  CHECK_THROWS(SceneSpec::parse("colour = red\n"));
  CHECK_THROWS_AS(SceneSpec::load("/nonexistent/scene.scene"), IoError);
}

TEST_CASE("empty scene renders and voxelizes to nothing") {
  const Scene scene(SceneSpec{});
  CHECK(scene.warnings().empty());
  const Intrinsics K{10.0, 10.0, 3.5, 2.5};
  const RenderedFrame f = render_frame(scene, K, look_pose(Vec3::Zero(), 0.0, 0.0), 6, 8);
  CHECK(f.depth == DenseArray({6, 8}));
  CHECK(f.feature == DenseArray({scene.channels(), 6, 8}));
  for (const int p : f.primitive) CHECK(p == -1);
  const SemanticVoxelGrid g = voxelize_ground_truth(scene, kGrid);
  for (const auto l : g.labels) CHECK(l == 0);
}

TEST_CASE("fronto-parallel plane renders constant depth") {
  const Scene scene(plane_scene_spec(5.0));
  const Intrinsics K{20.0, 20.0, 11.5, 7.5};
  const RenderedFrame f = render_frame(scene, K, look_pose(Vec3::Zero(), 0.0, 0.0), 16, 24);
  for (std::size_t p = 0; p < 16 * 24; ++p) {
    REQUIRE(f.primitive[p] == 0);
    CHECK(std::abs(f.depth[p] - 5.0) <= 1e-12);
  }
  // Looking away from the plane every ray misses.
  const RenderedFrame away = render_frame(scene, K, look_pose(Vec3::Zero(), 3.14159265358979, 0.0), 4, 4);
  for (std::size_t p = 0; p < 16; ++p) {
    CHECK(away.depth[p] == 0.0);
    CHECK(away.primitive[p] == -1);
    for (std::size_t c = 0; c < scene.channels(); ++c) CHECK(away.feature[c * 16 + p] == 0.0);
  }
}

TEST_CASE("features carry the class embedding") {
  SceneSpec spec = plane_scene_spec(4.0);
  spec.primitives[0].label = 3;
  const Scene scene(spec);
  const RaySample s = cast_pixel(scene, {10.0, 10.0, 0.0, 0.0}, look_pose(Vec3::Zero(), 0.0, 0.0), 0.0, 0.0);
  REQUIRE(s.primitive == 0);
  const std::size_t T = spec.texture_channels;
  for (std::size_t k = 0; k < spec.num_classes; ++k) CHECK(s.feature[T + k] == (k == 2 ? 1.0 : 0.0));
  for (std::size_t c = 0; c < T; ++c) CHECK(std::abs(s.feature[c]) <= 1.0);
}

TEST_CASE("corresponding pixels of two views carry the same feature") {
  const SceneSpec spec = random_scene_spec(7, kGrid);
  const Scene scene(spec);
  const Intrinsics K{26.0, 26.0, 23.5, 15.5};
  const RigidPose a = look_pose(Vec3(0.0, 0.0, 1.6), 0.0, 0.2);
  const RigidPose b = look_pose(Vec3(-0.6, 0.5, 1.7), 0.05, 0.18);
  const RenderedFrame fa = render_frame(scene, K, a, 32, 48);
  const RigidPose rel = relative_pose(a, b);
  std::size_t matched = 0;
  for (std::size_t v = 0; v < 32; ++v)
    for (std::size_t u = 0; u < 48; ++u) {
      const std::size_t p = v * 48 + u;
      if (fa.primitive[p] < 0) continue;
      const Vec3 xb = rel.apply(backproject(K, {double(u), double(v)}, fa.depth[p]));
      if (xb.z() <= 0.1) continue;
      const Pixel q = project(K, xb);
      const RaySample sb = cast_pixel(scene, K, b, q.u, q.v);
      // Skip points occluded in the second view.
      if (sb.primitive != fa.primitive[p] || std::abs(sb.depth - xb.z()) > 1e-6) continue;
      ++matched;
      for (std::size_t c = 0; c < scene.channels(); ++c) CHECK(std::abs(sb.feature[c] - fa.feature[c * 32 * 48 + p]) <= 1e-9);
    }
  CHECK(matched > 500);
}

TEST_CASE("nearest hit wins and the first listed primitive breaks ties") {
  SceneSpec spec;
  Primitive near, far;
  near.center = Vec3(3.0, 0.0, 0.0);
  near.label = 2;
  far.center = Vec3(6.0, 0.0, 0.0);
  far.label = 1;
  spec.primitives = {far, near};
  const Scene scene(spec);
  const auto hit = scene.cast(Vec3::Zero(), Vec3::UnitX());
  REQUIRE(hit);
  CHECK(hit->primitive == 1);
  CHECK(std::abs(hit->t - 2.5) <= 1e-12);

  SceneSpec twin;
  Primitive p1 = near, p2 = near;
  p2.label = 3;
  twin.primitives = {p1, p2};
  const Scene overlap(twin);
  CHECK_FALSE(overlap.warnings().empty());
  CHECK(overlap.cast(Vec3::Zero(), Vec3::UnitX())->primitive == 0);
  CHECK(voxelize_ground_truth(overlap, {8, 1, 1, 1.0, Vec3(0.0, -0.5, -0.5)}).at(3, 0, 0) == 2);
}

TEST_CASE("voxelization") {
  SceneSpec spec;
  Primitive box;
  box.center = Vec3(2.5, 1.5, 0.5);
  box.label = 3;
  spec.primitives = {box};
  const UnifiedGridSpec grid{5, 4, 3, 1.0, Vec3::Zero()};
  const SemanticVoxelGrid g = voxelize_ground_truth(Scene(spec), grid);
  std::size_t labeled = 0;
  for (const auto l : g.labels) labeled += l != 0;
  CHECK(labeled == 1);
  CHECK(g.at(2, 1, 0) == 3);

  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Scene scene(random_scene_spec(seed, kGrid));
    const SemanticVoxelGrid vg = voxelize_ground_truth(scene, kGrid);
    for (std::size_t x = 0; x < kGrid.nx; ++x)
      for (std::size_t y = 0; y < kGrid.ny; ++y)
        for (std::size_t z = 0; z < kGrid.nz; ++z) {
          std::uint16_t expect = 0;
          for (const auto& p : scene.spec().primitives)
            if (p.contains(kGrid.cell_center(x, y, z))) {
              expect = p.label;
              break;
            }
          CHECK(vg.at(x, y, z) == expect);
        }
  }
}

TEST_CASE("noise-free depth oracle peaks at the nearest hypothesis") {
  Rng rng(71);
  const auto hyps = build_hypotheses(1.5, 13.5, 32);
  DenseArray depth({6, 7});
  for (auto& d : depth.values()) d = rng.pick(0, 4) == 0 ? 0.0 : rng.uniform(1.0, 15.0);
  const DenseArray logits = depth_logits_oracle(depth, hyps, {0.3, 0.0, 1});
  for (std::size_t p = 0; p < 42; ++p) {
    if (depth[p] == 0.0) {
      for (std::size_t d = 0; d < 32; ++d) CHECK(logits[d * 42 + p] == 0.0);
      continue;
    }
    std::size_t best = 0;
    for (std::size_t d = 1; d < 32; ++d)
      if (logits[d * 42 + p] > logits[best * 42 + p]) best = d;
    CHECK(best == hyps.nearest(depth[p]));
  }
  const DenseArray a = depth_logits_oracle(depth, hyps, {0.3, 1.0, 9});
  CHECK(a == depth_logits_oracle(depth, hyps, {0.3, 1.0, 9}));
  CHECK_FALSE(a == depth_logits_oracle(depth, hyps, {0.3, 1.0, 10}));
}
