#pragma once

// Synthetic scene oracle: labeled box/plane primitives, a ray-cast renderer
// with procedural world-space texture, ground-truth voxelization and oracle
// depth logits.
//
// World frame: x forward, y left, z up (meters).

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hisop/compose.hpp"
#include "hisop/geometry.hpp"
#include "hisop/numerics.hpp"

namespace hisop {

enum class PrimitiveShape { box, plane };

/// Oriented box, or a rectangle in its local xy plane. `extents` are full
/// side lengths; for a plane, extents.z is the slab thickness used when
/// voxelizing (the rendered surface is the mid-plane).
struct Primitive {
  PrimitiveShape shape = PrimitiveShape::box;
  Vec3 center = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();  // local -> world
  Vec3 extents = Vec3::Ones();
  std::uint16_t label = 1;

  /// Inclusive point-in-primitive test.
  bool contains(const Vec3& world) const;
};

struct SceneSpec {
  std::uint64_t seed = 0;
  std::size_t num_classes = 4;
  std::size_t texture_channels = 12;
  double texture_frequency = 1.0;  // cycles per meter
  double embedding_amplitude = 1.0;
  Vec3 bounds_min = Vec3::Constant(-50.0);
  Vec3 bounds_max = Vec3::Constant(50.0);
  std::vector<Primitive> primitives;

  void validate() const;
  std::size_t channels() const { return texture_channels + num_classes; }

  /// key=value text: a header block then one [primitive] block per primitive.
  std::string serialize() const;
  static SceneSpec parse(std::string_view text, const std::string& source = "<scene>");
  static SceneSpec load(const std::string& path);
};

struct RayHit {
  double t = 0.0;
  Vec3 point = Vec3::Zero();
  std::size_t primitive = 0;
};

class Scene {
 public:
  explicit Scene(SceneSpec spec);

  const SceneSpec& spec() const { return spec_; }
  std::size_t channels() const { return spec_.channels(); }
  /// Overlapping primitive pairs (allowed; the nearest hit wins, then the
  /// first listed).
  const std::vector<std::string>& warnings() const { return warnings_; }

  /// Nearest hit along origin + t * dir for t > 0.
  std::optional<RayHit> cast(const Vec3& origin, const Vec3& dir) const;

  /// Texture channels, then the class embedding.
  void feature_at(const Vec3& point, std::uint16_t label, std::span<double> out) const;

 private:
  struct Wave {
    Vec3 direction;
    double frequency;
    double phase;
  };
  SceneSpec spec_;
  std::vector<std::string> warnings_;
  std::vector<Wave> waves_;  // 3 per texture channel
};

Scene build_scene(const SceneSpec& spec);

struct RenderedFrame {
  DenseArray depth;    // [H,W], 0 where no primitive is hit
  DenseArray feature;  // [C,H,W], zero where no primitive is hit
  std::vector<int> primitive;  // [H*W], -1 on misses
  Intrinsics intrinsics;
  RigidPose pose;
};

struct RaySample {
  double depth = 0.0;
  std::vector<double> feature;
  int primitive = -1;
};

/// Casts the ray through continuous pixel (u, v).
RaySample cast_pixel(const Scene& scene, const Intrinsics& K, const RigidPose& pose, double u, double v);

RenderedFrame render_frame(const Scene& scene, const Intrinsics& K, const RigidPose& pose,
                           std::size_t height, std::size_t width);

/// Each voxel takes the label of the first listed primitive containing its
/// center, else 0.
SemanticVoxelGrid voxelize_ground_truth(const Scene& scene, const UnifiedGridSpec& grid);

struct RandomSceneOptions {
  std::size_t min_boxes = 3;
  std::size_t max_boxes = 6;
  bool ground = true;
  double ground_top = 0.3;
  double near_x = 2.5;  // boxes start at least this far along x
};

/// Ground slab (class 1) plus seeded boxes of classes 2..N inside the world
/// bounds spanned by `grid`.
SceneSpec random_scene_spec(std::uint64_t seed, const UnifiedGridSpec& grid,
                            const RandomSceneOptions& options = {});

/// A single fronto-parallel textured plane facing a camera at the origin
/// looking along +x, `depth` meters away.
SceneSpec plane_scene_spec(double depth, double width = 40.0, double height = 40.0);

struct DepthOracleParams {
  double sigma = 0.3;  // meters
  double noise = 0.0;  // std-dev of additive Gaussian logit noise
  std::uint64_t seed = 0;
};

/// Depth logits [D,H,W]: -(d_j - d*)^2 / (2 sigma^2) plus noise; all-zero
/// (uniform) where the depth map has no hit.
DenseArray depth_logits_oracle(const DenseArray& depth, const DepthHypothesisSet& hyps,
                               const DepthOracleParams& params);

}  // namespace hisop
