#pragma once

// Pinhole cameras, depth hypothesis planes and the plane-sweep warp.
//
// Poses map world points into the camera frame: X_cam = R * X_world + t, with
// points as column vectors. Camera axes: x right, y down, z forward. Pixel
// coordinates (u, v) are (column, row) with integer values at pixel centers.

#include <Eigen/Core>
#include <cstddef>
#include <vector>

namespace hisop {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  void validate() const;
  Mat3 matrix() const;
};

struct RigidPose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidPose identity() { return {}; }
  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }
  RigidPose inverse() const;
  /// Camera center in world coordinates, -R^T t.
  Vec3 center() const { return -rotation.transpose() * translation; }
  /// Throws ArgumentError unless R^T R = I and det R = 1 within `tol`.
  void validate(double tol = 1e-9) const;
};

/// this ∘ other: applies `other` first.
RigidPose compose(const RigidPose& outer, const RigidPose& inner);

enum class DepthSpacing { linear, inverse };

struct DepthHypothesisSet {
  std::vector<double> values;  // strictly increasing, meters
  DepthSpacing spacing = DepthSpacing::linear;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  /// Index of the hypothesis closest to `depth`; lowest index on ties.
  std::size_t nearest(double depth) const;
  void validate() const;
};

DepthHypothesisSet build_hypotheses(double d_min, double d_max, std::size_t count,
                                    DepthSpacing spacing = DepthSpacing::linear);

struct Pixel {
  double u = 0.0;
  double v = 0.0;
};

/// Throws BehindCameraError when x.z() <= 0.
Pixel project(const Intrinsics& K, const Vec3& x);

/// d * K^-1 * (u, v, 1); the result has z == d.
Vec3 backproject(const Intrinsics& K, const Pixel& p, double depth);

struct WarpResult {
  Pixel pixel;
  bool valid = false;  // false when the transformed depth is not positive
};

/// Dehomogenized Ki * (R * (K0^-1 * p * d) + t).
WarpResult warp_pixel(const Intrinsics& K0, const Intrinsics& Ki, const RigidPose& pose,
                      const Pixel& p, double depth);

/// Maps points from camera `a` into camera `b`; both poses are world-to-camera.
RigidPose relative_pose(const RigidPose& a, const RigidPose& b);

/// Rotation from yaw (about world z), pitch (about camera x) for the
/// x-forward, y-left, z-up world used by the scene generator.
RigidPose look_pose(const Vec3& camera_center, double yaw, double pitch);

}  // namespace hisop
