#include "hisop/geometry.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "hisop/errors.hpp"

namespace hisop {

void Intrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0))
    throw ArgumentError("intrinsics: focal lengths must be positive (fx=" + std::to_string(fx) +
                        ", fy=" + std::to_string(fy) + ")");
}

Mat3 Intrinsics::matrix() const {
  Mat3 k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

RigidPose RigidPose::inverse() const {
  RigidPose inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

void RigidPose::validate(double tol) const {
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  const double det = rotation.determinant();
  if (ortho > tol || std::abs(det - 1.0) > tol)
    throw ArgumentError("pose: rotation is not orthonormal with det 1 (orthogonality error " +
                        std::to_string(ortho) + ", det " + std::to_string(det) + ")");
  if (!translation.allFinite()) throw ArgumentError("pose: non-finite translation");
}

RigidPose compose(const RigidPose& outer, const RigidPose& inner) {
  RigidPose out;
  out.rotation = outer.rotation * inner.rotation;
  out.translation = outer.rotation * inner.translation + outer.translation;
  return out;
}

std::size_t DepthHypothesisSet::nearest(double depth) const {
  std::size_t best = 0;
  double best_err = std::abs(values[0] - depth);
  for (std::size_t i = 1; i < values.size(); ++i) {
    const double err = std::abs(values[i] - depth);
    if (err < best_err) {
      best = i;
      best_err = err;
    }
  }
  return best;
}

void DepthHypothesisSet::validate() const {
  if (values.size() < 2) throw ArgumentError("depth hypotheses: need at least 2 planes");
  if (!(values.front() > 0.0)) throw ArgumentError("depth hypotheses: first plane must be positive");
  for (std::size_t i = 1; i < values.size(); ++i)
    if (!(values[i] > values[i - 1])) throw ArgumentError("depth hypotheses: values must increase strictly");
}

DepthHypothesisSet build_hypotheses(double d_min, double d_max, std::size_t count,
                                    DepthSpacing spacing) {
  if (!(d_min > 0.0) || !(d_max > d_min))
    throw ArgumentError("build_hypotheses: require 0 < d_min < d_max (got " + std::to_string(d_min) +
                        ", " + std::to_string(d_max) + ")");
  if (count < 2) throw ArgumentError("build_hypotheses: count must be at least 2");
  DepthHypothesisSet set;
  set.spacing = spacing;
  set.values.resize(count);
  const double last = static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) / last;
    if (spacing == DepthSpacing::linear) {
      set.values[i] = d_min + (d_max - d_min) * t;
    } else {
      const double inv = 1.0 / d_min + (1.0 / d_max - 1.0 / d_min) * t;
      set.values[i] = 1.0 / inv;
    }
  }
  set.values.front() = d_min;
  set.values.back() = d_max;
  return set;
}

Pixel project(const Intrinsics& K, const Vec3& x) {
  if (!(x.z() > 0.0)) throw BehindCameraError("project: point has non-positive depth " + std::to_string(x.z()));
  return {K.fx * x.x() / x.z() + K.cx, K.fy * x.y() / x.z() + K.cy};
}

Vec3 backproject(const Intrinsics& K, const Pixel& p, double depth) {
  if (!(depth > 0.0)) throw ArgumentError("backproject: depth must be positive, got " + std::to_string(depth));
  return {(p.u - K.cx) / K.fx * depth, (p.v - K.cy) / K.fy * depth, depth};
}

WarpResult warp_pixel(const Intrinsics& K0, const Intrinsics& Ki, const RigidPose& pose,
                      const Pixel& p, double depth) {
  const Vec3 x = pose.apply(backproject(K0, p, depth));
  if (!(x.z() > 0.0)) return {{0.0, 0.0}, false};
  return {{Ki.fx * x.x() / x.z() + Ki.cx, Ki.fy * x.y() / x.z() + Ki.cy}, true};
}

RigidPose relative_pose(const RigidPose& a, const RigidPose& b) { return compose(b, a.inverse()); }

RigidPose look_pose(const Vec3& camera_center, double yaw, double pitch) {
  // Camera axes expressed in the world at yaw = pitch = 0:
  // right = -y, down = -z, forward = +x.
  Mat3 cam_to_world;
  cam_to_world.col(0) = Vec3(0, -1, 0);
  cam_to_world.col(1) = Vec3(0, 0, -1);
  cam_to_world.col(2) = Vec3(1, 0, 0);
  const Mat3 yaw_rot = Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
  const Mat3 pitch_rot = Eigen::AngleAxisd(-pitch, Vec3::UnitX()).toRotationMatrix();
  const Mat3 r_cw = yaw_rot * cam_to_world * pitch_rot;
  RigidPose pose;
  pose.rotation = r_cw.transpose();
  pose.translation = -(pose.rotation * camera_center);
  return pose;
}

}  // namespace hisop
