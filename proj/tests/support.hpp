#pragma once

// Shared helpers for the unit tests: seeded randomness and small oracles.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include <Eigen/Geometry>

#include "hisop/geometry.hpp"
#include "hisop/numerics.hpp"

namespace hisop::test {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(gen_); }
  std::size_t pick(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(gen_);
  }
  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

inline DenseArray random_array(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  DenseArray a(std::move(shape));
  for (auto& v : a.values()) v = rng.uniform(lo, hi);
  return a;
}

inline Mat3 random_rotation(Rng& rng, double max_angle = 3.14159) {
  Vec3 axis(rng.normal(), rng.normal(), rng.normal());
  axis.normalize();
  return Eigen::AngleAxisd(rng.uniform(-max_angle, max_angle), axis).toRotationMatrix();
}

inline RigidPose random_pose(Rng& rng, double max_angle = 3.14159, double max_shift = 2.0) {
  RigidPose p;
  p.rotation = random_rotation(rng, max_angle);
  p.translation = Vec3(rng.uniform(-max_shift, max_shift), rng.uniform(-max_shift, max_shift),
                       rng.uniform(-max_shift, max_shift));
  return p;
}

inline double max_abs_diff(const DenseArray& a, const DenseArray& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

/// Scratch directory under the build tree, unique per test name.
inline std::string scratch_dir(const std::string& name) { return std::string(HISOP_TEST_SCRATCH) + "/" + name; }

}  // namespace hisop::test
