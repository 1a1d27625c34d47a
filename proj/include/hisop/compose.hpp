#pragma once

// Unified-grid composition: voxel pooling of frustum volumes, zero-gated
// addition, the semantic head, the training objective and SSC metrics.
//
// Grid axes (x, y, z) follow the world frame; grid volumes are [C, X, Y, Z].

#include <cstdint>
#include <span>
#include <vector>

#include "hisop/geometry.hpp"
#include "hisop/numerics.hpp"

namespace hisop {

struct UnifiedGridSpec {
  std::size_t nx = 32, ny = 32, nz = 8;
  double voxel_size = 0.4;
  Vec3 origin = Vec3::Zero();  // world position of the grid's minimum corner

  std::size_t cells() const { return nx * ny * nz; }
  void validate() const;
  /// Flat cell index of a world point, or -1 when it falls outside.
  std::int64_t cell_of(const Vec3& world) const;
  Vec3 cell_center(std::size_t ix, std::size_t iy, std::size_t iz) const;
};

struct PoolResult {
  DenseArray grid;  // [C, nx, ny, nz]
  std::size_t dropped = 0;
  std::vector<double> dropped_mass;  // per channel
};

/// Splat a [C,D,H,W] frustum volume into the grid. Sample (h, w, d) sits at
/// pixel (w, h) backprojected to depth hyps[d]; samples are accumulated
/// pixel-major then by hypothesis.
PoolResult voxel_pool(const DenseArray& vol, const DepthHypothesisSet& hyps, const Intrinsics& K,
                      const RigidPose& pose, const UnifiedGridSpec& grid);

/// Cell index for every (h, w, d) sample in pooling order.
std::vector<std::int64_t> pool_indices(std::size_t H, std::size_t W, const DepthHypothesisSet& hyps,
                                       const Intrinsics& K, const RigidPose& pose,
                                       const UnifiedGridSpec& grid);

/// gate[c] * pooled[c] + geometric[c]; the gate starts at zero.
DenseArray zero_gated_compose(const DenseArray& pooled, const DenseArray& geometric,
                              std::span<const double> gate);

struct SemanticVoxelGrid {
  std::size_t nx = 0, ny = 0, nz = 0;
  std::vector<std::uint16_t> labels;  // x-major, then y, then z

  SemanticVoxelGrid() = default;
  SemanticVoxelGrid(std::size_t x, std::size_t y, std::size_t z, std::uint16_t fill = 0)
      : nx(x), ny(y), nz(z), labels(x * y * z, fill) {}
  std::size_t size() const { return labels.size(); }
  std::uint16_t& at(std::size_t x, std::size_t y, std::size_t z) { return labels[(x * ny + y) * nz + z]; }
  std::uint16_t at(std::size_t x, std::size_t y, std::size_t z) const { return labels[(x * ny + y) * nz + z]; }
  friend bool operator==(const SemanticVoxelGrid&, const SemanticVoxelGrid&) = default;
};

struct HeadOutput {
  DenseArray logits;  // [N+1, nx, ny, nz]
  SemanticVoxelGrid labels;
};

/// Per-voxel linear map to N+1 logits, then argmax (lowest index on ties).
HeadOutput semantic_head(const DenseArray& composed, const DenseArray& class_weights,
                         std::span<const double> bias = {});

struct LossWeights {
  double lambda_ce = 1.0;
  std::vector<double> class_weights;  // empty: all ones
};

struct LossReport {
  double total = 0.0;
  double depth = 0.0;
  double ce = 0.0;
};

inline constexpr double kLogEps = 1e-12;

/// L = L_depth + lambda_ce * L_ce.
///
/// L_ce is the class-weighted cross entropy of the logits over voxels not
/// masked out, normalized by the summed weights. L_depth is the per-pixel
/// binary cross entropy of the depth distribution against the one-hot
/// ground-truth bin, summed over bins and averaged over pixels whose bin is
/// non-negative. Throws UndefinedLossError when either supervision set is empty.
LossReport total_loss(const DenseArray& logits, const SemanticVoxelGrid& gt,
                      std::span<const std::uint8_t> ignore, const DenseArray& depth_distribution,
                      std::span<const int> gt_depth_bins, const LossWeights& weights);

struct Metrics {
  double iou = 0.0;
  std::vector<double> per_class_iou;  // classes 1..N; NaN when absent from gt and pred
  double miou = 0.0;
};

/// Occupancy IoU (label != 0) and per-class IoU over classes 1..num_classes.
/// mIoU averages classes present in gt or pred; voxels with ignore != 0 are
/// excluded. Empty unions score 1.
Metrics evaluate(const SemanticVoxelGrid& pred, const SemanticVoxelGrid& gt,
                 std::span<const std::uint8_t> ignore, std::size_t num_classes);

}  // namespace hisop
