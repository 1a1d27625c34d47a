#include "hisop/compose.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "hisop/errors.hpp"

namespace hisop {

void UnifiedGridSpec::validate() const {
  if (nx == 0 || ny == 0 || nz == 0) throw ArgumentError("grid: extents must be positive");
  if (!(voxel_size > 0.0)) throw ArgumentError("grid: voxel size must be positive");
}

std::int64_t UnifiedGridSpec::cell_of(const Vec3& world) const {
  const Vec3 rel = (world - origin) / voxel_size;
  const double fx = std::floor(rel.x()), fy = std::floor(rel.y()), fz = std::floor(rel.z());
  if (fx < 0 || fy < 0 || fz < 0 || fx >= static_cast<double>(nx) || fy >= static_cast<double>(ny) ||
      fz >= static_cast<double>(nz))
    return -1;
  const auto ix = static_cast<std::int64_t>(fx), iy = static_cast<std::int64_t>(fy),
             iz = static_cast<std::int64_t>(fz);
  return (ix * static_cast<std::int64_t>(ny) + iy) * static_cast<std::int64_t>(nz) + iz;
}

Vec3 UnifiedGridSpec::cell_center(std::size_t ix, std::size_t iy, std::size_t iz) const {
  return origin + voxel_size * Vec3(static_cast<double>(ix) + 0.5, static_cast<double>(iy) + 0.5,
                                    static_cast<double>(iz) + 0.5);
}

std::vector<std::int64_t> pool_indices(std::size_t H, std::size_t W, const DepthHypothesisSet& hyps,
                                       const Intrinsics& K, const RigidPose& pose,
                                       const UnifiedGridSpec& grid) {
  const RigidPose cam_to_world = pose.inverse();
  const std::size_t D = hyps.size();
  std::vector<std::int64_t> idx(H * W * D);
  for (std::size_t h = 0; h < H; ++h)
    for (std::size_t w = 0; w < W; ++w)
      for (std::size_t d = 0; d < D; ++d) {
        const Vec3 cam = backproject(K, {static_cast<double>(w), static_cast<double>(h)}, hyps[d]);
        idx[(h * W + w) * D + d] = grid.cell_of(cam_to_world.apply(cam));
      }
  return idx;
}

PoolResult voxel_pool(const DenseArray& vol, const DepthHypothesisSet& hyps, const Intrinsics& K,
                      const RigidPose& pose, const UnifiedGridSpec& grid) {
  require_rank(vol, 4, "voxel_pool");
  grid.validate();
  const std::size_t C = vol.extent(0), D = vol.extent(1), H = vol.extent(2), W = vol.extent(3);
  if (D != hyps.size())
    throw ShapeError("voxel_pool: volume has " + std::to_string(D) + " depth slices, hypotheses " +
                     std::to_string(hyps.size()));
  const std::vector<std::int64_t> idx = pool_indices(H, W, hyps, K, pose, grid);

  // Reorder [C,D,H,W] into sample-major columns (h, w, d).
  const std::size_t N = H * W * D, plane = H * W;
  DenseArray columns({C, N});
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t d = 0; d < D; ++d)
      for (std::size_t i = 0; i < plane; ++i) columns[c * N + i * D + d] = vol[(c * D + d) * plane + i];

  ChannelScatterResult s = scatter_add_channels(grid.cells(), idx, columns);
  return {s.out.reshaped({C, grid.nx, grid.ny, grid.nz}), s.dropped, std::move(s.dropped_mass)};
}

DenseArray zero_gated_compose(const DenseArray& pooled, const DenseArray& geometric,
                              std::span<const double> gate) {
  if (pooled.shape() != geometric.shape())
    throw ShapeError("zero_gated_compose: " + to_string(pooled.shape()) + " vs " + to_string(geometric.shape()));
  const std::size_t C = pooled.extent(0);
  if (gate.size() != C)
    throw ShapeError("zero_gated_compose: gate has " + std::to_string(gate.size()) + " entries for " +
                     std::to_string(C) + " channels");
  const std::size_t per = pooled.size() / C;
  DenseArray out = geometric;
  for (std::size_t c = 0; c < C; ++c) {
    if (gate[c] == 0.0) continue;
    for (std::size_t i = 0; i < per; ++i) out[c * per + i] = gate[c] * pooled[c * per + i] + geometric[c * per + i];
  }
  return out;
}

HeadOutput semantic_head(const DenseArray& composed, const DenseArray& class_weights,
                         std::span<const double> bias) {
  require_rank(composed, 4, "semantic_head");
  require_rank(class_weights, 2, "semantic_head weights");
  const std::size_t C = composed.extent(0), K = class_weights.extent(0);
  if (class_weights.extent(1) != C)
    throw ShapeError("semantic_head: weights expect " + std::to_string(class_weights.extent(1)) +
                     " channels, volume has " + std::to_string(C));
  if (!bias.empty() && bias.size() != K) throw ShapeError("semantic_head: bias length mismatch");
  const std::size_t nx = composed.extent(1), ny = composed.extent(2), nz = composed.extent(3);
  const std::size_t cells = nx * ny * nz;
  HeadOutput out{DenseArray({K, nx, ny, nz}), SemanticVoxelGrid(nx, ny, nz)};
  for (std::size_t k = 0; k < K; ++k) {
    double* dst = &out.logits[k * cells];
    if (!bias.empty()) std::fill(dst, dst + cells, bias[k]);
    for (std::size_t c = 0; c < C; ++c) {
      const double w = class_weights.at(k, c);
      if (w == 0.0) continue;
      const double* src = &composed[c * cells];
      for (std::size_t v = 0; v < cells; ++v) dst[v] += w * src[v];
    }
  }
  for (std::size_t v = 0; v < cells; ++v) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < K; ++k)
      if (out.logits[k * cells + v] > out.logits[best * cells + v]) best = k;
    out.labels.labels[v] = static_cast<std::uint16_t>(best);
  }
  return out;
}

LossReport total_loss(const DenseArray& logits, const SemanticVoxelGrid& gt,
                      std::span<const std::uint8_t> ignore, const DenseArray& depth_distribution,
                      std::span<const int> gt_depth_bins, const LossWeights& weights) {
  require_rank(logits, 4, "total_loss logits");
  require_rank(depth_distribution, 3, "total_loss depth distribution");
  if (weights.lambda_ce < 0.0) throw ArgumentError("total_loss: lambda_ce must be nonnegative");
  const std::size_t K = logits.extent(0), cells = gt.size();
  if (logits.extent(1) != gt.nx || logits.extent(2) != gt.ny || logits.extent(3) != gt.nz)
    throw ShapeError("total_loss: logits " + to_string(logits.shape()) + " do not match the label grid");
  if (!ignore.empty() && ignore.size() != cells) throw ShapeError("total_loss: ignore mask size mismatch");
  if (!weights.class_weights.empty() && weights.class_weights.size() != K)
    throw ShapeError("total_loss: class weight count mismatch");
  const std::size_t D = depth_distribution.extent(0),
                    plane = depth_distribution.extent(1) * depth_distribution.extent(2);
  if (gt_depth_bins.size() != plane) throw ShapeError("total_loss: depth bins do not match the image");

  double ce_sum = 0.0, ce_weight = 0.0;
  for (std::size_t v = 0; v < cells; ++v) {
    if (!ignore.empty() && ignore[v]) continue;
    const std::size_t y = gt.labels[v];
    if (y >= K) throw ArgumentError("total_loss: label " + std::to_string(y) + " outside the head's classes");
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) peak = std::max(peak, logits[k * cells + v]);
    double z = 0.0;
    for (std::size_t k = 0; k < K; ++k) z += std::exp(logits[k * cells + v] - peak);
    const double p = std::exp(logits[y * cells + v] - peak) / z;
    const double w = weights.class_weights.empty() ? 1.0 : weights.class_weights[y];
    ce_sum += -w * std::log(std::max(p, kLogEps));
    ce_weight += w;
  }
  if (ce_weight <= 0.0) throw UndefinedLossError("total_loss: no supervised voxels");

  double depth_sum = 0.0;
  std::size_t pixels = 0;
  for (std::size_t i = 0; i < plane; ++i) {
    const int bin = gt_depth_bins[i];
    if (bin < 0) continue;
    if (static_cast<std::size_t>(bin) >= D) throw ArgumentError("total_loss: depth bin out of range");
    for (std::size_t d = 0; d < D; ++d) {
      const double p = depth_distribution[d * plane + i];
      depth_sum += static_cast<std::size_t>(bin) == d ? -std::log(std::max(p, kLogEps))
                                                      : -std::log(std::max(1.0 - p, kLogEps));
    }
    ++pixels;
  }
  if (pixels == 0) throw UndefinedLossError("total_loss: no pixels with ground-truth depth");

  LossReport r;
  r.ce = ce_sum / ce_weight;
  r.depth = depth_sum / static_cast<double>(pixels);
  r.total = r.depth + weights.lambda_ce * r.ce;
  return r;
}

Metrics evaluate(const SemanticVoxelGrid& pred, const SemanticVoxelGrid& gt,
                 std::span<const std::uint8_t> ignore, std::size_t num_classes) {
  if (pred.nx != gt.nx || pred.ny != gt.ny || pred.nz != gt.nz)
    throw ShapeError("evaluate: prediction and ground truth extents differ");
  if (!ignore.empty() && ignore.size() != gt.size()) throw ShapeError("evaluate: ignore mask size mismatch");
  std::size_t occ_inter = 0, occ_union = 0;
  std::vector<std::size_t> tp(num_classes + 1, 0), fp(num_classes + 1, 0), fn(num_classes + 1, 0);
  for (std::size_t v = 0; v < gt.size(); ++v) {
    if (!ignore.empty() && ignore[v]) continue;
    const std::size_t p = pred.labels[v], g = gt.labels[v];
    if (p > num_classes || g > num_classes) throw ArgumentError("evaluate: label outside [0, N]");
    const bool po = p != 0, go = g != 0;
    occ_inter += po && go;
    occ_union += po || go;
    if (p == g) {
      ++tp[p];
    } else {
      ++fp[p];
      ++fn[g];
    }
  }
  Metrics m;
  m.iou = occ_union == 0 ? 1.0 : static_cast<double>(occ_inter) / static_cast<double>(occ_union);
  double total = 0.0;
  std::size_t present = 0;
  for (std::size_t k = 1; k <= num_classes; ++k) {
    const std::size_t uni = tp[k] + fp[k] + fn[k];
    if (uni == 0) {
      m.per_class_iou.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    const double iou = static_cast<double>(tp[k]) / static_cast<double>(uni);
    m.per_class_iou.push_back(iou);
    total += iou;
    ++present;
  }
  m.miou = present == 0 ? 1.0 : total / static_cast<double>(present);
  return m;
}

}  // namespace hisop
