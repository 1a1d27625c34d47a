#pragma once

// Cross-frame pattern affinity and affinity-gated deformable refinement.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "hisop/numerics.hpp"

namespace hisop {

inline constexpr std::array<std::size_t, 3> kGroupDilations{1, 2, 4};

double gelu(double x);

/// Group normalization over [C, ...]: channels are split into `groups`
/// contiguous sets and each set is standardized with its own mean and
/// variance over all its elements, (x - mean) / sqrt(var + eps).
DenseArray group_norm(const DenseArray& vol, std::size_t groups, double eps = 1e-5);

struct ContextKernels {
  std::array<Conv3DKernel, 3> kernels;  // dilations 1, 2, 4
  std::size_t norm_groups = 4;
  double norm_eps = 1e-5;

  void validate(std::size_t channels) const;
};

/// Identity taps: center weight 1 from channel c to channel c.
ContextKernels identity_context_kernels(std::size_t channels);
/// Per-channel spatial blur in the image plane at each group's dilation:
/// center 1, edge neighbors `beta`, corner neighbors `beta^2`.
ContextKernels blur_context_kernels(std::size_t channels, double beta = 0.25);
/// Dense seeded weights ~ U(-scale, scale) plus the identity center tap.
ContextKernels random_context_kernels(std::size_t channels, std::uint64_t seed, double scale);

struct GroupContext {
  std::array<DenseArray, 3> groups;  // [C,D,H,W] each
};

/// GN(GELU(conv_i(vol))) for the three dilation groups.
GroupContext multigroup_context(const DenseArray& vol, const ContextKernels& kernels);

struct PatternAffinity {
  DenseArray values;  // [3,D,H,W] in [-1, 1]
};

/// Mean-centered cosine between two vectors. Zero when either centered
/// vector has (numerically) zero norm.
double centered_cosine(std::span<const double> a, std::span<const double> b);

/// Per voxel and group: centered cosine over the channel axis between the
/// current and historical contexts.
PatternAffinity pattern_affinity(const GroupContext& current, const GroupContext& historical);

/// Sampling window for one deformable level.
///
/// Tap k samples at p + base[k] + offset(p, k) with weight weights[k].
/// Offsets are either shared by every output voxel (K*3 values) or given
/// per voxel (D*H*W*K*3 values, voxel-major). Vectors are ordered (z, y, x),
/// i.e. (depth, height, width).
struct TapSet {
  std::vector<std::array<int, 3>> base;
  std::vector<double> weights;
  std::vector<double> offsets;
  bool per_voxel = false;

  std::size_t size() const { return base.size(); }
  void validate(std::size_t voxels) const;
};

/// Single center tap, weight 1, no offset.
TapSet identity_taps();
/// Full 3x3x3 window with separable binomial weights (sum 1) and seeded
/// offsets ~ U(-amplitude, amplitude) per component.
TapSet window_taps(std::uint64_t seed, double offset_amplitude, bool per_voxel = false,
                   std::size_t voxels = 0);

/// sum_k w_k * vol(p + p_k + dp_k) * a_k, where a_k is affinity channel
/// `level - 1` sampled at the same displaced location.
DenseArray affinity_deformable_sample(const DenseArray& vol, const TapSet& taps,
                                      const PatternAffinity& affinity, std::size_t level);

struct RefineConfig {
  std::array<TapSet, 3> taps;
  DenseArray reducer;  // [C_out, 3 * C_in] 1x1x1 convolution over the concatenated levels
  bool cascade = true; // false: every level reads the input volume
};

/// reducer[o, l*C + c] = 1/3 when o == c: averages the three levels.
DenseArray level_mean_reducer(std::size_t channels);
/// Averages the levels and `blocks` equal channel blocks, C_out = C / blocks.
DenseArray block_mean_reducer(std::size_t channels, std::size_t blocks);

/// Three affinity-gated deformable levels concatenated on channels and
/// reduced by a 1x1x1 convolution.
DenseArray multilevel_refine(const DenseArray& vol, const PatternAffinity& affinity,
                             const RefineConfig& config);

/// 1x1x1 convolution: out[o, v] = sum_i weights[o, i] * in[i, v].
DenseArray pointwise_conv(const DenseArray& vol, const DenseArray& weights);

}  // namespace hisop
