#include "hisop/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "hisop/errors.hpp"
#include "hisop/parallel.hpp"

namespace hisop {

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

DenseArray group_norm(const DenseArray& vol, std::size_t groups, double eps) {
  if (vol.rank() < 2) throw ShapeError("group_norm: need a channel axis and at least one spatial axis");
  const std::size_t C = vol.extent(0);
  if (groups == 0 || C % groups != 0)
    throw ShapeError("group_norm: " + std::to_string(C) + " channels not divisible into " +
                     std::to_string(groups) + " groups");
  const std::size_t per_group = vol.size() / groups;
  DenseArray out(vol.shape());
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t begin = g * per_group, end = begin + per_group;
    double mean = 0.0;
    for (std::size_t i = begin; i < end; ++i) mean += vol[i];
    mean /= static_cast<double>(per_group);
    double var = 0.0;
    for (std::size_t i = begin; i < end; ++i) var += (vol[i] - mean) * (vol[i] - mean);
    var /= static_cast<double>(per_group);
    const double scale = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = begin; i < end; ++i) out[i] = (vol[i] - mean) * scale;
  }
  return out;
}

void ContextKernels::validate(std::size_t channels) const {
  for (std::size_t i = 0; i < 3; ++i) {
    kernels[i].validate();
    if (kernels[i].dilation != kGroupDilations[i])
      throw ArgumentError("context kernel " + std::to_string(i + 1) + " must have dilation " +
                          std::to_string(kGroupDilations[i]));
    if (kernels[i].in_channels() != channels)
      throw ShapeError("context kernel " + std::to_string(i + 1) + " expects " +
                       std::to_string(kernels[i].in_channels()) + " channels, volume has " +
                       std::to_string(channels));
  }
}

namespace {

ContextKernels make_kernels(std::size_t channels, const auto& fill) {
  ContextKernels k;
  for (std::size_t g = 0; g < 3; ++g) {
    k.kernels[g].weights = DenseArray({channels, channels, 3, 3, 3});
    k.kernels[g].dilation = kGroupDilations[g];
    fill(g, k.kernels[g].weights);
  }
  return k;
}

}  // namespace

ContextKernels identity_context_kernels(std::size_t channels) {
  return make_kernels(channels, [channels](std::size_t, DenseArray& w) {
    for (std::size_t c = 0; c < channels; ++c) w.at(c, c, 1, 1, 1) = 1.0;
  });
}

ContextKernels blur_context_kernels(std::size_t channels, double beta) {
  return make_kernels(channels, [channels, beta](std::size_t, DenseArray& w) {
    for (std::size_t c = 0; c < channels; ++c)
      for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 3; ++x) {
          const int ring = std::abs(y - 1) + std::abs(x - 1);
          w.at(c, c, 1, y, x) = std::pow(beta, ring);
        }
  });
}

ContextKernels random_context_kernels(std::size_t channels, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-scale, scale);
  return make_kernels(channels, [&](std::size_t, DenseArray& w) {
    for (double& v : w.values()) v = uni(rng);
    for (std::size_t c = 0; c < channels; ++c) w.at(c, c, 1, 1, 1) += 1.0;
  });
}

GroupContext multigroup_context(const DenseArray& vol, const ContextKernels& kernels) {
  require_rank(vol, 4, "multigroup_context");
  kernels.validate(vol.extent(0));
  GroupContext ctx;
  for (std::size_t g = 0; g < 3; ++g) {
    DenseArray conv = dilated_conv3d(vol, kernels.kernels[g]);
    for (double& v : conv.values()) v = gelu(v);
    ctx.groups[g] = group_norm(conv, kernels.norm_groups, kernels.norm_eps);
  }
  return ctx;
}

double centered_cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("centered_cosine: length mismatch");
  if (a.empty()) return 0.0;
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0, raw_a = 0.0, raw_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
    raw_a += a[i] * a[i];
    raw_b += b[i] * b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  // Centered norms at rounding level of the raw norms count as zero variance.
  constexpr double kRel = 1e-20;
  if (saa <= kRel * raw_a || sbb <= kRel * raw_b) return 0.0;
  return std::clamp(sab / (std::sqrt(saa) * std::sqrt(sbb)), -1.0, 1.0);
}

PatternAffinity pattern_affinity(const GroupContext& current, const GroupContext& historical) {
  for (std::size_t g = 0; g < 3; ++g) {
    require_rank(current.groups[g], 4, "pattern_affinity current");
    if (current.groups[g].shape() != historical.groups[g].shape())
      throw ShapeError("pattern_affinity: group " + std::to_string(g + 1) + " shapes differ: " +
                       to_string(current.groups[g].shape()) + " vs " + to_string(historical.groups[g].shape()));
    if (current.groups[g].shape() != current.groups[0].shape())
      throw ShapeError("pattern_affinity: groups must share a shape");
  }
  const Shape& s = current.groups[0].shape();
  const std::size_t C = s[0], voxels = s[1] * s[2] * s[3];
  PatternAffinity aff{DenseArray({3, s[1], s[2], s[3]})};
  for (std::size_t g = 0; g < 3; ++g) {
    const DenseArray& cg = current.groups[g];
    const DenseArray& hg = historical.groups[g];
    parallel_for(voxels, [&](std::size_t begin, std::size_t end) {
      std::vector<double> a(C), b(C);
      for (std::size_t v = begin; v < end; ++v) {
        for (std::size_t c = 0; c < C; ++c) {
          a[c] = cg[c * voxels + v];
          b[c] = hg[c * voxels + v];
        }
        aff.values[g * voxels + v] = centered_cosine(a, b);
      }
    });
  }
  return aff;
}

void TapSet::validate(std::size_t voxels) const {
  const std::size_t K = base.size();
  if (K == 0) throw ArgumentError("tap set is empty");
  if (weights.size() != K) throw ShapeError("tap set: weights length does not match tap count");
  const std::size_t expected = per_voxel ? voxels * K * 3 : K * 3;
  if (offsets.size() != expected)
    throw ShapeError("tap set: expected " + std::to_string(expected) + " offset values, got " +
                     std::to_string(offsets.size()));
}

TapSet identity_taps() { return TapSet{{{0, 0, 0}}, {1.0}, {0.0, 0.0, 0.0}, false}; }

TapSet window_taps(std::uint64_t seed, double offset_amplitude, bool per_voxel, std::size_t voxels) {
  TapSet taps;
  const double binomial[3] = {0.25, 0.5, 0.25};
  for (int z = -1; z <= 1; ++z)
    for (int y = -1; y <= 1; ++y)
      for (int x = -1; x <= 1; ++x) {
        taps.base.push_back({z, y, x});
        taps.weights.push_back(binomial[z + 1] * binomial[y + 1] * binomial[x + 1]);
      }
  taps.per_voxel = per_voxel;
  const std::size_t n = (per_voxel ? voxels : 1) * taps.base.size() * 3;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-offset_amplitude, offset_amplitude);
  taps.offsets.resize(n);
  for (double& o : taps.offsets) o = offset_amplitude > 0.0 ? uni(rng) : 0.0;
  return taps;
}

DenseArray affinity_deformable_sample(const DenseArray& vol, const TapSet& taps,
                                      const PatternAffinity& affinity, std::size_t level) {
  require_rank(vol, 4, "affinity_deformable_sample");
  require_rank(affinity.values, 4, "affinity_deformable_sample affinity");
  const std::size_t C = vol.extent(0), D = vol.extent(1), H = vol.extent(2), W = vol.extent(3);
  if (affinity.values.extent(1) != D || affinity.values.extent(2) != H || affinity.values.extent(3) != W)
    throw ShapeError("affinity_deformable_sample: affinity " + to_string(affinity.values.shape()) +
                     " does not match volume " + to_string(vol.shape()));
  if (level < 1 || level > affinity.values.extent(0))
    throw ArgumentError("affinity_deformable_sample: level " + std::to_string(level) + " out of range");
  const std::size_t voxels = D * H * W, K = taps.size();
  taps.validate(voxels);
  const double* aff = &affinity.values[(level - 1) * voxels];

  DenseArray out(vol.shape());
  parallel_for(voxels, [&](std::size_t begin, std::size_t end) {
    std::vector<double> acc(C);
    for (std::size_t v = begin; v < end; ++v) {
      const std::size_t z = v / (H * W), y = (v / W) % H, x = v % W;
      const double* off = taps.per_voxel ? &taps.offsets[v * K * 3] : taps.offsets.data();
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t k = 0; k < K; ++k) {
        const double sz = static_cast<double>(z) + taps.base[k][0] + off[3 * k + 0];
        const double sy = static_cast<double>(y) + taps.base[k][1] + off[3 * k + 1];
        const double sx = static_cast<double>(x) + taps.base[k][2] + off[3 * k + 2];
        const TrilinearStencil st = trilinear_stencil(D, H, W, sx, sy, sz, Border::zero);
        double a = 0.0;
        for (int i = 0; i < st.count; ++i) a += st.weight[i] * aff[st.offset[i]];
        const double gain = taps.weights[k] * a;
        if (gain == 0.0) continue;
        for (std::size_t c = 0; c < C; ++c) {
          double s = 0.0;
          const double* src = &vol[c * voxels];
          for (int i = 0; i < st.count; ++i) s += st.weight[i] * src[st.offset[i]];
          acc[c] += gain * s;
        }
      }
      for (std::size_t c = 0; c < C; ++c) out[c * voxels + v] = acc[c];
    }
  });
  return out;
}

DenseArray level_mean_reducer(std::size_t channels) {
  DenseArray w({channels, 3 * channels});
  for (std::size_t l = 0; l < 3; ++l)
    for (std::size_t c = 0; c < channels; ++c) w.at(c, l * channels + c) = 1.0 / 3.0;
  return w;
}

DenseArray block_mean_reducer(std::size_t channels, std::size_t blocks) {
  if (blocks == 0 || channels % blocks != 0)
    throw ShapeError("block_mean_reducer: " + std::to_string(channels) + " channels not divisible by " +
                     std::to_string(blocks));
  const std::size_t out_ch = channels / blocks;
  DenseArray w({out_ch, 3 * channels});
  const double share = 1.0 / static_cast<double>(3 * blocks);
  for (std::size_t l = 0; l < 3; ++l)
    for (std::size_t b = 0; b < blocks; ++b)
      for (std::size_t c = 0; c < out_ch; ++c) w.at(c, l * channels + b * out_ch + c) = share;
  return w;
}

DenseArray pointwise_conv(const DenseArray& vol, const DenseArray& weights) {
  require_rank(weights, 2, "pointwise_conv weights");
  const std::size_t C = vol.extent(0), O = weights.extent(0);
  if (weights.extent(1) != C)
    throw ShapeError("pointwise_conv: weights expect " + std::to_string(weights.extent(1)) +
                     " channels, volume has " + std::to_string(C));
  const std::size_t voxels = vol.size() / C;
  Shape s = vol.shape();
  s[0] = O;
  DenseArray out(s);
  for (std::size_t o = 0; o < O; ++o)
    for (std::size_t i = 0; i < C; ++i) {
      const double w = weights.at(o, i);
      if (w == 0.0) continue;
      double* dst = &out[o * voxels];
      const double* src = &vol[i * voxels];
      for (std::size_t v = 0; v < voxels; ++v) dst[v] += w * src[v];
    }
  return out;
}

DenseArray multilevel_refine(const DenseArray& vol, const PatternAffinity& affinity,
                             const RefineConfig& config) {
  require_rank(vol, 4, "multilevel_refine");
  const std::size_t C = vol.extent(0);
  require_rank(config.reducer, 2, "multilevel_refine reducer");
  if (config.reducer.extent(1) != 3 * C)
    throw ShapeError("multilevel_refine: reducer expects " + std::to_string(config.reducer.extent(1)) +
                     " channels, levels provide " + std::to_string(3 * C));
  std::array<DenseArray, 3> levels;
  for (std::size_t l = 0; l < 3; ++l) {
    const DenseArray& input = (config.cascade && l > 0) ? levels[l - 1] : vol;
    levels[l] = affinity_deformable_sample(input, config.taps[l], affinity, l + 1);
  }
  std::vector<double> cat;
  cat.reserve(3 * vol.size());
  for (const auto& lv : levels) cat.insert(cat.end(), lv.storage().begin(), lv.storage().end());
  Shape s = vol.shape();
  s[0] = 3 * C;
  return pointwise_conv(DenseArray(s, std::move(cat)), config.reducer);
}

}  // namespace hisop
