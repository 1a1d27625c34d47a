#include "hisop/params.hpp"

#include <map>

#include "hisop/errors.hpp"

namespace hisop {

KernelPreset parse_kernel_preset(std::string_view text) {
  if (text == "identity") return KernelPreset::identity;
  if (text == "blur") return KernelPreset::blur;
  if (text == "random") return KernelPreset::random;
  throw ConfigError("unknown kernel preset '" + std::string(text) + "' (identity, blur, random)");
}

std::string to_string(KernelPreset preset) {
  switch (preset) {
    case KernelPreset::identity: return "identity";
    case KernelPreset::blur: return "blur";
    case KernelPreset::random: return "random";
  }
  return "?";
}

void ModelParams::validate() const {
  const std::size_t C = channels();
  if (C == 0) throw ArgumentError("model params: empty gate");
  kernels.validate(C);
  for (const auto& t : refine.taps)
    if (!t.per_voxel) t.validate(0);
  require_rank(refine.reducer, 2, "model params reducer");
  if (refine.reducer.extent(0) != C || refine.reducer.extent(1) != 6 * C)
    throw ShapeError("model params: reducer must be [" + std::to_string(C) + ", " + std::to_string(6 * C) +
                     "], got " + to_string(refine.reducer.shape()));
  require_rank(head_weights, 2, "model params head");
  if (head_weights.extent(1) != C) throw ShapeError("model params: head weights do not match the channel count");
  if (head_bias.size() != head_weights.extent(0)) throw ShapeError("model params: head bias length mismatch");
}

ModelParams default_params(const ParamOptions& o) {
  const std::size_t C = o.texture_channels + o.num_classes;
  ModelParams p;
  switch (o.kernels) {
    case KernelPreset::identity: p.kernels = identity_context_kernels(C); break;
    case KernelPreset::blur: p.kernels = blur_context_kernels(C, o.blur_beta); break;
    case KernelPreset::random: p.kernels = random_context_kernels(C, o.seed ^ 0x6b65726eULL, o.random_scale); break;
  }
  for (std::size_t l = 0; l < 3; ++l) p.refine.taps[l] = window_taps(o.seed * 3 + l + 1, o.tap_amplitude);
  p.refine.reducer = block_mean_reducer(2 * C, 2);
  p.refine.cascade = o.cascade;
  p.gate.assign(C, o.gate);
  p.head_weights = DenseArray({o.num_classes + 1, C});
  for (std::size_t k = 1; k <= o.num_classes; ++k) p.head_weights.at(k, o.texture_channels + k - 1) = 1.0;
  p.head_bias.assign(o.num_classes + 1, 0.0);
  p.head_bias[0] = o.threshold;
  return p;
}

namespace {

DenseArray vector_array(const std::vector<double>& v) { return DenseArray({v.size()}, v); }

DenseArray taps_base(const TapSet& t) {
  DenseArray a({t.size(), 3});
  for (std::size_t k = 0; k < t.size(); ++k)
    for (std::size_t j = 0; j < 3; ++j) a.at(k, j) = t.base[k][j];
  return a;
}

}  // namespace

std::vector<NamedArray> ModelParams::to_records() const {
  std::vector<NamedArray> out;
  for (std::size_t g = 0; g < 3; ++g) {
    const auto& k = kernels.kernels[g];
    const std::string prefix = "context" + std::to_string(g + 1);
    out.push_back({prefix + ".weights", k.weights});
    out.push_back({prefix + ".dilation", DenseArray({1}, static_cast<double>(k.dilation))});
    if (k.bias) out.push_back({prefix + ".bias", vector_array(*k.bias)});
  }
  out.push_back({"context.norm", DenseArray({2}, {static_cast<double>(kernels.norm_groups), kernels.norm_eps})});
  for (std::size_t l = 0; l < 3; ++l) {
    const auto& t = refine.taps[l];
    const std::string prefix = "taps" + std::to_string(l + 1);
    out.push_back({prefix + ".base", taps_base(t)});
    out.push_back({prefix + ".weights", vector_array(t.weights)});
    const std::size_t voxels = t.offsets.size() / (3 * t.size());
    out.push_back({prefix + ".offsets", t.per_voxel ? DenseArray({voxels, t.size(), 3}, t.offsets)
                                                    : DenseArray({t.size(), 3}, t.offsets)});
  }
  out.push_back({"refine.reducer", refine.reducer});
  out.push_back({"refine.cascade", DenseArray({1}, refine.cascade ? 1.0 : 0.0)});
  out.push_back({"compose.gate", vector_array(gate)});
  out.push_back({"head.weights", head_weights});
  out.push_back({"head.bias", vector_array(head_bias)});
  return out;
}

ModelParams ModelParams::from_records(const std::vector<NamedArray>& records) {
  std::map<std::string, const DenseArray*> by_name;
  for (const auto& r : records) by_name[r.name] = &r.array;
  auto need = [&](const std::string& name) -> const DenseArray& {
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("HISOPPAR: missing record '" + name + "'");
    return *it->second;
  };
  ModelParams p;
  for (std::size_t g = 0; g < 3; ++g) {
    const std::string prefix = "context" + std::to_string(g + 1);
    auto& k = p.kernels.kernels[g];
    k.weights = need(prefix + ".weights");
    k.dilation = static_cast<std::size_t>(need(prefix + ".dilation")[0]);
    if (const auto it = by_name.find(prefix + ".bias"); it != by_name.end()) k.bias = it->second->storage();
  }
  const DenseArray& norm = need("context.norm");
  if (norm.size() != 2) throw FormatError("HISOPPAR: context.norm must hold 2 values");
  p.kernels.norm_groups = static_cast<std::size_t>(norm[0]);
  p.kernels.norm_eps = norm[1];
  for (std::size_t l = 0; l < 3; ++l) {
    const std::string prefix = "taps" + std::to_string(l + 1);
    auto& t = p.refine.taps[l];
    const DenseArray& base = need(prefix + ".base");
    if (base.rank() != 2 || base.extent(1) != 3) throw FormatError("HISOPPAR: " + prefix + ".base must be [K,3]");
    for (std::size_t k = 0; k < base.extent(0); ++k)
      t.base.push_back({static_cast<int>(base.at(k, 0)), static_cast<int>(base.at(k, 1)),
                        static_cast<int>(base.at(k, 2))});
    t.weights = need(prefix + ".weights").storage();
    const DenseArray& off = need(prefix + ".offsets");
    t.per_voxel = off.rank() == 3;
    t.offsets = off.storage();
  }
  p.refine.reducer = need("refine.reducer");
  p.refine.cascade = need("refine.cascade")[0] != 0.0;
  p.gate = need("compose.gate").storage();
  p.head_weights = need("head.weights");
  p.head_bias = need("head.bias").storage();
  p.validate();
  return p;
}

}  // namespace hisop
