#pragma once

// Fixed (never trained) parameters of the forward pipeline, with HISOPPAR
// round-tripping.

#include <cstdint>
#include <string>
#include <vector>

#include "hisop/alignment.hpp"
#include "hisop/formats.hpp"

namespace hisop {

enum class KernelPreset { identity, blur, random };

KernelPreset parse_kernel_preset(std::string_view text);
std::string to_string(KernelPreset preset);

struct ParamOptions {
  std::size_t texture_channels = 12;
  std::size_t num_classes = 4;
  KernelPreset kernels = KernelPreset::blur;
  double blur_beta = 0.25;
  double random_scale = 0.05;
  double tap_amplitude = 0.3;  // voxels
  double gate = 1.0;
  double threshold = 0.45;     // empty-class logit
  bool cascade = true;
  std::uint64_t seed = 0;
};

struct ModelParams {
  ContextKernels kernels;   // shared by the current and historical blocks
  RefineConfig refine;      // reduces the 2C temporal channels to C
  std::vector<double> gate; // per composed channel
  DenseArray head_weights;  // [N+1, C]
  std::vector<double> head_bias;

  std::size_t channels() const { return gate.size(); }
  void validate() const;

  std::vector<NamedArray> to_records() const;
  static ModelParams from_records(const std::vector<NamedArray>& records);
};

/// Class k (1..N) reads its embedding channel, the empty class a constant
/// threshold logit; texture channels do not reach the head.
ModelParams default_params(const ParamOptions& options);

}  // namespace hisop
