#pragma once

// End-to-end forward pass on a synthetic scene: render the frames, lift the
// current view, build and align the temporal volume, compose both branches on
// the unified grid, predict labels and score them against the oracle.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hisop/compose.hpp"
#include "hisop/formats.hpp"
#include "hisop/geometry.hpp"
#include "hisop/lifting.hpp"
#include "hisop/params.hpp"
#include "hisop/scenes.hpp"

namespace hisop {

/// Component switches. Everything on except the two diagnostics reproduces the
/// full model; turning gcl, tvc, cpa, adr and dhbt off leaves the geometric
/// branch alone.
struct AblationFlags {
  bool gcl = true;           // confidence-gated lifting (off: plain lifting)
  bool tvc = true;           // temporal volume branch
  bool cpa = true;           // pattern affinity (off: affinity 1 everywhere)
  bool adr = true;           // deformable taps (off: identity taps)
  bool dhbt = true;          // pool the temporal volume on its own (off: concat fallback)
  bool geometry = true;      // off: no lifted volume, historical maps stacked unwarped
  bool pose_shuffle = false; // cyclically permute the historical poses
  bool cost_volume = false;  // replace the historical block by a matching cost volume

  /// Throws ConfigError for unknown names.
  void set(std::string_view name, bool value);
  static const std::vector<std::string>& names();
  friend bool operator==(const AblationFlags&, const AblationFlags&) = default;
};

struct CameraConfig {
  std::size_t height = 32;
  std::size_t width = 48;
  double fx = 26.0;
  double fy = 26.0;
  std::optional<double> cx, cy;  // default: image center

  Intrinsics intrinsics() const;
};

/// Frame i (0 is current) sits i * step_back meters behind the start and
/// i * lateral meters to its left, all sharing one heading.
struct TrajectoryConfig {
  std::size_t frames = 4;
  Vec3 start = Vec3(0.0, 0.0, 1.6);
  double yaw = 0.0;
  double pitch = 0.2;  // radians, positive looks down
  double step_back = 0.5;
  double lateral = 0.4;
  // Seeded jitter applied to the historical poses handed to the pipeline
  // (rendering always uses the true poses).
  double jitter_translation = 0.0;  // meters, per axis
  double jitter_rotation = 0.0;     // radians, per axis
};

struct RunConfig {
  std::string id = "run";
  std::uint64_t seed = 1;
  std::string scene_path;  // empty: seeded random scene
  RandomSceneOptions scene_options;
  double texture_frequency = 1.0;
  CameraConfig camera;
  TrajectoryConfig trajectory;
  std::vector<RigidPose> poses;  // explicit world->camera poses, current first
  double d_min = 1.5;
  double d_max = 13.5;
  std::size_t depth_count = 32;
  DepthSpacing spacing = DepthSpacing::linear;
  double depth_sigma = 0.3;
  double depth_noise = 1.5;
  UnifiedGridSpec grid{32, 32, 8, 0.4, Vec3(0.0, -6.4, 0.0)};
  ParamOptions model;
  std::string params_path;  // HISOPPAR file overriding the generated params
  AblationFlags ablate;
  std::size_t heatmap_group = 0;
  std::optional<std::size_t> heatmap_slice;  // default: middle hypothesis
  std::string out_dir = "hisop_out";
  std::size_t threads = 1;
  bool timing = false;  // write measured wall time into the CSV

  /// Throws ConfigError naming the offending key or flag.
  void validate() const;
  std::vector<RigidPose> frame_poses() const;

  /// Sections: [run] [scene] [camera] [trajectory] [frame]* [depth] [grid]
  /// [model] [ablate]. Relative paths resolve against `base_dir`.
  static RunConfig parse(std::string_view text, const std::string& base_dir = ".",
                         const std::string& source = "<config>");
  static RunConfig load(const std::string& path);
};

struct StageTiming {
  std::string stage;
  double ms = 0.0;
};

struct RunReport {
  std::string id;
  Metrics metrics;
  LossReport loss;
  std::size_t dropped = 0;          // samples falling outside the grid
  std::vector<double> dropped_mass; // per channel, lifted volume
  std::vector<StageTiming> timings;
  double wall_ms = 0.0;
  std::vector<std::string> warnings;
  std::vector<std::string> artifacts;

  /// CSV row; wall time is reported only when `timing` is set so that reports
  /// stay byte-reproducible.
  MetricsRow row(bool timing) const;
};

/// Every intermediate of one forward pass.
struct ForwardResult {
  SceneSpec scene;
  std::vector<RenderedFrame> frames;
  DepthHypothesisSet hypotheses;
  DenseArray depth_logits;
  LiftResult lift;
  DenseArray geometric;  // [C, nx, ny, nz]
  std::optional<DenseArray> temporal;  // pooled temporal branch
  std::optional<PatternAffinity> affinity;
  DenseArray composed;   // density-normalized
  HeadOutput head;
  SemanticVoxelGrid ground_truth;
  std::vector<std::uint8_t> ignore;
  ModelParams params;
  RunReport report;
};

ForwardResult run_forward(const RunConfig& config);

/// Forward pass plus artifacts under config.out_dir.
RunReport run_pipeline(const RunConfig& config);

/// Voxels whose centers lie outside the current frustum or depth range.
std::vector<std::uint8_t> frustum_ignore_mask(const UnifiedGridSpec& grid, const Intrinsics& K,
                                              const RigidPose& pose, std::size_t height, std::size_t width,
                                              double d_min, double d_max);

struct BenchSeed {
  std::uint64_t seed = 0;
  double aligned = 0.0;
  double shuffled = 0.0;
  double unaligned = 0.0;  // pattern affinity and deformable taps off
};

struct BenchResult {
  std::vector<RunReport> runs;
  std::vector<BenchSeed> seeds;
  std::size_t beats_shuffled = 0;
  std::size_t beats_unaligned = 0;
  std::string margins_csv;
};

/// Runs the aligned, pose-shuffled and unaligned variants of `base` on each
/// seed. Writes bench.csv and margins.csv when `write` is set.
BenchResult run_bench(const RunConfig& base, const std::vector<std::uint64_t>& seeds, bool write);

}  // namespace hisop
