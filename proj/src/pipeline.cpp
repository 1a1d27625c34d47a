#include "hisop/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <set>

#include <Eigen/Geometry>

#include "hisop/alignment.hpp"
#include "hisop/errors.hpp"
#include "hisop/keyvalue.hpp"
#include "hisop/parallel.hpp"
#include "hisop/temporal.hpp"

namespace hisop {

namespace fs = std::filesystem;

void AblationFlags::set(std::string_view name, bool value) {
  if (name == "gcl") gcl = value;
  else if (name == "tvc") tvc = value;
  else if (name == "cpa") cpa = value;
  else if (name == "adr") adr = value;
  else if (name == "dhbt") dhbt = value;
  else if (name == "geometry") geometry = value;
  else if (name == "pose_shuffle") pose_shuffle = value;
  else if (name == "cost_volume") cost_volume = value;
  else throw ConfigError("unknown ablation flag '" + std::string(name) + "'");
}

const std::vector<std::string>& AblationFlags::names() {
  static const std::vector<std::string> n{"gcl", "tvc", "cpa", "adr", "dhbt", "geometry", "pose_shuffle", "cost_volume"};
  return n;
}

Intrinsics CameraConfig::intrinsics() const {
  return {fx, fy, cx.value_or((static_cast<double>(width) - 1.0) / 2.0),
          cy.value_or((static_cast<double>(height) - 1.0) / 2.0)};
}

void RunConfig::validate() const {
  if (camera.height == 0 || camera.width == 0) throw ConfigError("camera: height and width must be positive");
  if (!(camera.fx > 0.0) || !(camera.fy > 0.0)) throw ConfigError("camera: focal lengths must be positive");
  const std::size_t frames = poses.empty() ? trajectory.frames : poses.size();
  if (frames == 0) throw ConfigError("trajectory: frames must be at least 1");
  if (!(d_min > 0.0) || !(d_max > d_min)) throw ConfigError("depth: need 0 < d_min < d_max");
  if (depth_count < 2) throw ConfigError("depth: count must be at least 2");
  if (!(depth_sigma > 0.0)) throw ConfigError("depth: sigma must be positive");
  if (depth_noise < 0.0) throw ConfigError("depth: noise must be nonnegative");
  try {
    grid.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
  if (heatmap_group >= 3) throw ConfigError("run: heatmap_group must be 0, 1 or 2");
  if (heatmap_slice && *heatmap_slice >= depth_count) throw ConfigError("run: heatmap_slice exceeds the depth count");
  if (threads == 0) throw ConfigError("run: threads must be positive");
  if (trajectory.jitter_translation < 0.0 || trajectory.jitter_rotation < 0.0)
    throw ConfigError("trajectory: jitter must be nonnegative");
  if (ablate.tvc && frames < 2) throw ConfigError("ablate: tvc=on needs at least 2 frames");
  if (ablate.cost_volume && !ablate.tvc) throw ConfigError("ablate: cost_volume=on requires tvc=on");
  if (ablate.pose_shuffle && (!ablate.tvc || frames < 3))
    throw ConfigError("ablate: pose_shuffle=on requires tvc=on and at least 2 historical frames");
  if (!ablate.dhbt && !ablate.geometry)
    throw ConfigError("ablate: dhbt=off lifts through the geometric branch and requires geometry=on");
}

std::vector<RigidPose> RunConfig::frame_poses() const {
  if (!poses.empty()) return poses;
  const Vec3 forward(std::cos(trajectory.yaw), std::sin(trajectory.yaw), 0.0);
  const Vec3 left(-std::sin(trajectory.yaw), std::cos(trajectory.yaw), 0.0);
  std::vector<RigidPose> out;
  for (std::size_t i = 0; i < trajectory.frames; ++i) {
    const double s = static_cast<double>(i);
    const Vec3 center = trajectory.start - s * trajectory.step_back * forward + s * trajectory.lateral * left;
    out.push_back(look_pose(center, trajectory.yaw, trajectory.pitch));
  }
  return out;
}

namespace {

using KeySet = std::set<std::string, std::less<>>;

void check_keys(const KeyValueSection& s, const KeySet& allowed, const std::string& source) {
  for (const auto& [k, v] : s.entries)
    if (!allowed.contains(k)) throw ConfigError(source + ": unknown key '" + k + "' in [" + s.name + "]");
}

std::size_t parse_count(std::string_view text, std::string_view what) {
  const long long v = parse_integer(text, what);
  if (v < 0) throw ConfigError(std::string(what) + " must be nonnegative");
  return static_cast<std::size_t>(v);
}

Vec3 parse_vec3(std::string_view text, std::string_view what) {
  const auto v = parse_reals(text, 3, what);
  return {v[0], v[1], v[2]};
}

std::string resolve(const std::string& base_dir, const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base_dir) / path).lexically_normal().string();
}

}  // namespace

RunConfig RunConfig::parse(std::string_view text, const std::string& base_dir, const std::string& source) {
  const KeyValueDocument doc = KeyValueDocument::parse(text, source);
  RunConfig c;
  for (const auto& s : doc.sections) {
    if (s.name.empty()) {
      if (!s.entries.empty()) throw ConfigError(source + ": entries must follow a [section] header");
    } else if (s.name == "run") {
      check_keys(s, {"id", "seed", "out", "threads", "timing", "heatmap_group", "heatmap_slice"}, source);
      if (auto v = s.get("id")) c.id = *v;
      if (auto v = s.get("seed")) c.seed = parse_count(*v, "run.seed");
      if (auto v = s.get("out")) c.out_dir = resolve(base_dir, *v);
      if (auto v = s.get("threads")) c.threads = parse_count(*v, "run.threads");
      if (auto v = s.get("timing")) c.timing = parse_switch(*v, "run.timing");
      if (auto v = s.get("heatmap_group")) c.heatmap_group = parse_count(*v, "run.heatmap_group");
      if (auto v = s.get("heatmap_slice")) c.heatmap_slice = parse_count(*v, "run.heatmap_slice");
    } else if (s.name == "scene") {
      check_keys(s, {"path", "texture_frequency", "min_boxes", "max_boxes", "ground"}, source);
      if (auto v = s.get("path")) c.scene_path = resolve(base_dir, *v);
      if (auto v = s.get("texture_frequency")) c.texture_frequency = parse_real(*v, "scene.texture_frequency");
      if (auto v = s.get("min_boxes")) c.scene_options.min_boxes = parse_count(*v, "scene.min_boxes");
      if (auto v = s.get("max_boxes")) c.scene_options.max_boxes = parse_count(*v, "scene.max_boxes");
      if (auto v = s.get("ground")) c.scene_options.ground = parse_switch(*v, "scene.ground");
      if (c.scene_options.max_boxes < c.scene_options.min_boxes)
        throw ConfigError(source + ": scene.max_boxes is below scene.min_boxes");
    } else if (s.name == "camera") {
      check_keys(s, {"height", "width", "fx", "fy", "cx", "cy"}, source);
      if (auto v = s.get("height")) c.camera.height = parse_count(*v, "camera.height");
      if (auto v = s.get("width")) c.camera.width = parse_count(*v, "camera.width");
      if (auto v = s.get("fx")) c.camera.fx = parse_real(*v, "camera.fx");
      if (auto v = s.get("fy")) c.camera.fy = parse_real(*v, "camera.fy");
      if (auto v = s.get("cx")) c.camera.cx = parse_real(*v, "camera.cx");
      if (auto v = s.get("cy")) c.camera.cy = parse_real(*v, "camera.cy");
    } else if (s.name == "trajectory") {
      check_keys(s, {"frames", "start", "yaw", "pitch", "step_back", "lateral", "jitter_translation", "jitter_rotation"},
                 source);
      if (auto v = s.get("frames")) c.trajectory.frames = parse_count(*v, "trajectory.frames");
      if (auto v = s.get("start")) c.trajectory.start = parse_vec3(*v, "trajectory.start");
      if (auto v = s.get("yaw")) c.trajectory.yaw = parse_real(*v, "trajectory.yaw");
      if (auto v = s.get("pitch")) c.trajectory.pitch = parse_real(*v, "trajectory.pitch");
      if (auto v = s.get("step_back")) c.trajectory.step_back = parse_real(*v, "trajectory.step_back");
      if (auto v = s.get("lateral")) c.trajectory.lateral = parse_real(*v, "trajectory.lateral");
      if (auto v = s.get("jitter_translation"))
        c.trajectory.jitter_translation = parse_real(*v, "trajectory.jitter_translation");
      if (auto v = s.get("jitter_rotation")) c.trajectory.jitter_rotation = parse_real(*v, "trajectory.jitter_rotation");
    } else if (s.name == "frame") {
      check_keys(s, {"rotation", "translation"}, source);
      RigidPose p;
      const auto r = parse_reals(s.require("rotation"), 9, "frame.rotation");
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) p.rotation(i, j) = r[3 * i + j];
      p.translation = parse_vec3(s.require("translation"), "frame.translation");
      try {
        p.validate(1e-6);
      } catch (const ArgumentError& e) {
        throw ConfigError(source + ": frame " + std::to_string(c.poses.size()) + ": " + e.what());
      }
      c.poses.push_back(p);
    } else if (s.name == "depth") {
      check_keys(s, {"d_min", "d_max", "count", "spacing", "sigma", "noise"}, source);
      if (auto v = s.get("d_min")) c.d_min = parse_real(*v, "depth.d_min");
      if (auto v = s.get("d_max")) c.d_max = parse_real(*v, "depth.d_max");
      if (auto v = s.get("count")) c.depth_count = parse_count(*v, "depth.count");
      if (auto v = s.get("sigma")) c.depth_sigma = parse_real(*v, "depth.sigma");
      if (auto v = s.get("noise")) c.depth_noise = parse_real(*v, "depth.noise");
      if (auto v = s.get("spacing")) {
        if (*v == "linear") c.spacing = DepthSpacing::linear;
        else if (*v == "inverse") c.spacing = DepthSpacing::inverse;
        else throw ConfigError(source + ": depth.spacing must be linear or inverse");
      }
    } else if (s.name == "grid") {
      check_keys(s, {"nx", "ny", "nz", "voxel_size", "origin"}, source);
      if (auto v = s.get("nx")) c.grid.nx = parse_count(*v, "grid.nx");
      if (auto v = s.get("ny")) c.grid.ny = parse_count(*v, "grid.ny");
      if (auto v = s.get("nz")) c.grid.nz = parse_count(*v, "grid.nz");
      if (auto v = s.get("voxel_size")) c.grid.voxel_size = parse_real(*v, "grid.voxel_size");
      if (auto v = s.get("origin")) c.grid.origin = parse_vec3(*v, "grid.origin");
    } else if (s.name == "model") {
      check_keys(s, {"kernels", "blur_beta", "random_scale", "tap_amplitude", "gate", "threshold", "cascade", "params"},
                 source);
      if (auto v = s.get("kernels")) c.model.kernels = parse_kernel_preset(*v);
      if (auto v = s.get("blur_beta")) c.model.blur_beta = parse_real(*v, "model.blur_beta");
      if (auto v = s.get("random_scale")) c.model.random_scale = parse_real(*v, "model.random_scale");
      if (auto v = s.get("tap_amplitude")) c.model.tap_amplitude = parse_real(*v, "model.tap_amplitude");
      if (auto v = s.get("gate")) c.model.gate = parse_real(*v, "model.gate");
      if (auto v = s.get("threshold")) c.model.threshold = parse_real(*v, "model.threshold");
      if (auto v = s.get("cascade")) c.model.cascade = parse_switch(*v, "model.cascade");
      if (auto v = s.get("params")) c.params_path = resolve(base_dir, *v);
    } else if (s.name == "ablate") {
      for (const auto& [k, v] : s.entries) c.ablate.set(k, parse_switch(v, "ablate." + k));
    } else {
      throw ConfigError(source + ": unknown section [" + s.name + "]");
    }
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  const KeyValueDocument doc = KeyValueDocument::load(path);
  const fs::path parent = fs::path(path).parent_path();
  return parse(doc.serialize(), parent.empty() ? "." : parent.string(), path);
}

MetricsRow RunReport::row(bool timing) const {
  return {id, metrics.iou, metrics.miou, metrics.per_class_iou, loss.depth, loss.ce, timing ? wall_ms : 0.0};
}

std::vector<std::uint8_t> frustum_ignore_mask(const UnifiedGridSpec& grid, const Intrinsics& K,
                                              const RigidPose& pose, std::size_t height, std::size_t width,
                                              double d_min, double d_max) {
  std::vector<std::uint8_t> ignore(grid.cells(), 1);
  const double umax = static_cast<double>(width) - 0.5, vmax = static_cast<double>(height) - 0.5;
  for (std::size_t x = 0; x < grid.nx; ++x)
    for (std::size_t y = 0; y < grid.ny; ++y)
      for (std::size_t z = 0; z < grid.nz; ++z) {
        const Vec3 cam = pose.apply(grid.cell_center(x, y, z));
        if (cam.z() < d_min || cam.z() > d_max) continue;
        const Pixel p = project(K, cam);
        if (p.u >= -0.5 && p.u < umax && p.v >= -0.5 && p.v < vmax) ignore[(x * grid.ny + y) * grid.nz + z] = 0;
      }
  return ignore;
}

namespace {

using Clock = std::chrono::steady_clock;

class StageClock {
 public:
  explicit StageClock(std::vector<StageTiming>& out) : out_(out), last_(Clock::now()) {}
  void lap(const char* stage) {
    const auto now = Clock::now();
    out_.push_back({stage, std::chrono::duration<double, std::milli>(now - last_).count()});
    last_ = now;
  }

 private:
  std::vector<StageTiming>& out_;
  Clock::time_point last_;
};

class ThreadScope {
 public:
  explicit ThreadScope(std::size_t n) : saved_(thread_count()) { set_thread_count(n); }
  ~ThreadScope() { set_thread_count(saved_); }
  ThreadScope(const ThreadScope&) = delete;
  ThreadScope& operator=(const ThreadScope&) = delete;

 private:
  std::size_t saved_;
};

DenseArray ones_affinity(std::size_t D, std::size_t H, std::size_t W) { return DenseArray({3, D, H, W}, 1.0); }

/// mean over depth of a [C,D,H,W] volume, re-lifted with a [D,H,W] distribution.
DenseArray relift_depth_mean(const DenseArray& vol, const DenseArray& distribution) {
  const std::size_t C = vol.extent(0), D = vol.extent(1), plane = vol.extent(2) * vol.extent(3);
  DenseArray out(vol.shape());
  std::vector<double> mean(plane);
  for (std::size_t c = 0; c < C; ++c) {
    std::fill(mean.begin(), mean.end(), 0.0);
    for (std::size_t d = 0; d < D; ++d)
      for (std::size_t i = 0; i < plane; ++i) mean[i] += vol[(c * D + d) * plane + i];
    for (std::size_t d = 0; d < D; ++d)
      for (std::size_t i = 0; i < plane; ++i)
        out[(c * D + d) * plane + i] = mean[i] / static_cast<double>(D) * distribution[d * plane + i];
  }
  return out;
}

DenseArray concat_channels(const DenseArray& a, const DenseArray& b) {
  Shape s = a.shape();
  s[0] += b.extent(0);
  std::vector<double> data(a.storage());
  data.insert(data.end(), b.storage().begin(), b.storage().end());
  return DenseArray(std::move(s), std::move(data));
}

}  // namespace

ForwardResult run_forward(const RunConfig& config) {
  config.validate();
  ThreadScope threads(config.threads);
  const auto started = Clock::now();
  ForwardResult r;
  RunReport& report = r.report;
  report.id = config.id;
  StageClock clock(report.timings);

  // Scene and frames.
  if (config.scene_path.empty()) {
    r.scene = random_scene_spec(config.seed, config.grid, config.scene_options);
    r.scene.texture_frequency = config.texture_frequency;
  } else {
    r.scene = SceneSpec::load(config.scene_path);
  }
  const Scene scene(r.scene);
  report.warnings = scene.warnings();
  const Intrinsics K = config.camera.intrinsics();
  const std::vector<RigidPose> truth = config.frame_poses();
  const std::size_t F = truth.size(), H = config.camera.height, W = config.camera.width;
  for (const RigidPose& pose : truth) r.frames.push_back(render_frame(scene, K, pose, H, W));

  std::vector<RigidPose> believed = truth;
  if (config.ablate.pose_shuffle)
    for (std::size_t j = 0; j + 1 < F; ++j) believed[1 + j] = truth[1 + (j + 1) % (F - 1)];
  if (config.trajectory.jitter_translation > 0.0 || config.trajectory.jitter_rotation > 0.0) {
    std::mt19937_64 rng(config.seed ^ 0x6a177e5ULL);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t i = 1; i < F; ++i) {
      const Vec3 axis(gauss(rng), gauss(rng), gauss(rng));
      const Vec3 shift(gauss(rng), gauss(rng), gauss(rng));
      const Vec3 rot = config.trajectory.jitter_rotation * axis;
      const Mat3 dr = rot.norm() > 0.0 ? Eigen::AngleAxisd(rot.norm(), rot.normalized()).toRotationMatrix()
                                       : Mat3::Identity();
      believed[i].rotation = dr * believed[i].rotation;
      believed[i].translation = dr * believed[i].translation + config.trajectory.jitter_translation * shift;
    }
  }
  std::vector<FrameObservation> obs;
  for (std::size_t i = 0; i < F; ++i)
    obs.push_back({r.frames[i].feature, K, believed[i], -static_cast<int>(i)});
  clock.lap("render");

  // Parameters.
  ParamOptions options = config.model;
  options.texture_channels = r.scene.texture_channels;
  options.num_classes = r.scene.num_classes;
  options.seed = config.seed;
  r.params = config.params_path.empty() ? default_params(options) : ModelParams::from_records(read_params(config.params_path));
  const std::size_t C = r.scene.channels();
  if (r.params.channels() != C)
    throw ConfigError("model.params: parameters expect " + std::to_string(r.params.channels()) +
                      " channels, the scene renders " + std::to_string(C));

  // Geometric branch.
  r.hypotheses = build_hypotheses(config.d_min, config.d_max, config.depth_count, config.spacing);
  const std::size_t D = r.hypotheses.size();
  r.depth_logits = depth_logits_oracle(r.frames[0].depth, r.hypotheses,
                                       {config.depth_sigma, config.depth_noise, config.seed ^ 0x9e3779b97f4a7c15ULL});
  const DenseArray& fc = r.frames[0].feature;
  r.lift = config.ablate.gcl ? lift_to_voxel_volume(fc, r.depth_logits, depth_confidence(r.depth_logits))
                             : lift_plain(fc, r.depth_logits);
  const RigidPose& cur_pose = believed[0];
  if (config.ablate.geometry) {
    PoolResult pooled = voxel_pool(r.lift.volume, r.hypotheses, K, cur_pose, config.grid);
    r.geometric = std::move(pooled.grid);
    report.dropped = pooled.dropped;
    report.dropped_mass = std::move(pooled.dropped_mass);
  } else {
    r.geometric = DenseArray({C, config.grid.nx, config.grid.ny, config.grid.nz});
    report.dropped_mass.assign(C, 0.0);
  }
  clock.lap("lift");

  // Temporal branch.
  DenseArray composed;
  if (config.ablate.tvc) {
    const auto route = config.ablate.geometry ? HistoricalRoute::warp : HistoricalRoute::stack;
    TemporalVolume tv = build_temporal_volume(obs, r.hypotheses, route);
    if (config.ablate.cost_volume)
      tv = concat_blocks(tv.current_block(), build_cost_volume(obs, r.hypotheses, MatchMode::hadamard));
    clock.lap("temporal");

    r.affinity = config.ablate.cpa
                     ? pattern_affinity(multigroup_context(tv.current_block(), r.params.kernels),
                                        multigroup_context(tv.historical_block(), r.params.kernels))
                     : PatternAffinity{ones_affinity(D, H, W)};
    RefineConfig refine = r.params.refine;
    if (!config.ablate.adr) refine.taps = {identity_taps(), identity_taps(), identity_taps()};
    const DenseArray refined = multilevel_refine(tv.values, *r.affinity, refine);
    clock.lap("align");

    if (config.ablate.dhbt) {
      PoolResult pooled = voxel_pool(refined, r.hypotheses, K, cur_pose, config.grid);
      report.dropped += pooled.dropped;
      r.temporal = std::move(pooled.grid);
      composed = zero_gated_compose(*r.temporal, r.geometric, r.params.gate);
    } else {
      // Concatenate with the lifted volume and reduce by [I | diag(gate)].
      const DenseArray stacked = concat_channels(r.lift.volume, relift_depth_mean(refined, r.lift.distribution));
      DenseArray reducer({C, 2 * C});
      for (std::size_t c = 0; c < C; ++c) {
        reducer.at(c, c) = 1.0;
        reducer.at(c, C + c) = r.params.gate[c];
      }
      PoolResult pooled = voxel_pool(pointwise_conv(stacked, reducer), r.hypotheses, K, cur_pose, config.grid);
      report.dropped = pooled.dropped;
      composed = std::move(pooled.grid);
    }
  } else {
    composed = r.geometric;
  }

  // Density normalization: every cell holds the mean of the samples it received.
  {
    const auto idx = pool_indices(H, W, r.hypotheses, K, cur_pose, config.grid);
    std::vector<double> count(config.grid.cells(), 0.0);
    for (const std::int64_t i : idx)
      if (i >= 0) count[static_cast<std::size_t>(i)] += 1.0;
    const std::size_t cells = config.grid.cells();
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t v = 0; v < cells; ++v)
        if (count[v] > 0.0) composed[c * cells + v] /= count[v];
  }
  r.composed = std::move(composed);
  clock.lap("compose");

  r.head = semantic_head(r.composed, r.params.head_weights, r.params.head_bias);
  r.ground_truth = voxelize_ground_truth(scene, config.grid);
  r.ignore = frustum_ignore_mask(config.grid, K, truth[0], H, W, config.d_min, config.d_max);
  report.metrics = evaluate(r.head.labels, r.ground_truth, r.ignore, r.scene.num_classes);

  std::vector<int> bins(H * W, -1);
  const double half_step = (r.hypotheses[1] - r.hypotheses[0]) / 2.0;
  for (std::size_t i = 0; i < H * W; ++i) {
    const double z = r.frames[0].depth[i];
    if (z > 0.0 && z >= config.d_min - half_step && z <= config.d_max + half_step)
      bins[i] = static_cast<int>(r.hypotheses.nearest(z));
  }
  report.loss = total_loss(r.head.logits, r.ground_truth, r.ignore, r.lift.distribution, bins, LossWeights{});
  clock.lap("head");
  report.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - started).count();
  return r;
}

RunReport run_pipeline(const RunConfig& config) {
  ForwardResult r = run_forward(config);
  RunReport report = std::move(r.report);
  std::error_code ec;
  fs::create_directories(config.out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + config.out_dir + "': " + ec.message());
  const fs::path out(config.out_dir);
  auto artifact = [&](const char* name) {
    report.artifacts.push_back((out / name).string());
    return report.artifacts.back();
  };
  export_voxel_grid(r.head.labels, artifact("prediction.hisopvox"));
  export_voxel_grid(r.ground_truth, artifact("ground_truth.hisopvox"));
  write_params(r.params.to_records(), artifact("params.hisoppar"));
  if (r.affinity)
    export_heatmap(*r.affinity, config.heatmap_group, config.heatmap_slice.value_or(r.hypotheses.size() / 2),
                   artifact("affinity.pgm"));
  report_metrics({report.row(config.timing)}, artifact("metrics.csv"));

  std::string timings = "stage,ms\n";
  char buf[64];
  for (const auto& t : report.timings) {
    std::snprintf(buf, sizeof buf, "%.3f", t.ms);
    timings += t.stage + "," + buf + "\n";
  }
  std::snprintf(buf, sizeof buf, "%.3f", report.wall_ms);
  timings += std::string("total,") + buf + "\n";
  write_text(artifact("timings.csv"), timings);
  return report;
}

BenchResult run_bench(const RunConfig& base, const std::vector<std::uint64_t>& seeds, bool write) {
  BenchResult result;
  std::vector<MetricsRow> rows;
  result.margins_csv = "seed,aligned_miou,shuffled_miou,unaligned_miou,margin_shuffled,margin_unaligned\n";
  auto variant = [&](std::uint64_t seed, const char* name, auto&& tweak) {
    RunConfig c = base;
    c.seed = seed;
    c.id = "seed" + std::to_string(seed) + "_" + name;
    tweak(c.ablate);
    RunReport rep = run_forward(c).report;
    rows.push_back(rep.row(true));
    result.runs.push_back(rep);
    return rep.metrics.miou;
  };
  for (const std::uint64_t seed : seeds) {
    BenchSeed s{seed};
    s.aligned = variant(seed, "aligned", [](AblationFlags&) {});
    s.shuffled = variant(seed, "shuffled", [](AblationFlags& f) { f.pose_shuffle = true; });
    s.unaligned = variant(seed, "unaligned", [](AblationFlags& f) {
      f.cpa = false;
      f.adr = false;
    });
    result.beats_shuffled += s.aligned > s.shuffled;
    result.beats_unaligned += s.aligned > s.unaligned;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%llu,%.6f,%.6f,%.6f,%.6f,%.6f\n", static_cast<unsigned long long>(seed),
                  s.aligned, s.shuffled, s.unaligned, s.aligned - s.shuffled, s.aligned - s.unaligned);
    result.margins_csv += buf;
    result.seeds.push_back(s);
  }
  if (write) {
    std::error_code ec;
    fs::create_directories(base.out_dir, ec);
    if (ec) throw IoError("cannot create output directory '" + base.out_dir + "': " + ec.message());
    report_metrics(rows, (fs::path(base.out_dir) / "bench.csv").string());
    write_text((fs::path(base.out_dir) / "margins.csv").string(), result.margins_csv);
  }
  return result;
}

}  // namespace hisop
