#include "hisop/scenes.hpp"

#include <algorithm>
#include <Eigen/Geometry>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "hisop/errors.hpp"
#include "hisop/keyvalue.hpp"
#include "hisop/parallel.hpp"

namespace hisop {

namespace {

constexpr std::uint64_t kTextureSeed = 0x5eedf00dULL;
constexpr double kRayEps = 1e-9;

Vec3 to_local(const Primitive& p, const Vec3& world) { return p.rotation.transpose() * (world - p.center); }

std::string vec_text(const Vec3& v) { return format_real(v.x()) + " " + format_real(v.y()) + " " + format_real(v.z()); }

Vec3 parse_vec(std::string_view text, std::string_view what) {
  const auto v = parse_reals(text, 3, what);
  return {v[0], v[1], v[2]};
}

}  // namespace

bool Primitive::contains(const Vec3& world) const {
  const Vec3 l = to_local(*this, world);
  const Vec3 half = extents / 2.0;
  return std::abs(l.x()) <= half.x() && std::abs(l.y()) <= half.y() && std::abs(l.z()) <= half.z();
}

void SceneSpec::validate() const {
  if (num_classes == 0) throw ArgumentError("scene: num_classes must be positive");
  if (!(texture_frequency > 0.0)) throw ArgumentError("scene: texture frequency must be positive");
  for (std::size_t i = 0; i < primitives.size(); ++i) {
    const auto& p = primitives[i];
    if (p.label < 1 || p.label > num_classes)
      throw ArgumentError("scene: primitive " + std::to_string(i) + " has label " + std::to_string(p.label) +
                          " outside [1, " + std::to_string(num_classes) + "]");
    const bool plane = p.shape == PrimitiveShape::plane;
    if (!(p.extents.x() > 0.0) || !(p.extents.y() > 0.0) || (plane ? p.extents.z() < 0.0 : !(p.extents.z() > 0.0)))
      throw ArgumentError("scene: primitive " + std::to_string(i) + " has non-positive extents");
    RigidPose{p.rotation, Vec3::Zero()}.validate(1e-6);
  }
}

std::string SceneSpec::serialize() const {
  KeyValueDocument doc;
  auto& head = doc.section("");
  head.set("seed", std::to_string(seed));
  head.set("num_classes", std::to_string(num_classes));
  head.set("texture_channels", std::to_string(texture_channels));
  head.set("texture_frequency", format_real(texture_frequency));
  head.set("embedding_amplitude", format_real(embedding_amplitude));
  head.set("bounds_min", vec_text(bounds_min));
  head.set("bounds_max", vec_text(bounds_max));
  for (const auto& p : primitives) {
    KeyValueSection s{"primitive", {}};
    s.set("shape", p.shape == PrimitiveShape::box ? "box" : "plane");
    s.set("class", std::to_string(p.label));
    s.set("center", vec_text(p.center));
    s.set("extents", vec_text(p.extents));
    std::string rot;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) rot += (rot.empty() ? "" : " ") + format_real(p.rotation(r, c));
    s.set("rotation", rot);
    doc.sections.push_back(std::move(s));
  }
  return doc.serialize();
}

SceneSpec SceneSpec::parse(std::string_view text, const std::string& source) {
  const KeyValueDocument doc = KeyValueDocument::parse(text, source);
  SceneSpec spec;
  auto check_keys = [&source](const KeyValueSection& sec, std::initializer_list<std::string_view> allowed) {
    for (const auto& [k, v] : sec.entries)
      if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
        throw FormatError(source + ": unknown key '" + k + "'" + (sec.name.empty() ? "" : " in [" + sec.name + "]"));
  };
  for (const auto& sec : doc.sections)
    if (!sec.name.empty() && sec.name != "primitive")
      throw FormatError(source + ": unknown section [" + sec.name + "]");
  if (const auto* head = doc.find("")) {
    check_keys(*head, {"seed", "num_classes", "texture_channels", "texture_frequency", "embedding_amplitude",
                       "bounds_min", "bounds_max"});
    if (auto v = head->get("seed")) spec.seed = static_cast<std::uint64_t>(parse_integer(*v, "seed"));
    if (auto v = head->get("num_classes")) spec.num_classes = static_cast<std::size_t>(parse_integer(*v, "num_classes"));
    if (auto v = head->get("texture_channels"))
      spec.texture_channels = static_cast<std::size_t>(parse_integer(*v, "texture_channels"));
    if (auto v = head->get("texture_frequency")) spec.texture_frequency = parse_real(*v, "texture_frequency");
    if (auto v = head->get("embedding_amplitude")) spec.embedding_amplitude = parse_real(*v, "embedding_amplitude");
    if (auto v = head->get("bounds_min")) spec.bounds_min = parse_vec(*v, "bounds_min");
    if (auto v = head->get("bounds_max")) spec.bounds_max = parse_vec(*v, "bounds_max");
  }
  for (const auto* s : doc.all("primitive")) {
    Primitive p;
    check_keys(*s, {"shape", "class", "center", "extents", "rotation", "yaw"});
    const std::string& shape = s->require("shape");
    if (shape == "box") p.shape = PrimitiveShape::box;
    else if (shape == "plane") p.shape = PrimitiveShape::plane;
    else throw FormatError(source + ": unknown primitive shape '" + shape + "'");
    p.label = static_cast<std::uint16_t>(parse_integer(s->require("class"), "class"));
    p.center = parse_vec(s->require("center"), "center");
    p.extents = parse_vec(s->require("extents"), "extents");
    if (auto r = s->get("rotation")) {
      const auto v = parse_reals(*r, 9, "rotation");
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) p.rotation(i, j) = v[3 * i + j];
    } else if (auto yaw = s->get("yaw")) {
      p.rotation = Eigen::AngleAxisd(parse_real(*yaw, "yaw"), Vec3::UnitZ()).toRotationMatrix();
    }
    spec.primitives.push_back(p);
  }
  spec.validate();
  return spec;
}

SceneSpec SceneSpec::load(const std::string& path) {
  const KeyValueDocument doc = KeyValueDocument::load(path);
  return parse(doc.serialize(), path);
}

Scene::Scene(SceneSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  std::mt19937_64 rng(kTextureSeed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t c = 0; c < spec_.texture_channels; ++c)
    for (int m = 0; m < 3; ++m) {
      Vec3 dir(gauss(rng), gauss(rng), gauss(rng));
      dir.normalize();
      const double freq = spec_.texture_frequency * (0.6 + 0.8 * uni(rng));
      const double phase = 2.0 * std::numbers::pi * uni(rng);
      waves_.push_back({dir, freq, phase});
    }

  // Axis-aligned bounding boxes for the overlap report.
  std::vector<std::pair<Vec3, Vec3>> boxes;
  for (const auto& p : spec_.primitives) {
    const Vec3 half = p.rotation.cwiseAbs() * (p.extents / 2.0);
    boxes.emplace_back(p.center - half, p.center + half);
  }
  for (std::size_t i = 0; i < boxes.size(); ++i)
    for (std::size_t j = i + 1; j < boxes.size(); ++j) {
      const bool overlap = (boxes[i].first.array() < boxes[j].second.array()).all() &&
                           (boxes[j].first.array() < boxes[i].second.array()).all();
      if (overlap)
        warnings_.push_back("primitives " + std::to_string(i) + " and " + std::to_string(j) + " overlap");
    }
}

Scene build_scene(const SceneSpec& spec) { return Scene(spec); }

std::optional<RayHit> Scene::cast(const Vec3& origin, const Vec3& dir) const {
  std::optional<RayHit> best;
  for (std::size_t i = 0; i < spec_.primitives.size(); ++i) {
    const Primitive& p = spec_.primitives[i];
    const Vec3 o = to_local(p, origin);
    const Vec3 d = p.rotation.transpose() * dir;
    const Vec3 half = p.extents / 2.0;
    double t = std::numeric_limits<double>::infinity();
    if (p.shape == PrimitiveShape::plane) {
      if (std::abs(d.z()) < 1e-15) continue;
      const double tp = -o.z() / d.z();
      if (tp <= kRayEps) continue;
      const Vec3 q = o + tp * d;
      if (std::abs(q.x()) > half.x() || std::abs(q.y()) > half.y()) continue;
      t = tp;
    } else {
      double t_enter = -std::numeric_limits<double>::infinity();
      double t_exit = std::numeric_limits<double>::infinity();
      bool miss = false;
      for (int a = 0; a < 3 && !miss; ++a) {
        if (std::abs(d[a]) < 1e-15) {
          miss = std::abs(o[a]) > half[a];
          continue;
        }
        double t1 = (-half[a] - o[a]) / d[a], t2 = (half[a] - o[a]) / d[a];
        if (t1 > t2) std::swap(t1, t2);
        t_enter = std::max(t_enter, t1);
        t_exit = std::min(t_exit, t2);
      }
      if (miss || t_exit < t_enter || t_enter <= kRayEps) continue;
      t = t_enter;
    }
    if (!best || t < best->t) best = RayHit{t, origin + t * dir, i};
  }
  return best;
}

void Scene::feature_at(const Vec3& point, std::uint16_t label, std::span<double> out) const {
  const std::size_t T = spec_.texture_channels;
  for (std::size_t c = 0; c < T; ++c) {
    double acc = 0.0;
    for (int m = 0; m < 3; ++m) {
      const Wave& w = waves_[3 * c + m];
      acc += std::sin(2.0 * std::numbers::pi * w.frequency * w.direction.dot(point) + w.phase);
    }
    out[c] = acc / 3.0;
  }
  for (std::size_t k = 0; k < spec_.num_classes; ++k)
    out[T + k] = (k + 1 == label) ? spec_.embedding_amplitude : 0.0;
}

RaySample cast_pixel(const Scene& scene, const Intrinsics& K, const RigidPose& pose, double u, double v) {
  const Vec3 dir = pose.rotation.transpose() * Vec3((u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0);
  RaySample s;
  s.feature.assign(scene.channels(), 0.0);
  if (const auto hit = scene.cast(pose.center(), dir)) {
    s.depth = hit->t;
    s.primitive = static_cast<int>(hit->primitive);
    scene.feature_at(hit->point, scene.spec().primitives[hit->primitive].label, s.feature);
  }
  return s;
}

RenderedFrame render_frame(const Scene& scene, const Intrinsics& K, const RigidPose& pose,
                           std::size_t height, std::size_t width) {
  K.validate();
  const std::size_t C = scene.channels(), plane = height * width;
  RenderedFrame f{DenseArray({height, width}), DenseArray({C, height, width}), std::vector<int>(plane, -1), K, pose};
  parallel_for(height, [&](std::size_t begin, std::size_t end) {
    for (std::size_t h = begin; h < end; ++h)
      for (std::size_t w = 0; w < width; ++w) {
        const RaySample s = cast_pixel(scene, K, pose, static_cast<double>(w), static_cast<double>(h));
        const std::size_t i = h * width + w;
        f.depth[i] = s.depth;
        f.primitive[i] = s.primitive;
        for (std::size_t c = 0; c < C; ++c) f.feature[c * plane + i] = s.feature[c];
      }
  });
  return f;
}

SemanticVoxelGrid voxelize_ground_truth(const Scene& scene, const UnifiedGridSpec& grid) {
  grid.validate();
  SemanticVoxelGrid out(grid.nx, grid.ny, grid.nz);
  for (std::size_t x = 0; x < grid.nx; ++x)
    for (std::size_t y = 0; y < grid.ny; ++y)
      for (std::size_t z = 0; z < grid.nz; ++z) {
        const Vec3 c = grid.cell_center(x, y, z);
        for (const auto& p : scene.spec().primitives)
          if (p.contains(c)) {
            out.at(x, y, z) = p.label;
            break;
          }
      }
  return out;
}

SceneSpec random_scene_spec(std::uint64_t seed, const UnifiedGridSpec& grid, const RandomSceneOptions& options) {
  SceneSpec spec;
  spec.seed = seed;
  const Vec3 size = grid.voxel_size * Vec3(static_cast<double>(grid.nx), static_cast<double>(grid.ny),
                                           static_cast<double>(grid.nz));
  spec.bounds_min = grid.origin - Vec3(8.0, 8.0, 1.0);
  spec.bounds_max = grid.origin + size + Vec3(8.0, 8.0, 1.0);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  auto range = [&](double lo, double hi) { return lo + (hi - lo) * uni(rng); };

  if (options.ground) {
    Primitive g;
    g.label = 1;
    const double thickness = 0.4;
    g.extents = Vec3(size.x() + 14.0, size.y() + 14.0, thickness);
    g.center = Vec3(grid.origin.x() + size.x() / 2.0, grid.origin.y() + size.y() / 2.0,
                    grid.origin.z() + options.ground_top - thickness / 2.0);
    spec.primitives.push_back(g);
  }
  const std::size_t span = options.max_boxes - options.min_boxes + 1;
  const std::size_t count = options.min_boxes + static_cast<std::size_t>(uni(rng) * static_cast<double>(span)) % span;
  const double y_mid = grid.origin.y() + size.y() / 2.0;
  for (std::size_t i = 0; i < count; ++i) {
    for (int attempt = 0; attempt < 100; ++attempt) {
      Primitive b;
      b.label = static_cast<std::uint16_t>(spec.num_classes < 2 ? 1 : 2 + i % (spec.num_classes - 1));
      b.extents = Vec3(range(0.8, 2.4), range(0.8, 2.4), range(0.8, 2.6));
      const double yaw = range(-0.6, 0.6);
      b.rotation = Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
      b.center = Vec3(grid.origin.x() + range(options.near_x, size.x() - 1.5),
                      y_mid + range(-0.3, 0.3) * size.y(),
                      grid.origin.z() + options.ground_top + b.extents.z() / 2.0);
      const Vec3 half = b.rotation.cwiseAbs() * (b.extents / 2.0);
      if (((b.center - half).array() >= spec.bounds_min.array()).all() &&
          ((b.center + half).array() <= spec.bounds_max.array()).all()) {
        spec.primitives.push_back(b);
        break;
      }
    }
  }
  return spec;
}

SceneSpec plane_scene_spec(double depth, double width, double height) {
  SceneSpec spec;
  Primitive p;
  p.shape = PrimitiveShape::plane;
  p.label = 1;
  p.center = Vec3(depth, 0.0, 0.0);
  // Local z along world x so the plane faces a camera looking down +x.
  p.rotation.col(0) = Vec3(0, 1, 0);
  p.rotation.col(1) = Vec3(0, 0, 1);
  p.rotation.col(2) = Vec3(1, 0, 0);
  p.extents = Vec3(width, height, 0.0);
  spec.primitives.push_back(p);
  return spec;
}

DenseArray depth_logits_oracle(const DenseArray& depth, const DepthHypothesisSet& hyps,
                               const DepthOracleParams& params) {
  require_rank(depth, 2, "depth_logits_oracle");
  if (!(params.sigma > 0.0)) throw ArgumentError("depth oracle: sigma must be positive");
  const std::size_t H = depth.extent(0), W = depth.extent(1), D = hyps.size(), plane = H * W;
  DenseArray logits({D, H, W});
  std::mt19937_64 rng(params.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t i = 0; i < plane; ++i) {
    const double z = depth[i];
    for (std::size_t d = 0; d < D; ++d) {
      double l = 0.0;
      if (z > 0.0) {
        const double e = (hyps[d] - z) / params.sigma;
        l = -0.5 * e * e;
        if (params.noise > 0.0) l += params.noise * gauss(rng);
      }
      logits[d * plane + i] = l;
    }
  }
  return logits;
}

}  // namespace hisop
