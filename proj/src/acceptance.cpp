#include "hisop/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>

#include "hisop/alignment.hpp"
#include "hisop/compose.hpp"
#include "hisop/formats.hpp"
#include "hisop/geometry.hpp"
#include "hisop/lifting.hpp"
#include "hisop/parallel.hpp"
#include "hisop/pipeline.hpp"
#include "hisop/scenes.hpp"
#include "hisop/temporal.hpp"

#ifndef HISOP_DATA_DIR
#define HISOP_DATA_DIR "data"
#endif

namespace hisop {

namespace fs = std::filesystem;

std::string default_data_dir() { return HISOP_DATA_DIR; }

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

DenseArray random_array(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  DenseArray a(std::move(shape));
  for (double& v : a.values()) v = uniform(rng, lo, hi);
  return a;
}

double max_abs_diff(const DenseArray& a, const DenseArray& b) {
  if (a.shape() != b.shape()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// 1 -------------------------------------------------------------------------
Outcome warp_exactness() {
  Outcome out;
  Rng rng(101);
  const Intrinsics K{30.0, 28.0, 11.5, 7.5};
  const std::size_t C = 3, H = 16, W = 24;
  const DenseArray feature = random_array(rng, {C, H, W});
  const RigidPose pose = look_pose(Vec3(0.3, -1.2, 1.5), 0.4, 0.1);
  const FrameObservation cur{feature, K, pose, 0}, hist{feature, K, pose, -1};
  const DepthHypothesisSet hyps = build_hypotheses(1.0, 20.0, 8);
  const DenseArray warped = warp_historical(hist, cur, hyps);
  double worst = 0.0;
  for (std::size_t d = 0; d < hyps.size(); ++d)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t i = 0; i < H * W; ++i)
        worst = std::max(worst, std::abs(warped[(c * hyps.size() + d) * H * W + i] - feature[c * H * W + i]));
  double pixel_worst = 0.0;
  for (std::size_t v = 0; v < H; ++v)
    for (std::size_t u = 0; u < W; ++u) {
      const Pixel p{static_cast<double>(u), static_cast<double>(v)};
      const WarpResult r = warp_pixel(K, K, RigidPose::identity(), p, uniform(rng, 0.5, 30.0));
      pixel_worst = std::max({pixel_worst, std::abs(r.pixel.u - p.u), std::abs(r.pixel.v - p.v)});
    }
  const Intrinsics unit{1.0, 1.0, 0.0, 0.0};
  const RigidPose shift{Mat3::Identity(), Vec3(0.5, 0.0, 0.0)};
  const WarpResult a = warp_pixel(unit, unit, shift, {1.0, 2.0}, 4.0);
  const double analytic = std::max(std::abs(a.pixel.u - 1.125), std::abs(a.pixel.v - 2.0));
  out.ok = worst <= 1e-9 && pixel_worst <= 1e-9 && a.valid && analytic <= 1e-9;
  out.detail = "identity volume err " + fmt("%.1e", worst) + ", identity pixel err " + fmt("%.1e", pixel_worst) +
               ", translation case err " + fmt("%.1e", analytic);
  return out;
}

// 2 -------------------------------------------------------------------------
Outcome plane_sweep(const AcceptanceOptions& o) {
  const RunConfig cfg = RunConfig::load((fs::path(o.data_dir) / "plane.cfg").string());
  const SceneSpec spec = SceneSpec::load(cfg.scene_path);
  const Scene scene(spec);
  const Intrinsics K = cfg.camera.intrinsics();
  const std::vector<RigidPose> poses = cfg.frame_poses();
  const std::size_t H = cfg.camera.height, W = cfg.camera.width, P = H * W;
  std::vector<RenderedFrame> frames;
  std::vector<FrameObservation> obs;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    frames.push_back(render_frame(scene, K, poses[i], H, W));
    obs.push_back({frames.back().feature, K, poses[i], -static_cast<int>(i)});
  }
  const DepthHypothesisSet hyps = build_hypotheses(cfg.d_min, cfg.d_max, cfg.depth_count, cfg.spacing);
  const std::size_t D = hyps.size(), C = spec.channels();

  const DenseArray cost = build_cost_volume(obs, hyps, MatchMode::absdiff);
  const TemporalVolume tv = build_temporal_volume(obs, hyps);
  ParamOptions po;
  po.texture_channels = spec.texture_channels;
  po.num_classes = spec.num_classes;
  const ModelParams params = default_params(po);
  const PatternAffinity aff = pattern_affinity(multigroup_context(tv.current_block(), params.kernels),
                                               multigroup_context(tv.historical_block(), params.kernels));

  const RigidPose cam_to_world = poses[0].inverse();
  const double margin = 2.0;
  std::size_t textured = 0, cost_ok = 0, aff_ok = 0;
  for (std::size_t h = 0; h < H; ++h)
    for (std::size_t w = 0; w < W; ++w) {
      const std::size_t i = h * W + w;
      const double z = frames[0].depth[i];
      if (z <= 0.0) continue;
      const Vec3 world = cam_to_world.apply(backproject(K, {static_cast<double>(w), static_cast<double>(h)}, z));
      bool inside = true;
      for (std::size_t f = 1; f < poses.size() && inside; ++f) {
        const Vec3 cam = poses[f].apply(world);
        if (cam.z() <= 0.0) {
          inside = false;
          break;
        }
        const Pixel p = project(K, cam);
        inside = p.u >= margin && p.u <= W - 1 - margin && p.v >= margin && p.v <= H - 1 - margin;
      }
      if (!inside) continue;
      ++textured;
      const std::size_t truth = hyps.nearest(z);
      std::size_t best_cost = 0, best_aff = 0;
      double lowest = INFINITY;
      for (std::size_t d = 0; d < D; ++d) {
        double s = 0.0;
        for (std::size_t c = 0; c < C; ++c) s += cost[(c * D + d) * P + i];
        if (s < lowest) {
          lowest = s;
          best_cost = d;
        }
        if (aff.values[d * P + i] > aff.values[best_aff * P + i]) best_aff = d;
      }
      cost_ok += best_cost == truth;
      aff_ok += best_aff == truth;
    }
  Outcome out;
  const double fc = textured ? static_cast<double>(cost_ok) / textured : 0.0;
  const double fa = textured ? static_cast<double>(aff_ok) / textured : 0.0;
  out.ok = textured > 0 && fc >= 0.95 && fa >= 0.95;
  out.detail = std::to_string(textured) + " textured pixels, cost argmin " + fmt("%.4f", fc) +
               ", affinity argmax " + fmt("%.4f", fa) + " (need >= 0.95)";
  return out;
}

// 3 -------------------------------------------------------------------------
Outcome affinity_invariance() {
  Rng rng(303);
  double worst_pos = 0.0, worst_neg = 0.0, worst_bound = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t C = pick(rng, 2, 8), D = pick(rng, 1, 4), H = pick(rng, 1, 5), W = pick(rng, 1, 5);
    const std::size_t voxels = D * H * W;
    const bool negative = trial % 2 == 1;
    GroupContext x, y, z;
    for (std::size_t g = 0; g < 3; ++g) {
      x.groups[g] = random_array(rng, {C, D, H, W}, -3.0, 3.0);
      y.groups[g] = x.groups[g];
      z.groups[g] = random_array(rng, {C, D, H, W}, -3.0, 3.0);
      for (std::size_t v = 0; v < voxels; ++v) {
        const double a = (negative ? -1.0 : 1.0) * std::exp(uniform(rng, std::log(0.1), std::log(10.0)));
        const double b = uniform(rng, -5.0, 5.0);
        for (std::size_t c = 0; c < C; ++c) y.groups[g][c * voxels + v] = a * x.groups[g][c * voxels + v] + b;
      }
    }
    const PatternAffinity a = pattern_affinity(x, y);
    for (const double v : a.values.values()) {
      if (negative) worst_neg = std::max(worst_neg, std::abs(v + 1.0));
      else worst_pos = std::max(worst_pos, std::abs(v - 1.0));
      worst_bound = std::max(worst_bound, std::abs(v) - 1.0);
    }
    const PatternAffinity unrelated = pattern_affinity(x, z);
    for (const double v : unrelated.values.values()) worst_bound = std::max(worst_bound, std::abs(v) - 1.0);
  }
  Outcome out;
  out.ok = worst_pos <= 1e-6 && worst_neg <= 1e-6 && worst_bound <= 1e-9;
  out.detail = "a>0 err " + fmt("%.1e", worst_pos) + ", a<0 err " + fmt("%.1e", worst_neg) + ", bound excess " +
               fmt("%.1e", std::max(0.0, worst_bound));
  return out;
}

// 4 -------------------------------------------------------------------------
Outcome attention_oracle() {
  Rng rng(404);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t Nq = pick(rng, 1, 32), Nk = pick(rng, 1, 32), Ck = pick(rng, 1, 8), Cv = pick(rng, 1, 8);
    const DenseArray Q = random_array(rng, {Nq, Ck}, -4.0, 4.0);
    const DenseArray Kt = random_array(rng, {Nk, Ck}, -4.0, 4.0);
    const DenseArray V = random_array(rng, {Nk, Cv}, -2.0, 2.0);
    std::vector<double> conf(Nq);
    for (double& c : conf) c = uniform(rng, 0.0, 1.0);
    const DenseArray got = linear_cross_attention(Q, Kt, V, conf);
    for (std::size_t n = 0; n < Nq; ++n) {
      double zq = 0.0;
      for (std::size_t c = 0; c < Ck; ++c) zq += std::exp(Q.at(n, c));
      for (std::size_t j = 0; j < Cv; ++j) {
        double acc = 0.0;
        for (std::size_t c = 0; c < Ck; ++c) {
          double zk = 0.0;
          for (std::size_t m = 0; m < Nk; ++m) zk += std::exp(Kt.at(m, c));
          double g = 0.0;
          for (std::size_t m = 0; m < Nk; ++m) g += std::exp(Kt.at(m, c)) / zk * V.at(m, j);
          acc += std::exp(Q.at(n, c)) / zq * g;
        }
        worst = std::max(worst, std::abs(conf[n] * acc - got.at(n, j)));
      }
    }
  }
  Outcome out;
  out.ok = worst <= 1e-9;
  out.detail = "max err " + fmt("%.1e", worst) + " over 200 cases";
  return out;
}

// 5 -------------------------------------------------------------------------
Outcome lifting_conservation() {
  Rng rng(505);
  double worst = 0.0;
  bool bounds = true, uniform_exact = true;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t C = pick(rng, 1, 6), D = pick(rng, 2, 12), H = pick(rng, 1, 6), W = pick(rng, 1, 6);
    const DenseArray fc = random_array(rng, {C, H, W}, -2.0, 2.0);
    const DenseArray fd = random_array(rng, {D, H, W}, -4.0, 4.0);
    for (int variant = 0; variant < 2; ++variant) {
      const DenseArray logits = variant == 0 ? fd : DenseArray({D, H, W}, uniform(rng, -3.0, 3.0));
      const DenseArray conf = depth_confidence(logits);
      const double floor = 1.0 / static_cast<double>(D);
      for (const double c : conf.values()) {
        bounds = bounds && c >= floor && c <= 1.0;
        if (variant == 1) uniform_exact = uniform_exact && c == floor;
      }
      const LiftResult lift = lift_to_voxel_volume(fc, logits, conf);
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < H * W; ++i) {
          double s = 0.0;
          for (std::size_t d = 0; d < D; ++d) s += lift.volume[(c * D + d) * H * W + i];
          worst = std::max(worst, std::abs(s - fc[c * H * W + i]));
        }
    }
  }
  Outcome out;
  out.ok = worst <= 1e-9 && bounds && uniform_exact;
  out.detail = "depth-sum err " + fmt("%.1e", worst) + (bounds ? ", bounds hold" : ", bounds VIOLATED") +
               (uniform_exact ? ", uniform = 1/D exactly" : ", uniform != 1/D");
  return out;
}

// 6 -------------------------------------------------------------------------
Outcome pool_conservation() {
  Rng rng(606);
  double worst_rel = 0.0;
  bool bitwise = true, threaded = true;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t C = pick(rng, 1, 4), D = pick(rng, 2, 10), H = pick(rng, 2, 12), W = pick(rng, 2, 12);
    const Intrinsics K{uniform(rng, 5.0, 30.0), uniform(rng, 5.0, 30.0), (W - 1) / 2.0, (H - 1) / 2.0};
    const RigidPose pose = look_pose(Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, 0.5, 2.5)),
                                     uniform(rng, -0.5, 0.5), uniform(rng, -0.3, 0.3));
    const double d0 = uniform(rng, 0.5, 3.0);
    const DepthHypothesisSet hyps = build_hypotheses(d0, d0 + uniform(rng, 2.0, 12.0), D);
    UnifiedGridSpec grid{pick(rng, 2, 10), pick(rng, 2, 10), pick(rng, 2, 6), uniform(rng, 0.3, 1.5),
                         Vec3(uniform(rng, -1, 2), uniform(rng, -4, 0), uniform(rng, -1, 0.5))};
    const DenseArray vol = random_array(rng, {C, D, H, W}, -1.0, 2.0);
    const PoolResult got = voxel_pool(vol, hyps, K, pose, grid);

    // Naive loop: (h, w, d) order, index from the world point.
    DenseArray naive({C, grid.nx, grid.ny, grid.nz});
    std::vector<double> dropped(C, 0.0);
    const RigidPose cam_to_world = pose.inverse();
    const std::size_t cells = grid.cells();
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t w = 0; w < W; ++w)
        for (std::size_t d = 0; d < D; ++d) {
          const Vec3 world =
              cam_to_world.apply(backproject(K, {static_cast<double>(w), static_cast<double>(h)}, hyps[d]));
          const Vec3 rel = (world - grid.origin) / grid.voxel_size;
          const double fx = std::floor(rel.x()), fy = std::floor(rel.y()), fz = std::floor(rel.z());
          const bool in = fx >= 0 && fy >= 0 && fz >= 0 && fx < grid.nx && fy < grid.ny && fz < grid.nz;
          for (std::size_t c = 0; c < C; ++c) {
            const double v = vol[((c * D + d) * H + h) * W + w];
            if (!in) {
              dropped[c] += v;
              continue;
            }
            const std::size_t cell = (static_cast<std::size_t>(fx) * grid.ny + static_cast<std::size_t>(fy)) * grid.nz +
                                     static_cast<std::size_t>(fz);
            naive[c * cells + cell] += v;
          }
        }
    bitwise = bitwise && naive == got.grid;
    for (std::size_t c = 0; c < C; ++c) {
      double in_sum = 0.0, scale = 0.0, out_sum = 0.0;
      for (std::size_t i = 0; i < D * H * W; ++i) {
        in_sum += vol[c * D * H * W + i];
        scale += std::abs(vol[c * D * H * W + i]);
      }
      for (std::size_t v = 0; v < cells; ++v) out_sum += got.grid[c * cells + v];
      worst_rel = std::max(worst_rel, std::abs(out_sum + got.dropped_mass[c] - in_sum) / std::max(1.0, scale));
    }
    const std::size_t saved = thread_count();
    set_thread_count(4);
    const PoolResult par = voxel_pool(vol, hyps, K, pose, grid);
    set_thread_count(saved);
    threaded = threaded && par.grid == got.grid && par.dropped == got.dropped;
  }
  Outcome out;
  out.ok = worst_rel <= 1e-9 && bitwise && threaded;
  out.detail = "mass err " + fmt("%.1e", worst_rel) + (bitwise ? ", bitwise equal to naive loop" : ", differs from naive loop") +
               (threaded ? ", 4-thread result identical" : ", 4-thread result differs");
  return out;
}

RunConfig tiny_config() {
  RunConfig c;
  c.id = "tiny";
  c.seed = 5;
  c.camera.height = 12;
  c.camera.width = 16;
  c.camera.fx = c.camera.fy = 9.0;
  c.depth_count = 12;
  c.grid = UnifiedGridSpec{16, 16, 4, 0.8, Vec3(0.0, -6.4, 0.0)};
  return c;
}

// 7 -------------------------------------------------------------------------
Outcome zero_gate_identity() {
  RunConfig gated = tiny_config();
  gated.model.gate = 0.0;
  const ForwardResult r = run_forward(gated);
  const std::vector<double> zeros(r.geometric.extent(0), 0.0);
  const bool op = r.temporal && zero_gated_compose(*r.temporal, r.geometric, zeros) == r.geometric;
  RunConfig plain = gated;
  plain.ablate.tvc = false;
  const ForwardResult g = run_forward(plain);
  const bool end_to_end = r.composed == g.composed && r.head.logits == g.head.logits && r.head.labels == g.head.labels;
  Outcome out;
  out.ok = op && end_to_end;
  out.detail = std::string(op ? "compose(gate 0) == pooled geometric bitwise" : "compose(gate 0) differs") +
               (end_to_end ? ", full run equals the geometric-only run bitwise" : ", full run differs from geometric-only");
  return out;
}

// 8 -------------------------------------------------------------------------
struct OracleMetrics {
  double iou;
  std::vector<double> per_class;
  double miou;
};

OracleMetrics confusion_oracle(const SemanticVoxelGrid& pred, const SemanticVoxelGrid& gt,
                               const std::vector<std::uint8_t>& ignore, std::size_t N) {
  std::vector<std::vector<std::size_t>> m(N + 1, std::vector<std::size_t>(N + 1, 0));
  for (std::size_t v = 0; v < gt.size(); ++v)
    if (ignore.empty() || !ignore[v]) ++m[gt.labels[v]][pred.labels[v]];
  std::size_t inter = 0, uni = 0;
  for (std::size_t g = 0; g <= N; ++g)
    for (std::size_t p = 0; p <= N; ++p) {
      if (g != 0 && p != 0) inter += m[g][p];
      if (g != 0 || p != 0) uni += m[g][p];
    }
  OracleMetrics o;
  o.iou = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
  double total = 0.0;
  std::size_t present = 0;
  for (std::size_t k = 1; k <= N; ++k) {
    std::size_t row = 0, col = 0;
    for (std::size_t j = 0; j <= N; ++j) {
      row += m[k][j];
      col += m[j][k];
    }
    const std::size_t u = row + col - m[k][k];
    if (u == 0) {
      o.per_class.push_back(NAN);
      continue;
    }
    o.per_class.push_back(static_cast<double>(m[k][k]) / static_cast<double>(u));
    total += o.per_class.back();
    ++present;
  }
  o.miou = present == 0 ? 1.0 : total / static_cast<double>(present);
  return o;
}

bool same_metrics(const Metrics& a, const OracleMetrics& b) {
  if (a.iou != b.iou || a.miou != b.miou || a.per_class_iou.size() != b.per_class.size()) return false;
  for (std::size_t k = 0; k < b.per_class.size(); ++k) {
    const double x = a.per_class_iou[k], y = b.per_class[k];
    if (!(x == y || (std::isnan(x) && std::isnan(y)))) return false;
  }
  return true;
}

Outcome metric_oracle() {
  Rng rng(808);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t nx = pick(rng, 1, 16), ny = pick(rng, 1, 16), nz = pick(rng, 1, 16), N = pick(rng, 1, 5);
    SemanticVoxelGrid pred(nx, ny, nz), gt(nx, ny, nz);
    std::vector<std::uint8_t> ignore(pred.size(), 0);
    for (std::size_t v = 0; v < pred.size(); ++v) {
      gt.labels[v] = uniform(rng, 0, 1) < 0.5 ? 0 : static_cast<std::uint16_t>(pick(rng, 1, N));
      pred.labels[v] = uniform(rng, 0, 1) < 0.6 ? gt.labels[v] : static_cast<std::uint16_t>(pick(rng, 0, N));
      ignore[v] = uniform(rng, 0, 1) < 0.1;
    }
    if (!same_metrics(evaluate(pred, gt, ignore, N), confusion_oracle(pred, gt, ignore, N))) ++mismatches;
  }
  // Exhaustive 2x2x1 sweep with two classes: oracle agreement, and fixing any
  // wrong voxel never lowers IoU or mIoU.
  std::size_t sweep_mismatch = 0, monotone_violations = 0, pairs = 0;
  for (int g = 0; g < 81; ++g)
    for (int p = 0; p < 81; ++p) {
      SemanticVoxelGrid gt(2, 2, 1), pred(2, 2, 1);
      for (int v = 0, a = g, b = p; v < 4; ++v, a /= 3, b /= 3) {
        gt.labels[v] = static_cast<std::uint16_t>(a % 3);
        pred.labels[v] = static_cast<std::uint16_t>(b % 3);
      }
      ++pairs;
      const Metrics base = evaluate(pred, gt, {}, 2);
      if (!same_metrics(base, confusion_oracle(pred, gt, {}, 2))) ++sweep_mismatch;
      for (int v = 0; v < 4; ++v) {
        if (pred.labels[v] == gt.labels[v]) continue;
        SemanticVoxelGrid fixed = pred;
        fixed.labels[v] = gt.labels[v];
        const Metrics better = evaluate(fixed, gt, {}, 2);
        if (better.iou < base.iou || better.miou < base.miou) ++monotone_violations;
      }
    }
  Outcome out;
  out.ok = mismatches == 0 && sweep_mismatch == 0 && monotone_violations == 0;
  out.detail = std::to_string(mismatches) + "/100 random grids differ, " + std::to_string(sweep_mismatch) + "/" +
               std::to_string(pairs) + " sweep pairs differ, " + std::to_string(monotone_violations) +
               " monotonicity violations";
  return out;
}

// 9 -------------------------------------------------------------------------
Outcome deformable_identity() {
  Rng rng(909);
  double identity_err = 0.0, linear_err = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t C = pick(rng, 1, 4), D = pick(rng, 1, 4), H = pick(rng, 1, 6), W = pick(rng, 1, 6);
    const DenseArray vol = random_array(rng, {C, D, H, W});
    const PatternAffinity ones{DenseArray({3, D, H, W}, 1.0)};
    for (const bool cascade : {true, false}) {
      RefineConfig cfg{{identity_taps(), identity_taps(), identity_taps()}, level_mean_reducer(C), cascade};
      identity_err = std::max(identity_err, max_abs_diff(multilevel_refine(vol, ones, cfg), vol));
    }
    const PatternAffinity aff{random_array(rng, {3, D, H, W})};
    const double s = uniform(rng, -3.0, 3.0);
    PatternAffinity scaled = aff;
    for (double& v : scaled.values.values()) v *= s;
    const TapSet taps = window_taps(rng(), 0.9, trial % 2 == 1, D * H * W);
    for (std::size_t level = 1; level <= 3; ++level) {
      DenseArray base = affinity_deformable_sample(vol, taps, aff, level);
      for (double& v : base.values()) v *= s;
      linear_err = std::max(linear_err, max_abs_diff(affinity_deformable_sample(vol, taps, scaled, level), base));
    }
  }
  Outcome out;
  out.ok = identity_err <= 1e-12 && linear_err <= 1e-9;
  out.detail = "identity cascade err " + fmt("%.1e", identity_err) + ", affinity scaling err " + fmt("%.1e", linear_err);
  return out;
}

// 10 ------------------------------------------------------------------------
Outcome directional(const AcceptanceOptions& o) {
  RunConfig base = RunConfig::load((fs::path(o.data_dir) / "bench.cfg").string());
  base.out_dir = (fs::path(o.out_dir) / "bench").string();
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 1; s <= 10; ++s) seeds.push_back(s);
  const BenchResult b = run_bench(base, seeds, true);
  double min_shuffled = INFINITY, min_unaligned = INFINITY;
  for (const auto& s : b.seeds) {
    min_shuffled = std::min(min_shuffled, s.aligned - s.shuffled);
    min_unaligned = std::min(min_unaligned, s.aligned - s.unaligned);
  }
  Outcome out;
  out.ok = b.beats_shuffled >= 9 && b.beats_unaligned >= 8;
  out.detail = "aligned > pose-shuffled in " + std::to_string(b.beats_shuffled) +
               "/10 (need 9, min margin " + fmt("%+.4f", min_shuffled) + "), aligned > no-CPA/ADR in " +
               std::to_string(b.beats_unaligned) + "/10 (need 8, min margin " + fmt("%+.4f", min_unaligned) +
               "); margins in " + (fs::path(base.out_dir) / "margins.csv").string();
  return out;
}

// 11 ------------------------------------------------------------------------
Outcome determinism(const AcceptanceOptions& o) {
  RunConfig base = RunConfig::load((fs::path(o.data_dir) / "bench.cfg").string());
  base.seed = 3;
  const char* files[] = {"prediction.hisopvox", "ground_truth.hisopvox", "metrics.csv", "params.hisoppar",
                         "affinity.pgm"};
  std::vector<std::vector<Bytes>> outputs;
  int run = 0;
  for (const std::size_t threads : {1, 1, 4, 4}) {
    RunConfig c = base;
    c.threads = threads;
    c.out_dir = (fs::path(o.out_dir) / "determinism" / ("run" + std::to_string(run++))).string();
    run_pipeline(c);
    std::vector<Bytes> bytes;
    for (const char* f : files) bytes.push_back(read_file((fs::path(c.out_dir) / f).string()));
    outputs.push_back(std::move(bytes));
  }
  std::size_t differing = 0;
  for (std::size_t r = 1; r < outputs.size(); ++r)
    for (std::size_t f = 0; f < outputs[r].size(); ++f) differing += outputs[r][f] != outputs[0][f];
  Outcome out;
  out.ok = differing == 0;
  out.detail = std::to_string(differing) + " differing artifacts across 2 runs at 1 thread and 2 runs at 4 threads";
  return out;
}

struct Criterion {
  int id;
  const char* name;
  double limit;
  std::function<Outcome(const AcceptanceOptions&)> check;
};

}  // namespace

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options) {
  const std::vector<Criterion> all{
      {1, "warp exactness", 1.0, [](const auto&) { return warp_exactness(); }},
      {2, "plane-sweep correspondence", 10.0, plane_sweep},
      {3, "affine affinity invariance", 5.0, [](const auto&) { return affinity_invariance(); }},
      {4, "linear attention oracle", 5.0, [](const auto&) { return attention_oracle(); }},
      {5, "lifting conservation", 5.0, [](const auto&) { return lifting_conservation(); }},
      {6, "voxel pool conservation", 10.0, [](const auto&) { return pool_conservation(); }},
      {7, "zero-gate identity", 1.0, [](const auto&) { return zero_gate_identity(); }},
      {8, "metric oracle", 5.0, [](const auto&) { return metric_oracle(); }},
      {9, "deformable identity and linearity", 5.0, [](const auto&) { return deformable_identity(); }},
      {10, "end-to-end alignment benefit", 60.0, directional},
      {11, "run determinism", 30.0, determinism},
  };
  std::vector<CriterionResult> results;
  for (const auto& c : all) {
    if (!options.only.empty() && std::find(options.only.begin(), options.only.end(), c.id) == options.only.end())
      continue;
    CriterionResult r{c.id, c.name, false, "", 0.0, c.limit};
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check(options);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    r.passed = o.ok && r.seconds < c.limit;
    r.detail = o.detail;
    if (o.ok && !r.passed) r.detail += "; exceeded the time limit";
    results.push_back(std::move(r));
  }
  return results;
}

std::string format_result(const CriterionResult& r) {
  char head[160];
  std::snprintf(head, sizeof head, "%s %2d %-34s %7.3f s / %g s  ", r.passed ? "PASS" : "FAIL", r.id, r.name.c_str(),
                r.seconds, r.limit_seconds);
  return head + r.detail;
}

}  // namespace hisop
