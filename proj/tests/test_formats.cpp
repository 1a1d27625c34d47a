#include <cmath>
#include <filesystem>
#include <limits>

#include "doctest.h"
#include "hisop/errors.hpp"
#include "hisop/formats.hpp"
#include "hisop/params.hpp"
#include "hisop/pipeline.hpp"
#include "support.hpp"

using namespace hisop;
using hisop::test::Rng;
using hisop::test::random_array;

namespace fs = std::filesystem;

namespace {

std::string scratch(const std::string& name) {
  const std::string dir = hisop::test::scratch_dir("formats");
  fs::create_directories(dir);
  return dir + "/" + name;
}

}  // namespace

TEST_CASE("voxel grid byte layout") {
  SemanticVoxelGrid g(2, 2, 1);
  g.labels = {1, 0, 2, 0};
  const Bytes expect{'H', 'I', 'S', 'O', 'P', 'V', 'O', 'X', 2, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0, 0,
                     1, 0, 0, 0, 2, 0, 0, 0};
  CHECK(encode_voxel_grid(g) == expect);
  CHECK(decode_voxel_grid(expect) == g);

  const std::string path = scratch("grid.hisopvox");
  CHECK(export_voxel_grid(g, path) == expect.size());
  CHECK(read_file(path) == expect);
  CHECK(read_voxel_grid(path) == g);
}

TEST_CASE("voxel grids round-trip") {
  Rng rng(81);
  SemanticVoxelGrid g(5, 4, 3);
  for (auto& l : g.labels) l = static_cast<std::uint16_t>(rng.pick(0, 65535));
  CHECK(decode_voxel_grid(encode_voxel_grid(g)) == g);
  const DenseArray reals = random_array(rng, {3, 4, 2}, -1e6, 1e6);
  CHECK(decode_voxel_reals(encode_voxel_reals(reals)) == reals);
  const std::string path = scratch("reals.hisopvox");
  export_voxel_reals(reals, path);
  CHECK(read_voxel_reals(path) == reals);
  CHECK_THROWS_AS(decode_voxel_grid(encode_voxel_reals(reals)), FormatError);
  CHECK_THROWS_AS(decode_voxel_reals(encode_voxel_grid(g)), FormatError);
}

TEST_CASE("corrupted voxel files are rejected whole") {
  SemanticVoxelGrid g(3, 2, 2, 4);
  const Bytes good = encode_voxel_grid(g);
  Rng rng(82);
  for (std::size_t i = 0; i < 8; ++i) {
    Bytes bad = good;
    bad[i] ^= static_cast<std::uint8_t>(1 + rng.pick(0, 254));
    CHECK_THROWS_AS(decode_voxel_grid(bad), FormatError);
  }
  Bytes wrong_dtype = good;
  wrong_dtype[20] = 7;
  CHECK_THROWS_AS(decode_voxel_grid(wrong_dtype), FormatError);
  for (std::size_t n = 0; n < good.size(); ++n) {
    const Bytes cut(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(n));
    CHECK_THROWS_AS(decode_voxel_grid(cut), FormatError);
  }
  Bytes longer = good;
  longer.push_back(0);
  CHECK_THROWS_AS(decode_voxel_grid(longer), FormatError);
  Bytes huge = good;
  huge[8] = huge[9] = huge[10] = huge[11] = 0xff;
  CHECK_THROWS_AS(decode_voxel_grid(huge), FormatError);
  CHECK_THROWS_AS(read_voxel_grid(scratch("missing.hisopvox")), IoError);
  CHECK_THROWS_AS(export_voxel_grid(g, "/nonexistent-dir/x.hisopvox"), IoError);
}

TEST_CASE("parameter bundles round-trip") {
  const ModelParams p = default_params({});
  const auto records = p.to_records();
  const Bytes bytes = encode_params(records);
  CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "HISOPPAR");
  CHECK(decode_params(bytes) == records);
  const ModelParams back = ModelParams::from_records(decode_params(bytes));
  CHECK(back.to_records() == records);
  const std::string path = scratch("params.hisoppar");
  write_params(records, path);
  CHECK(read_params(path) == records);

  Bytes cut(bytes.begin(), bytes.end() - 1);
  CHECK_THROWS_AS(decode_params(cut), FormatError);
  Bytes bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_params(bad), FormatError);
  Bytes version = bytes;
  version[8] = 9;
  CHECK_THROWS_AS(decode_params(version), FormatError);

  auto missing = records;
  missing.pop_back();
  CHECK_THROWS(ModelParams::from_records(missing));
}

TEST_CASE("heatmaps") {
  const PatternAffinity ones{DenseArray({3, 2, 3, 4}, 1.0)};
  const PatternAffinity neg{DenseArray({3, 2, 3, 4}, -1.0)};
  const std::string header = "P5\n4 3\n255\n";
  const Bytes white = encode_heatmap(ones, 1, 1);
  REQUIRE(white.size() == header.size() + 12);
  CHECK(std::string(white.begin(), white.begin() + static_cast<std::ptrdiff_t>(header.size())) == header);
  for (std::size_t i = header.size(); i < white.size(); ++i) CHECK(white[i] == 255);
  const Bytes black = encode_heatmap(neg, 0, 0);
  for (std::size_t i = header.size(); i < black.size(); ++i) CHECK(black[i] == 0);

  DenseArray mid({3, 1, 1, 3});
  mid[0] = 0.0;
  mid[1] = 2.0;
  mid[2] = std::numeric_limits<double>::quiet_NaN();
  const Bytes m = encode_heatmap(PatternAffinity{mid}, 0, 0);
  const std::size_t off = std::string("P5\n3 1\n255\n").size();
  CHECK(m[off] == 128);
  CHECK(m[off + 1] == 255);
  CHECK(m[off + 2] == 0);

  CHECK_THROWS_AS(encode_heatmap(ones, 3, 0), ArgumentError);
  CHECK_THROWS_AS(encode_heatmap(ones, 0, 2), ArgumentError);
  const std::string path = scratch("heat.pgm");
  export_heatmap(ones, 2, 0, path);
  CHECK(read_file(path) == encode_heatmap(ones, 2, 0));
}

TEST_CASE("plane affinity heatmap is bright over the overlapping footprint") {
  const RunConfig cfg = RunConfig::load(std::string(HISOP_DATA_DIR) + "/plane.cfg");
  const ForwardResult r = run_forward(cfg);
  REQUIRE(r.affinity);
  const std::size_t H = cfg.camera.height, W = cfg.camera.width;
  const auto poses = cfg.frame_poses();
  const Intrinsics K = cfg.camera.intrinsics();
  const std::size_t slice = r.hypotheses.nearest(r.frames[0].depth[0]);
  const Bytes img = encode_heatmap(*r.affinity, 0, slice);
  const std::size_t off = img.size() - H * W;
  double in = 0.0, out = 0.0;
  std::size_t n_in = 0, n_out = 0;
  for (std::size_t v = 0; v < H; ++v)
    for (std::size_t u = 0; u < W; ++u) {
      bool seen = r.frames[0].primitive[v * W + u] >= 0;
      for (std::size_t i = 1; i < poses.size() && seen; ++i) {
        const WarpResult w = warp_pixel(K, K, relative_pose(poses[0], poses[i]), {double(u), double(v)},
                                        r.hypotheses[slice]);
        seen = w.valid && w.pixel.u >= 0.0 && w.pixel.v >= 0.0 && w.pixel.u <= W - 1.0 && w.pixel.v <= H - 1.0;
      }
      (seen ? in : out) += img[off + v * W + u];
      (seen ? n_in : n_out) += 1;
    }
  REQUIRE(n_in > 0);
  REQUIRE(n_out > 0);
  CHECK(in / double(n_in) > out / double(n_out));
}

TEST_CASE("metrics csv") {
  MetricsRow perfect{"perfect", 1.0, 1.0, {1.0, 1.0}, 0.0, 0.0, 0.0};
  const std::string one = format_metrics_csv({perfect});
  CHECK(one == "run_id,iou,miou,iou_c1,iou_c2,l_depth,l_ce,wall_ms\n"
               "perfect,1.000000,1.000000,1.000000,1.000000,0.000000,0.000000,0.000000\n");
  MetricsRow second{"second", 0.5, 0.25, {0.25, std::numeric_limits<double>::quiet_NaN()}, 1.5, 2.0, 3.0};
  const std::string two = format_metrics_csv({second, perfect});
  const auto first_row = two.find("second,"), later_row = two.find("perfect,");
  CHECK(first_row != std::string::npos);
  CHECK(first_row < later_row);
  CHECK(two.find(",nan,") != std::string::npos);
  CHECK_THROWS_AS(format_metrics_csv({}), ArgumentError);
  MetricsRow short_row = perfect;
  short_row.per_class_iou.pop_back();
  CHECK_THROWS_AS(format_metrics_csv({perfect, short_row}), ArgumentError);
  MetricsRow comma = perfect;
  comma.run_id = "a,b";
  CHECK_THROWS_AS(format_metrics_csv({comma}), ArgumentError);
  const std::string path = scratch("metrics.csv");
  report_metrics({perfect}, path);
  const Bytes written = read_file(path);
  CHECK(std::string(written.begin(), written.end()) == one);
  CHECK_THROWS_AS(report_metrics({perfect}, "/nonexistent-dir/m.csv"), IoError);
}
