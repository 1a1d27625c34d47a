// hisop: command-line front end for the synthetic semantic occupancy pipeline.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hisop/acceptance.hpp"
#include "hisop/errors.hpp"
#include "hisop/formats.hpp"
#include "hisop/keyvalue.hpp"
#include "hisop/parallel.hpp"
#include "hisop/pipeline.hpp"

namespace fs = std::filesystem;
using namespace hisop;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> ablate;
  std::size_t threads = 1;
  bool timing = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "key=value run configuration (default: built-in benchmark setup)");
  cmd->add_option("--seed", f.seed, "scene, oracle and tap seed");
  cmd->add_option("--out", f.out, "output directory (HISOP_OUT overrides)");
  cmd->add_option("--ablate", f.ablate, "NAME=on|off, repeatable")->take_all();
  cmd->add_option("--threads", f.threads, "worker threads for intra-op loops")->check(CLI::PositiveNumber);
  cmd->add_flag("--timing", f.timing, "write measured wall time into the metrics CSV");
}

RunConfig resolve_config(const CommonFlags& f) {
  RunConfig c = f.config.empty() ? RunConfig{} : RunConfig::load(f.config);
  if (f.seed) c.seed = *f.seed;
  if (!f.out.empty()) c.out_dir = f.out;
  if (const char* env = std::getenv("HISOP_OUT"); env && *env) c.out_dir = env;
  for (const auto& a : f.ablate) {
    const auto eq = a.find('=');
    if (eq == std::string::npos) throw ConfigError("--ablate expects NAME=on|off, got '" + a + "'");
    c.ablate.set(a.substr(0, eq), parse_switch(a.substr(eq + 1), "--ablate " + a.substr(0, eq)));
  }
  c.threads = f.threads;
  c.timing = c.timing || f.timing;
  c.validate();
  return c;
}

void print_report(const RunReport& r) {
  std::printf("run %s: iou %.6f  miou %.6f  l_depth %.6f  l_ce %.6f  dropped %zu  %.1f ms\n", r.id.c_str(),
              r.metrics.iou, r.metrics.miou, r.loss.depth, r.loss.ce, r.dropped, r.wall_ms);
  for (std::size_t k = 0; k < r.metrics.per_class_iou.size(); ++k)
    std::printf("  class %zu iou %.6f\n", k + 1, r.metrics.per_class_iou[k]);
  for (const auto& w : r.warnings) std::printf("  warning: %s\n", w.c_str());
  for (const auto& a : r.artifacts) std::printf("  wrote %s\n", a.c_str());
}

int cmd_run(const CommonFlags& f) {
  print_report(run_pipeline(resolve_config(f)));
  return 0;
}

int cmd_bench(const CommonFlags& f, std::uint64_t first, std::size_t count) {
  const RunConfig c = resolve_config(f);
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < count; ++i) seeds.push_back(first + i);
  const BenchResult b = run_bench(c, seeds, true);
  std::fputs(b.margins_csv.c_str(), stdout);
  std::printf("aligned beats pose-shuffled in %zu/%zu seeds, beats no-CPA/ADR in %zu/%zu seeds\n",
              b.beats_shuffled, seeds.size(), b.beats_unaligned, seeds.size());
  std::printf("wrote %s and %s\n", (fs::path(c.out_dir) / "bench.csv").string().c_str(),
              (fs::path(c.out_dir) / "margins.csv").string().c_str());
  return 0;
}

int cmd_export(const CommonFlags& f, const std::vector<std::string>& inspect, std::optional<std::size_t> group) {
  if (!inspect.empty()) {
    for (const auto& path : inspect) {
      const Bytes bytes = read_file(path);
      const std::string magic(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(8, bytes.size())));
      if (magic == "HISOPPAR") {
        for (const auto& rec : decode_params(bytes))
          std::printf("%s: %s %s\n", path.c_str(), rec.name.c_str(), to_string(rec.array.shape()).c_str());
      } else if (bytes.size() > 20 && bytes[20] == 1) {
        const DenseArray g = decode_voxel_reals(bytes);
        std::printf("%s: reals %s sum %.6f\n", path.c_str(), to_string(g.shape()).c_str(), g.sum());
      } else {
        const SemanticVoxelGrid g = decode_voxel_grid(bytes);
        std::size_t occupied = 0;
        for (const auto v : g.labels) occupied += v != 0;
        std::printf("%s: labels %zux%zux%zu, %zu occupied\n", path.c_str(), g.nx, g.ny, g.nz, occupied);
      }
    }
    return 0;
  }
  const RunConfig c = resolve_config(f);
  const ForwardResult r = run_forward(c);
  std::error_code ec;
  fs::create_directories(c.out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + c.out_dir + "': " + ec.message());
  const fs::path out(c.out_dir);
  export_voxel_grid(r.head.labels, (out / "prediction.hisopvox").string());
  // Occupancy evidence: summed class channels of the composed grid.
  const std::size_t T = r.scene.texture_channels, N = r.scene.num_classes, cells = c.grid.cells();
  DenseArray occupancy({c.grid.nx, c.grid.ny, c.grid.nz});
  for (std::size_t k = 0; k < N; ++k)
    for (std::size_t v = 0; v < cells; ++v) occupancy[v] += r.composed[(T + k) * cells + v];
  export_voxel_reals(occupancy, (out / "occupancy.hisopvox").string());
  write_params(r.params.to_records(), (out / "params.hisoppar").string());
  std::size_t images = 0;
  if (r.affinity) {
    const std::size_t D = r.hypotheses.size();
    for (std::size_t g = 0; g < 3; ++g) {
      if (group && *group != g) continue;
      for (std::size_t d = 0; d < D; ++d) {
        export_heatmap(*r.affinity, g, d,
                       (out / ("affinity_g" + std::to_string(g + 1) + "_d" + std::to_string(d) + ".pgm")).string());
        ++images;
      }
    }
  }
  report_metrics({r.report.row(c.timing)}, (out / "metrics.csv").string());
  std::printf("exported prediction, occupancy, params, metrics and %zu affinity heatmaps to %s\n", images,
              c.out_dir.c_str());
  return 0;
}

int cmd_selftest(const std::string& data, const std::string& out, const std::vector<int>& only) {
  AcceptanceOptions o{data.empty() ? default_data_dir() : data, out, only};
  std::size_t passed = 0, failed = 0;
  for (const auto& r : run_acceptance(o)) {
    std::printf("%s\n", format_result(r).c_str());
    std::fflush(stdout);
    (r.passed ? passed : failed) += 1;
  }
  std::printf("%zu passed, %zu failed\n", passed, failed);
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical temporal semantic occupancy on synthetic scenes"};
  app.require_subcommand(1);

  CommonFlags run_flags, bench_flags, export_flags;
  auto* run = app.add_subcommand("run", "run the pipeline once and write its artifacts");
  add_common(run, run_flags);

  auto* bench = app.add_subcommand("bench", "aligned vs pose-shuffled vs unaligned over consecutive seeds");
  add_common(bench, bench_flags);
  std::uint64_t first_seed = 1;
  std::size_t seed_count = 10;
  bench->add_option("--first-seed", first_seed, "first benchmark seed");
  bench->add_option("--seeds", seed_count, "number of seeds")->check(CLI::PositiveNumber);

  auto* exp = app.add_subcommand("export", "write voxel grids, every affinity heatmap and params");
  add_common(exp, export_flags);
  std::vector<std::string> inspect;
  std::optional<std::size_t> group;
  exp->add_option("--inspect", inspect, "summarize existing HISOPVOX or HISOPPAR files instead");
  exp->add_option("--group", group, "only export heatmaps of this affinity group (0..2)")->check(CLI::Range(0, 2));

  auto* selftest = app.add_subcommand("selftest", "run the property suite and print pass/fail counts");
  std::string data_dir, self_out = "hisop_selftest";
  std::vector<int> only;
  selftest->add_option("--data", data_dir, "directory holding plane.scene, plane.cfg and bench.cfg");
  selftest->add_option("--out", self_out, "scratch directory for run artifacts");
  selftest->add_option("--only", only, "criterion numbers to run")->take_all();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(run_flags);
    if (*bench) return cmd_bench(bench_flags, first_seed, seed_count);
    if (*exp) return cmd_export(export_flags, inspect, group);
    if (*selftest) {
      if (const char* env = std::getenv("HISOP_OUT"); env && *env) self_out = env;
      return cmd_selftest(data_dir, self_out, only);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
