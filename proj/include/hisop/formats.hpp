#pragma once

// On-disk formats: HISOPVOX voxel grids, HISOPPAR parameter bundles, PGM
// heatmaps and CSV metric reports. Byte layouts are documented in
// docs/formats.md. All multi-byte fields are little-endian.

#include <cstdint>
#include <string>
#include <vector>

#include "hisop/alignment.hpp"
#include "hisop/compose.hpp"
#include "hisop/numerics.hpp"

namespace hisop {

using Bytes = std::vector<std::uint8_t>;

enum class VoxelDtype : std::uint8_t { labels_u16 = 0, reals_f64 = 1 };

Bytes encode_voxel_grid(const SemanticVoxelGrid& grid);
/// A [nx, ny, nz] real-valued grid.
Bytes encode_voxel_reals(const DenseArray& grid);

/// Throws FormatError on a bad header, wrong dtype or truncated payload.
SemanticVoxelGrid decode_voxel_grid(const Bytes& bytes);
DenseArray decode_voxel_reals(const Bytes& bytes);

/// Returns the number of bytes written; IoError names the path on failure.
std::size_t export_voxel_grid(const SemanticVoxelGrid& grid, const std::string& path);
std::size_t export_voxel_reals(const DenseArray& grid, const std::string& path);
SemanticVoxelGrid read_voxel_grid(const std::string& path);
DenseArray read_voxel_reals(const std::string& path);

struct NamedArray {
  std::string name;
  DenseArray array;
  friend bool operator==(const NamedArray&, const NamedArray&) = default;
};

Bytes encode_params(const std::vector<NamedArray>& records);
std::vector<NamedArray> decode_params(const Bytes& bytes);
void write_params(const std::vector<NamedArray>& records, const std::string& path);
std::vector<NamedArray> read_params(const std::string& path);

/// 8-bit grayscale of one affinity slice: round((a + 1) / 2 * 255), clamped.
Bytes encode_heatmap(const PatternAffinity& affinity, std::size_t group, std::size_t depth_slice);
void export_heatmap(const PatternAffinity& affinity, std::size_t group, std::size_t depth_slice,
                    const std::string& path);

struct MetricsRow {
  std::string run_id;
  double iou = 0.0;
  double miou = 0.0;
  std::vector<double> per_class_iou;
  double l_depth = 0.0;
  double l_ce = 0.0;
  double wall_ms = 0.0;
};

/// Header then one row per entry, reals with 6 decimals. Every row must carry
/// the same number of classes.
std::string format_metrics_csv(const std::vector<MetricsRow>& rows);
void report_metrics(const std::vector<MetricsRow>& rows, const std::string& path);

Bytes read_file(const std::string& path);
void write_file(const std::string& path, const Bytes& bytes);
void write_text(const std::string& path, const std::string& text);

}  // namespace hisop
