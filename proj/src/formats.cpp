#include "hisop/formats.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include "hisop/errors.hpp"

namespace hisop {

namespace {

constexpr char kVoxMagic[8] = {'H', 'I', 'S', 'O', 'P', 'V', 'O', 'X'};
constexpr char kParMagic[8] = {'H', 'I', 'S', 'O', 'P', 'P', 'A', 'R'};
constexpr std::uint32_t kParVersion = 1;

void put_u16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(Bytes& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xffffffffu) throw ArgumentError(std::string(what) + " does not fit in 32 bits");
  return static_cast<std::uint32_t>(v);
}

class Reader {
 public:
  Reader(const Bytes& bytes, const char* what) : bytes_(bytes), what_(what) {}

  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError(std::string(what_) + ": truncated data");
  }
  void magic(const char (&expected)[8]) {
    need(8);
    if (std::memcmp(bytes_.data() + pos_, expected, 8) != 0) throw FormatError(std::string(what_) + ": bad magic");
    pos_ += 8;
  }
  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    const auto v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }
  std::string text(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t size() const { return bytes_.size(); }
  void finish() const {
    if (pos_ != bytes_.size()) throw FormatError(std::string(what_) + ": trailing bytes");
  }

 private:
  const Bytes& bytes_;
  const char* what_;
  std::size_t pos_ = 0;
};

Bytes voxel_header(std::size_t nx, std::size_t ny, std::size_t nz, VoxelDtype dtype) {
  Bytes out(std::begin(kVoxMagic), std::end(kVoxMagic));
  put_u32(out, checked_u32(nx, "grid extent"));
  put_u32(out, checked_u32(ny, "grid extent"));
  put_u32(out, checked_u32(nz, "grid extent"));
  out.push_back(static_cast<std::uint8_t>(dtype));
  return out;
}

struct VoxelHeader {
  std::size_t nx, ny, nz;
};

VoxelHeader read_voxel_header(Reader& r, VoxelDtype expected) {
  r.magic(kVoxMagic);
  VoxelHeader h{r.u32(), r.u32(), r.u32()};
  const std::uint8_t dtype = r.u8();
  if (dtype > 1) throw FormatError("HISOPVOX: unknown dtype " + std::to_string(dtype));
  if (dtype != static_cast<std::uint8_t>(expected)) throw FormatError("HISOPVOX: unexpected dtype");
  const std::size_t width = expected == VoxelDtype::labels_u16 ? 2 : 8;
  const std::size_t cells = h.nx * h.ny * h.nz;
  if (h.nx != 0 && h.ny != 0 && cells / h.nx / h.ny != h.nz) throw FormatError("HISOPVOX: extents overflow");
  if (cells > r.size()) throw FormatError("HISOPVOX: truncated data");
  r.need(cells * width);
  return h;
}

}  // namespace

Bytes read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return Bytes(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::string& path, const Bytes& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path + "'");
}

void write_text(const std::string& path, const std::string& text) { write_file(path, Bytes(text.begin(), text.end())); }

Bytes encode_voxel_grid(const SemanticVoxelGrid& grid) {
  if (grid.labels.size() != grid.nx * grid.ny * grid.nz) throw ShapeError("HISOPVOX: label count mismatch");
  Bytes out = voxel_header(grid.nx, grid.ny, grid.nz, VoxelDtype::labels_u16);
  out.reserve(out.size() + 2 * grid.size());
  for (const std::uint16_t v : grid.labels) put_u16(out, v);
  return out;
}

Bytes encode_voxel_reals(const DenseArray& grid) {
  require_rank(grid, 3, "HISOPVOX reals");
  Bytes out = voxel_header(grid.extent(0), grid.extent(1), grid.extent(2), VoxelDtype::reals_f64);
  out.reserve(out.size() + 8 * grid.size());
  for (const double v : grid.values()) put_f64(out, v);
  return out;
}

SemanticVoxelGrid decode_voxel_grid(const Bytes& bytes) {
  Reader r(bytes, "HISOPVOX");
  const VoxelHeader h = read_voxel_header(r, VoxelDtype::labels_u16);
  SemanticVoxelGrid grid(h.nx, h.ny, h.nz);
  for (auto& v : grid.labels) v = r.u16();
  r.finish();
  return grid;
}

DenseArray decode_voxel_reals(const Bytes& bytes) {
  Reader r(bytes, "HISOPVOX");
  const VoxelHeader h = read_voxel_header(r, VoxelDtype::reals_f64);
  if (h.nx == 0 || h.ny == 0 || h.nz == 0) throw FormatError("HISOPVOX: empty real grid");
  DenseArray grid({h.nx, h.ny, h.nz});
  for (double& v : grid.values()) v = r.f64();
  r.finish();
  return grid;
}

std::size_t export_voxel_grid(const SemanticVoxelGrid& grid, const std::string& path) {
  const Bytes bytes = encode_voxel_grid(grid);
  write_file(path, bytes);
  return bytes.size();
}

std::size_t export_voxel_reals(const DenseArray& grid, const std::string& path) {
  const Bytes bytes = encode_voxel_reals(grid);
  write_file(path, bytes);
  return bytes.size();
}

SemanticVoxelGrid read_voxel_grid(const std::string& path) { return decode_voxel_grid(read_file(path)); }
DenseArray read_voxel_reals(const std::string& path) { return decode_voxel_reals(read_file(path)); }

Bytes encode_params(const std::vector<NamedArray>& records) {
  Bytes out(std::begin(kParMagic), std::end(kParMagic));
  put_u32(out, kParVersion);
  put_u32(out, checked_u32(records.size(), "record count"));
  for (const auto& rec : records) {
    put_u32(out, checked_u32(rec.name.size(), "name length"));
    out.insert(out.end(), rec.name.begin(), rec.name.end());
    put_u32(out, checked_u32(rec.array.rank(), "rank"));
    for (const std::size_t e : rec.array.shape()) put_u32(out, checked_u32(e, "extent"));
    for (const double v : rec.array.values()) put_f64(out, v);
  }
  return out;
}

std::vector<NamedArray> decode_params(const Bytes& bytes) {
  Reader r(bytes, "HISOPPAR");
  r.magic(kParMagic);
  if (const auto version = r.u32(); version != kParVersion)
    throw FormatError("HISOPPAR: unsupported version " + std::to_string(version));
  const std::uint32_t count = r.u32();
  std::vector<NamedArray> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedArray rec;
    rec.name = r.text(r.u32());
    const std::uint32_t rank = r.u32();
    if (rank == 0) throw FormatError("HISOPPAR: record '" + rec.name + "' has rank 0");
    Shape shape;
    std::size_t n = 1;
    for (std::uint32_t a = 0; a < rank; ++a) {
      shape.push_back(r.u32());
      if (shape.back() == 0) throw FormatError("HISOPPAR: record '" + rec.name + "' has a zero extent");
      n *= shape.back();
      if (n > bytes.size()) throw FormatError("HISOPPAR: record '" + rec.name + "' exceeds the file");
    }
    r.need(n * 8);
    std::vector<double> data(n);
    for (double& v : data) v = r.f64();
    rec.array = DenseArray(std::move(shape), std::move(data));
    out.push_back(std::move(rec));
  }
  r.finish();
  return out;
}

void write_params(const std::vector<NamedArray>& records, const std::string& path) {
  write_file(path, encode_params(records));
}

std::vector<NamedArray> read_params(const std::string& path) { return decode_params(read_file(path)); }

Bytes encode_heatmap(const PatternAffinity& affinity, std::size_t group, std::size_t depth_slice) {
  const DenseArray& a = affinity.values;
  require_rank(a, 4, "export_heatmap");
  if (group >= a.extent(0))
    throw ArgumentError("export_heatmap: group " + std::to_string(group) + " out of range [0, " +
                        std::to_string(a.extent(0)) + ")");
  if (depth_slice >= a.extent(1))
    throw ArgumentError("export_heatmap: depth slice " + std::to_string(depth_slice) + " out of range [0, " +
                        std::to_string(a.extent(1)) + ")");
  const std::size_t H = a.extent(2), W = a.extent(3);
  const std::string header = "P5\n" + std::to_string(W) + " " + std::to_string(H) + "\n255\n";
  Bytes out(header.begin(), header.end());
  const double* src = &a[a.offset(group, depth_slice, 0, 0)];
  for (std::size_t i = 0; i < H * W; ++i) {
    const double v = std::round((src[i] + 1.0) / 2.0 * 255.0);
    out.push_back(static_cast<std::uint8_t>(std::clamp(std::isnan(v) ? 0.0 : v, 0.0, 255.0)));
  }
  return out;
}

void export_heatmap(const PatternAffinity& affinity, std::size_t group, std::size_t depth_slice,
                    const std::string& path) {
  write_file(path, encode_heatmap(affinity, group, depth_slice));
}

std::string format_metrics_csv(const std::vector<MetricsRow>& rows) {
  if (rows.empty()) throw ArgumentError("report_metrics: no runs to report");
  const std::size_t classes = rows.front().per_class_iou.size();
  std::string out = "run_id,iou,miou";
  for (std::size_t k = 1; k <= classes; ++k) out += ",iou_c" + std::to_string(k);
  out += ",l_depth,l_ce,wall_ms\n";
  auto real = [](double v) {
    if (std::isnan(v)) return std::string("nan");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::string(buf);
  };
  for (const auto& row : rows) {
    if (row.per_class_iou.size() != classes)
      throw ArgumentError("report_metrics: run '" + row.run_id + "' has a different class count");
    if (row.run_id.find_first_of(",\n\"") != std::string::npos)
      throw ArgumentError("report_metrics: run id '" + row.run_id + "' contains a separator");
    out += row.run_id + "," + real(row.iou) + "," + real(row.miou);
    for (const double v : row.per_class_iou) out += "," + real(v);
    out += "," + real(row.l_depth) + "," + real(row.l_ce) + "," + real(row.wall_ms) + "\n";
  }
  return out;
}

void report_metrics(const std::vector<MetricsRow>& rows, const std::string& path) {
  write_text(path, format_metrics_csv(rows));
}

}  // namespace hisop
