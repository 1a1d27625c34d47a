#pragma once

// Dense array substrate shared by every stage of the pipeline.
//
// Layout is row-major. Volumes use axis order [channel, depth, height, width];
// maps use [channel, height, width]. Sampling coordinates follow the image
// convention: x runs along width, y along height, z along depth.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hisop {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);

class DenseArray {
 public:
  DenseArray() = default;
  explicit DenseArray(Shape shape, double fill = 0.0);
  DenseArray(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t extent(std::size_t axis) const;
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  const double& operator[](std::size_t i) const { return data_[i]; }

  template <typename... Index>
  double& at(Index... index) {
    return data_[offset(index...)];
  }
  template <typename... Index>
  const double& at(Index... index) const {
    return data_[offset(index...)];
  }

  template <typename... Index>
  std::size_t offset(Index... index) const {
    const std::size_t idx[] = {static_cast<std::size_t>(index)...};
    std::size_t off = 0;
    for (std::size_t a = 0; a < sizeof...(Index); ++a) off = off * shape_[a] + idx[a];
    return off;
  }

  /// Same data viewed under a new shape with equal element count.
  DenseArray reshaped(Shape shape) const;

  bool all_finite() const;
  double sum() const;

  friend bool operator==(const DenseArray& a, const DenseArray& b) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

std::size_t element_count(const Shape& shape);

/// Throws ShapeError unless `array` has the given rank.
void require_rank(const DenseArray& array, std::size_t rank, const char* what);

enum class Border { zero, clamp };

/// Softmax along `axis` with max subtraction.
DenseArray softmax(const DenseArray& values, std::size_t axis);

/// Samples a [C,H,W] map at column `u`, row `v`.
std::vector<double> bilinear_sample(const DenseArray& map, double u, double v,
                                    Border border = Border::zero);
/// Writes the C sampled values into `out` (size C).
void bilinear_sample_into(const DenseArray& map, double u, double v, Border border,
                          std::span<double> out);

/// Corner offsets (into one [D,H,W] channel) and weights of a trilinear
/// sample; corners outside the volume under the zero policy are omitted.
struct TrilinearStencil {
  std::size_t offset[8];
  double weight[8];
  int count = 0;
};
TrilinearStencil trilinear_stencil(std::size_t D, std::size_t H, std::size_t W, double x, double y,
                                   double z, Border border);

/// Samples a [C,D,H,W] volume at (x = width, y = height, z = depth).
std::vector<double> trilinear_sample(const DenseArray& vol, double x, double y, double z,
                                     Border border = Border::zero);
void trilinear_sample_into(const DenseArray& vol, double x, double y, double z, Border border,
                           std::span<double> out);

struct ScatterResult {
  DenseArray out;
  std::size_t dropped = 0;
  double dropped_mass = 0.0;
};

/// out[i] = sum of values[j] with indices[j] == i, accumulated in input order.
/// Indices outside [0, size) are dropped and counted.
ScatterResult scatter_add(std::size_t size, std::span<const std::int64_t> indices,
                          std::span<const double> values);

struct ChannelScatterResult {
  DenseArray out;  // [C, size]
  std::size_t dropped = 0;
  std::vector<double> dropped_mass;  // per channel
};

/// Channel-batched scatter: values is [C, N], one index per column. With more
/// than one worker thread the entries are grouped per cell by a stable sort and
/// each cell reduces its entries in input order, so the result is bitwise equal
/// to the sequential path.
ChannelScatterResult scatter_add_channels(std::size_t size, std::span<const std::int64_t> indices,
                                          const DenseArray& values);

struct Conv3DKernel {
  DenseArray weights;  // [out_ch, in_ch, k, k, k], k odd
  std::size_t dilation = 1;
  std::optional<std::vector<double>> bias;

  std::size_t out_channels() const { return weights.extent(0); }
  std::size_t in_channels() const { return weights.extent(1); }
  std::size_t size() const { return weights.extent(2); }
  void validate() const;
};

/// Same-padded (zeros) dilated 3D convolution over a [C,D,H,W] volume.
DenseArray dilated_conv3d(const DenseArray& vol, const Conv3DKernel& kernel);

}  // namespace hisop
