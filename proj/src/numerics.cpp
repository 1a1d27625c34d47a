#include "hisop/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "hisop/errors.hpp"
#include "hisop/parallel.hpp"

namespace hisop {

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

DenseArray::DenseArray(Shape shape, double fill) : shape_(std::move(shape)) {
  for (auto e : shape_)
    if (e == 0) throw ShapeError("zero extent in shape " + to_string(shape_));
  data_.assign(element_count(shape_), fill);
}

DenseArray::DenseArray(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto e : shape_)
    if (e == 0) throw ShapeError("zero extent in shape " + to_string(shape_));
  if (data_.size() != element_count(shape_))
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                     to_string(shape_));
}

std::size_t DenseArray::extent(std::size_t axis) const {
  if (axis >= shape_.size())
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + to_string(shape_));
  return shape_[axis];
}

DenseArray DenseArray::reshaped(Shape shape) const { return DenseArray(std::move(shape), data_); }

bool DenseArray::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double DenseArray::sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

void require_rank(const DenseArray& array, std::size_t rank, const char* what) {
  if (array.rank() != rank)
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got shape " +
                     to_string(array.shape()));
}

DenseArray softmax(const DenseArray& values, std::size_t axis) {
  if (axis >= values.rank())
    throw ShapeError("softmax axis " + std::to_string(axis) + " out of range for shape " +
                     to_string(values.shape()));
  const auto& s = values.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t a = 0; a < axis; ++a) outer *= s[a];
  for (std::size_t a = axis + 1; a < s.size(); ++a) inner *= s[a];
  const std::size_t n = s[axis];

  DenseArray out(s);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * n * inner + i;
      double peak = values[base];
      for (std::size_t k = 1; k < n; ++k) peak = std::max(peak, values[base + k * inner]);
      double total = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const double e = std::exp(values[base + k * inner] - peak);
        out[base + k * inner] = e;
        total += e;
      }
      for (std::size_t k = 0; k < n; ++k) out[base + k * inner] /= total;
    }
  }
  return out;
}

namespace {

// Corner index and weight along one axis; index is -1 when the corner falls
// outside under the zero policy.
struct AxisTaps {
  std::ptrdiff_t lo, hi;
  double w_lo, w_hi;
};

AxisTaps axis_taps(double coord, std::size_t extent, Border border) {
  const auto n = static_cast<std::ptrdiff_t>(extent);
  if (border == Border::clamp) coord = std::clamp(coord, 0.0, static_cast<double>(n - 1));
  const double fl = std::floor(coord);
  const double frac = coord - fl;
  auto lo = static_cast<std::ptrdiff_t>(fl);
  auto hi = lo + 1;
  if (border == Border::clamp) {
    lo = std::clamp<std::ptrdiff_t>(lo, 0, n - 1);
    hi = std::clamp<std::ptrdiff_t>(hi, 0, n - 1);
  } else {
    if (lo < 0 || lo >= n) lo = -1;
    if (hi < 0 || hi >= n) hi = -1;
  }
  return {lo, hi, 1.0 - frac, frac};
}

}  // namespace

void bilinear_sample_into(const DenseArray& map, double u, double v, Border border,
                          std::span<double> out) {
  const std::size_t C = map.extent(0), H = map.extent(1), W = map.extent(2);
  const AxisTaps tx = axis_taps(u, W, border);
  const AxisTaps ty = axis_taps(v, H, border);
  std::fill(out.begin(), out.end(), 0.0);
  const std::ptrdiff_t ys[2] = {ty.lo, ty.hi};
  const double wy[2] = {ty.w_lo, ty.w_hi};
  const std::ptrdiff_t xs[2] = {tx.lo, tx.hi};
  const double wx[2] = {tx.w_lo, tx.w_hi};
  const std::size_t plane = H * W;
  for (int a = 0; a < 2; ++a) {
    if (ys[a] < 0) continue;
    for (int b = 0; b < 2; ++b) {
      if (xs[b] < 0) continue;
      const double w = wy[a] * wx[b];
      const std::size_t off = static_cast<std::size_t>(ys[a]) * W + static_cast<std::size_t>(xs[b]);
      for (std::size_t c = 0; c < C; ++c) out[c] += w * map[c * plane + off];
    }
  }
}

std::vector<double> bilinear_sample(const DenseArray& map, double u, double v, Border border) {
  require_rank(map, 3, "bilinear_sample");
  std::vector<double> out(map.extent(0));
  bilinear_sample_into(map, u, v, border, out);
  return out;
}

TrilinearStencil trilinear_stencil(std::size_t D, std::size_t H, std::size_t W, double x, double y,
                                   double z, Border border) {
  const AxisTaps tx = axis_taps(x, W, border);
  const AxisTaps ty = axis_taps(y, H, border);
  const AxisTaps tz = axis_taps(z, D, border);
  const std::ptrdiff_t zs[2] = {tz.lo, tz.hi}, ys[2] = {ty.lo, ty.hi}, xs[2] = {tx.lo, tx.hi};
  const double wz[2] = {tz.w_lo, tz.w_hi}, wy[2] = {ty.w_lo, ty.w_hi}, wx[2] = {tx.w_lo, tx.w_hi};
  TrilinearStencil st;
  for (int a = 0; a < 2; ++a) {
    if (zs[a] < 0) continue;
    for (int b = 0; b < 2; ++b) {
      if (ys[b] < 0) continue;
      for (int e = 0; e < 2; ++e) {
        if (xs[e] < 0) continue;
        const double w = wz[a] * wy[b] * wx[e];
        if (w == 0.0) continue;
        st.offset[st.count] = (static_cast<std::size_t>(zs[a]) * H + static_cast<std::size_t>(ys[b])) * W +
                              static_cast<std::size_t>(xs[e]);
        st.weight[st.count] = w;
        ++st.count;
      }
    }
  }
  return st;
}

void trilinear_sample_into(const DenseArray& vol, double x, double y, double z, Border border,
                           std::span<double> out) {
  const std::size_t C = vol.extent(0), D = vol.extent(1), H = vol.extent(2), W = vol.extent(3);
  const TrilinearStencil st = trilinear_stencil(D, H, W, x, y, z, border);
  std::fill(out.begin(), out.end(), 0.0);
  const std::size_t volume = D * H * W;
  for (int k = 0; k < st.count; ++k)
    for (std::size_t c = 0; c < C; ++c) out[c] += st.weight[k] * vol[c * volume + st.offset[k]];
}

std::vector<double> trilinear_sample(const DenseArray& vol, double x, double y, double z,
                                     Border border) {
  require_rank(vol, 4, "trilinear_sample");
  std::vector<double> out(vol.extent(0));
  trilinear_sample_into(vol, x, y, z, border, out);
  return out;
}

ScatterResult scatter_add(std::size_t size, std::span<const std::int64_t> indices,
                          std::span<const double> values) {
  if (indices.size() != values.size())
    throw ShapeError("scatter_add: " + std::to_string(indices.size()) + " indices vs " +
                     std::to_string(values.size()) + " values");
  ScatterResult r{DenseArray({size}), 0, 0.0};
  for (std::size_t j = 0; j < indices.size(); ++j) {
    const auto idx = indices[j];
    if (idx < 0 || static_cast<std::size_t>(idx) >= size) {
      ++r.dropped;
      r.dropped_mass += values[j];
      continue;
    }
    r.out[static_cast<std::size_t>(idx)] += values[j];
  }
  return r;
}

ChannelScatterResult scatter_add_channels(std::size_t size, std::span<const std::int64_t> indices,
                                          const DenseArray& values) {
  require_rank(values, 2, "scatter_add_channels");
  const std::size_t C = values.extent(0), N = values.extent(1);
  if (indices.size() != N)
    throw ShapeError("scatter_add_channels: " + std::to_string(indices.size()) + " indices vs " +
                     std::to_string(N) + " columns");
  ChannelScatterResult r{DenseArray({C, size}), 0, std::vector<double>(C, 0.0)};

  auto in_range = [size](std::int64_t idx) { return idx >= 0 && static_cast<std::size_t>(idx) < size; };
  for (std::size_t j = 0; j < N; ++j) {
    if (in_range(indices[j])) continue;
    ++r.dropped;
    for (std::size_t c = 0; c < C; ++c) r.dropped_mass[c] += values[c * N + j];
  }

  if (thread_count() <= 1) {
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t j = 0; j < N; ++j)
        if (in_range(indices[j])) r.out[c * size + static_cast<std::size_t>(indices[j])] += values[c * N + j];
    return r;
  }

  // Stable counting sort by cell keeps each cell's entries in input order.
  std::vector<std::size_t> start(size + 1, 0);
  for (std::size_t j = 0; j < N; ++j)
    if (in_range(indices[j])) ++start[static_cast<std::size_t>(indices[j]) + 1];
  std::partial_sum(start.begin(), start.end(), start.begin());
  std::vector<std::size_t> order(start.back());
  {
    std::vector<std::size_t> cursor(start.begin(), start.end() - 1);
    for (std::size_t j = 0; j < N; ++j)
      if (in_range(indices[j])) order[cursor[static_cast<std::size_t>(indices[j])]++] = j;
  }
  parallel_for(size, [&](std::size_t begin, std::size_t end) {
    for (std::size_t cell = begin; cell < end; ++cell)
      for (std::size_t c = 0; c < C; ++c) {
        double acc = 0.0;
        for (std::size_t k = start[cell]; k < start[cell + 1]; ++k) acc += values[c * N + order[k]];
        r.out[c * size + cell] = acc;
      }
  });
  return r;
}

void Conv3DKernel::validate() const {
  if (weights.rank() != 5) throw ShapeError("Conv3DKernel: weights must be rank 5, got " + to_string(weights.shape()));
  const std::size_t k = weights.extent(2);
  if (weights.extent(3) != k || weights.extent(4) != k)
    throw ShapeError("Conv3DKernel: kernel must be cubic, got " + to_string(weights.shape()));
  if (k % 2 == 0) throw ShapeError("Conv3DKernel: kernel size must be odd");
  if (dilation == 0) throw ArgumentError("Conv3DKernel: dilation must be positive");
  if (bias && bias->size() != out_channels())
    throw ShapeError("Conv3DKernel: bias length does not match out channels");
}

DenseArray dilated_conv3d(const DenseArray& vol, const Conv3DKernel& kernel) {
  require_rank(vol, 4, "dilated_conv3d");
  kernel.validate();
  const std::size_t C = vol.extent(0), D = vol.extent(1), H = vol.extent(2), W = vol.extent(3);
  if (kernel.in_channels() != C)
    throw ShapeError("dilated_conv3d: kernel expects " + std::to_string(kernel.in_channels()) +
                     " input channels, volume has " + std::to_string(C));
  const std::size_t O = kernel.out_channels(), k = kernel.size();
  const auto r = static_cast<std::ptrdiff_t>(k / 2);
  const auto dil = static_cast<std::ptrdiff_t>(kernel.dilation);

  struct Tap {
    std::size_t in;
    std::ptrdiff_t dz, dy, dx;
    double w;
  };
  std::vector<std::vector<Tap>> taps(O);
  for (std::size_t o = 0; o < O; ++o)
    for (std::size_t i = 0; i < C; ++i)
      for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = 0; b < k; ++b)
          for (std::size_t e = 0; e < k; ++e) {
            const double w = kernel.weights.at(o, i, a, b, e);
            if (w == 0.0) continue;
            taps[o].push_back({i, (static_cast<std::ptrdiff_t>(a) - r) * dil,
                               (static_cast<std::ptrdiff_t>(b) - r) * dil,
                               (static_cast<std::ptrdiff_t>(e) - r) * dil, w});
          }

  DenseArray out({O, D, H, W});
  const auto Di = static_cast<std::ptrdiff_t>(D), Hi = static_cast<std::ptrdiff_t>(H),
             Wi = static_cast<std::ptrdiff_t>(W);
  parallel_for(O * D, [&](std::size_t begin, std::size_t end) {
    for (std::size_t row = begin; row < end; ++row) {
      const std::size_t o = row / D;
      const auto z = static_cast<std::ptrdiff_t>(row % D);
      double* dst = &out[row * H * W];
      const double b = kernel.bias ? (*kernel.bias)[o] : 0.0;
      std::fill(dst, dst + H * W, b);
      for (const Tap& t : taps[o]) {
        const std::ptrdiff_t zz = z + t.dz;
        if (zz < 0 || zz >= Di) continue;
        const double* src = &vol[(t.in * D + static_cast<std::size_t>(zz)) * H * W];
        const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -t.dx);
        const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(Wi, Wi - t.dx);
        for (std::ptrdiff_t y = 0; y < Hi; ++y) {
          const std::ptrdiff_t yy = y + t.dy;
          if (yy < 0 || yy >= Hi) continue;
          double* drow = dst + y * Wi;
          const double* srow = src + yy * Wi + t.dx;
          for (std::ptrdiff_t x = x0; x < x1; ++x) drow[x] += t.w * srow[x];
        }
      }
    }
  });
  return out;
}

}  // namespace hisop
