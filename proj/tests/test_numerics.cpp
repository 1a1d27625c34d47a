#include <Eigen/Geometry>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "hisop/errors.hpp"
#include "hisop/numerics.hpp"
#include "hisop/parallel.hpp"
#include "support.hpp"

using namespace hisop;
using hisop::test::Rng;
using hisop::test::random_array;

TEST_CASE("dense array stores product-of-extents values") {
  DenseArray a({2, 3, 4}, 1.5);
  CHECK(a.size() == 24);
  CHECK(a.rank() == 3);
  CHECK(a.at(1, 2, 3) == 1.5);
  CHECK(a.offset(1, 2, 3) == 23);
  CHECK(a.sum() == doctest::Approx(36.0));
  CHECK_THROWS_AS(DenseArray({2, 2}, std::vector<double>(3)), ShapeError);
  CHECK_THROWS_AS(a.reshaped({5, 5}), ShapeError);
  CHECK(a.reshaped({24}).size() == 24);
}

TEST_CASE("softmax on analytic inputs") {
  const DenseArray two = softmax(DenseArray({2}, std::vector<double>{0.0, 0.0}), 0);
  CHECK(two[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(two[1] == doctest::Approx(0.5).epsilon(1e-15));
  const DenseArray three = softmax(DenseArray({3}, std::vector<double>{std::log(2.0), 0.0, 0.0}), 0);
  CHECK(std::abs(three[0] - 0.5) <= 1e-15);
  CHECK(std::abs(three[1] - 0.25) <= 1e-15);
  CHECK(std::abs(three[2] - 0.25) <= 1e-15);
  CHECK_THROWS_AS(softmax(DenseArray({3}), 1), ShapeError);
}

TEST_CASE("softmax matches a two-pass loop along every axis") {
  Rng rng(11);
  const DenseArray v = random_array(rng, {16}, -5.0, 5.0);
  const DenseArray s = softmax(v, 0);
  double z = 0.0;
  for (std::size_t i = 0; i < 16; ++i) z += std::exp(v[i]);
  for (std::size_t i = 0; i < 16; ++i) CHECK(std::abs(s[i] - std::exp(v[i]) / z) <= 1e-12);

  const DenseArray m = random_array(rng, {3, 4, 5}, -30.0, 30.0);
  for (std::size_t axis = 0; axis < 3; ++axis) {
    const DenseArray out = softmax(m, axis);
    CHECK(out.all_finite());
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t b = 0; b < 4; ++b)
        for (std::size_t c = 0; c < 5; ++c) {
          std::size_t idx[3] = {a, b, c};
          double zz = 0.0, mx = -1e300;
          const std::size_t n = m.extent(axis);
          for (std::size_t k = 0; k < n; ++k) {
            idx[axis] = k;
            mx = std::max(mx, m.at(idx[0], idx[1], idx[2]));
          }
          for (std::size_t k = 0; k < n; ++k) {
            idx[axis] = k;
            zz += std::exp(m.at(idx[0], idx[1], idx[2]) - mx);
          }
          const double expect = std::exp(m.at(a, b, c) - mx) / zz;
          CHECK(std::abs(out.at(a, b, c) - expect) <= 1e-12);
        }
  }
}

TEST_CASE("softmax stays finite on extreme logits") {
  const DenseArray s = softmax(DenseArray({3}, std::vector<double>{1e300, -1e300, 0.0}), 0);
  CHECK(s.all_finite());
  CHECK(s[0] == 1.0);
}

namespace {

double map_value(const DenseArray& m, std::size_t c, long r, long col) {
  if (r < 0 || col < 0 || r >= static_cast<long>(m.extent(1)) || col >= static_cast<long>(m.extent(2))) return 0.0;
  return m.at(c, r, col);
}

}  // namespace

TEST_CASE("bilinear sampling") {
  Rng rng(12);
  const DenseArray m = random_array(rng, {2, 5, 6});
  const auto lattice = bilinear_sample(m, 2.0, 3.0);
  CHECK(lattice[0] == m.at(0, 3, 2));
  CHECK(lattice[1] == m.at(1, 3, 2));

  const DenseArray corners({1, 2, 2}, std::vector<double>{0.0, 1.0, 2.0, 3.0});
  CHECK(std::abs(bilinear_sample(corners, 0.5, 0.5)[0] - 1.5) <= 1e-15);

  for (int i = 0; i < 100; ++i) {
    const double u = rng.uniform(-1.0, 6.0), v = rng.uniform(-1.0, 5.0);
    const auto got = bilinear_sample(m, u, v, Border::zero);
    const long u0 = static_cast<long>(std::floor(u)), v0 = static_cast<long>(std::floor(v));
    const double fu = u - u0, fv = v - v0;
    for (std::size_t c = 0; c < 2; ++c) {
      const double expect = (1 - fu) * (1 - fv) * map_value(m, c, v0, u0) + fu * (1 - fv) * map_value(m, c, v0, u0 + 1) +
                            (1 - fu) * fv * map_value(m, c, v0 + 1, u0) + fu * fv * map_value(m, c, v0 + 1, u0 + 1);
      CHECK(std::abs(got[c] - expect) <= 1e-12);
    }
  }
}

TEST_CASE("bilinear clamp border repeats the edge") {
  const DenseArray m({1, 2, 2}, std::vector<double>{1.0, 2.0, 3.0, 4.0});
  CHECK(bilinear_sample(m, -3.0, 0.0, Border::clamp)[0] == doctest::Approx(1.0));
  CHECK(bilinear_sample(m, 5.0, 5.0, Border::clamp)[0] == doctest::Approx(4.0));
  CHECK(bilinear_sample(m, 5.0, 5.0, Border::zero)[0] == 0.0);
}

TEST_CASE("trilinear sampling") {
  Rng rng(13);
  const DenseArray vol = random_array(rng, {2, 3, 4, 5});
  const auto lattice = trilinear_sample(vol, 4.0, 1.0, 2.0);
  CHECK(lattice[0] == vol.at(0, 2, 1, 4));
  CHECK(lattice[1] == vol.at(1, 2, 1, 4));

  DenseArray cube({1, 2, 2, 2});
  for (std::size_t i = 0; i < 8; ++i) cube[i] = static_cast<double>(i);
  CHECK(std::abs(trilinear_sample(cube, 0.5, 0.5, 0.5)[0] - 3.5) <= 1e-15);

  auto value = [&](std::size_t c, long z, long y, long x) {
    if (z < 0 || y < 0 || x < 0 || z >= 3 || y >= 4 || x >= 5) return 0.0;
    return vol.at(c, z, y, x);
  };
  for (int i = 0; i < 100; ++i) {
    const double x = rng.uniform(-1.0, 5.0), y = rng.uniform(-1.0, 4.0), z = rng.uniform(-1.0, 3.0);
    const auto got = trilinear_sample(vol, x, y, z);
    const long x0 = static_cast<long>(std::floor(x)), y0 = static_cast<long>(std::floor(y)),
               z0 = static_cast<long>(std::floor(z));
    const double fx = x - x0, fy = y - y0, fz = z - z0;
    for (std::size_t c = 0; c < 2; ++c) {
      double expect = 0.0;
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
          for (int e = 0; e < 2; ++e)
            expect += (a ? fz : 1 - fz) * (b ? fy : 1 - fy) * (e ? fx : 1 - fx) * value(c, z0 + a, y0 + b, x0 + e);
      CHECK(std::abs(got[c] - expect) <= 1e-12);
    }
  }
}

TEST_CASE("scatter_add") {
  const std::vector<std::int64_t> idx{0, 0, 1};
  const std::vector<double> val{1.0, 2.0, 3.0};
  const ScatterResult r = scatter_add(2, idx, val);
  CHECK(r.out[0] == 3.0);
  CHECK(r.out[1] == 3.0);
  CHECK(r.dropped == 0);

  const ScatterResult empty = scatter_add(4, {}, {});
  CHECK(empty.out == DenseArray({4}));

  Rng rng(14);
  std::vector<std::int64_t> many(10000);
  std::vector<double> mass(10000);
  double total = 0.0;
  for (std::size_t j = 0; j < many.size(); ++j) {
    many[j] = static_cast<std::int64_t>(rng.pick(0, 120)) - 10;
    mass[j] = rng.uniform(0.0, 2.0);
    total += mass[j];
  }
  const ScatterResult big = scatter_add(100, many, mass);
  CHECK(big.dropped > 0);
  CHECK(std::abs(big.out.sum() + big.dropped_mass - total) <= 1e-9 * total);

  CHECK_THROWS_AS(scatter_add(2, idx, std::vector<double>{1.0}), ShapeError);
}

TEST_CASE("channel scatter is bitwise identical across thread counts") {
  Rng rng(15);
  const std::size_t N = 5000;
  std::vector<std::int64_t> idx(N);
  for (auto& i : idx) i = static_cast<std::int64_t>(rng.pick(0, 70)) - 5;
  const DenseArray values = random_array(rng, {3, N});
  set_thread_count(1);
  const ChannelScatterResult one = scatter_add_channels(64, idx, values);
  set_thread_count(4);
  const ChannelScatterResult four = scatter_add_channels(64, idx, values);
  set_thread_count(1);
  CHECK(one.out == four.out);
  CHECK(one.dropped == four.dropped);
  CHECK(one.dropped_mass == four.dropped_mass);
  for (std::size_t c = 0; c < 3; ++c) {
    std::vector<double> row(values.values().begin() + c * N, values.values().begin() + (c + 1) * N);
    const ScatterResult single = scatter_add(64, idx, row);
    for (std::size_t i = 0; i < 64; ++i) CHECK(single.out[i] == one.out[c * 64 + i]);
  }
}

namespace {

Conv3DKernel identity_kernel(std::size_t C) {
  Conv3DKernel k{DenseArray({C, C, 3, 3, 3}), 1, std::nullopt};
  for (std::size_t c = 0; c < C; ++c) k.weights.at(c, c, 1, 1, 1) = 1.0;
  return k;
}

}  // namespace

TEST_CASE("dilated conv3d") {
  Rng rng(16);
  const DenseArray vol = random_array(rng, {2, 4, 5, 6});
  CHECK(dilated_conv3d(vol, identity_kernel(2)) == vol);

  const DenseArray ones({1, 5, 5, 5}, 1.0);
  const Conv3DKernel all{DenseArray({1, 1, 3, 3, 3}, 1.0), 1, std::nullopt};
  const DenseArray counted = dilated_conv3d(ones, all);
  CHECK(counted.at(0, 2, 2, 2) == 27.0);
  CHECK(counted.at(0, 0, 0, 0) == 8.0);

  const DenseArray in = random_array(rng, {2, 5, 6, 7});
  Conv3DKernel k{random_array(rng, {3, 2, 3, 3, 3}), 2, std::vector<double>{0.1, -0.2, 0.3}};
  const DenseArray out = dilated_conv3d(in, k);
  REQUIRE(out.shape() == Shape{3, 5, 6, 7});
  double worst = 0.0;
  for (std::size_t o = 0; o < 3; ++o)
    for (long z = 0; z < 5; ++z)
      for (long y = 0; y < 6; ++y)
        for (long x = 0; x < 7; ++x) {
          double acc = (*k.bias)[o];
          for (std::size_t i = 0; i < 2; ++i)
            for (long a = 0; a < 3; ++a)
              for (long b = 0; b < 3; ++b)
                for (long e = 0; e < 3; ++e) {
                  const long zz = z + 2 * (a - 1), yy = y + 2 * (b - 1), xx = x + 2 * (e - 1);
                  if (zz < 0 || yy < 0 || xx < 0 || zz >= 5 || yy >= 6 || xx >= 7) continue;
                  acc += k.weights.at(o, i, a, b, e) * in.at(i, zz, yy, xx);
                }
          worst = std::max(worst, std::abs(acc - out.at(o, z, y, x)));
        }
  CHECK(worst <= 1e-9);

  CHECK_THROWS_AS(dilated_conv3d(random_array(rng, {3, 2, 2, 2}), identity_kernel(2)), ShapeError);
  Conv3DKernel even{DenseArray({1, 1, 2, 2, 2}), 1, std::nullopt};
  CHECK_THROWS_AS(even.validate(), ShapeError);
}
