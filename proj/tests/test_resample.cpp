// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "oracles.hpp"
#include "remreg/resample.hpp"

using namespace remreg;
using testing::constant;
using testing::max_abs_diff;

namespace {

Tensor<double> zero_field(Index l, Index w, Index h) { return Tensor<double>(Shape(1, 3, l, w, h)); }

Tensor<double> constant_field(Index l, Index w, Index h, double du, double dv, double dw) {
  Tensor<double> f = zero_field(l, w, h);
  const Index n = l * w * h;
  for (Index i = 0; i < n; ++i) {
    f[i] = du;
    f[n + i] = dv;
    f[2 * n + i] = dw;
  }
  return f;
}

LabelVolume random_labels(std::array<Index, 3> dims, int max_label, std::mt19937_64& rng) {
  LabelVolume lab(dims);
  std::uniform_int_distribution<int> u(0, max_label);
  for (auto& v : lab.data) v = static_cast<std::uint16_t>(u(rng));
  return lab;
}

}  // namespace

TEST_SUITE("resample") {
  TEST_CASE("resize of a constant stays constant") {
    const Tensor<double> c(Shape(1, 1, 4, 6, 8), 0.37);
    for (double s : {0.5, 2.0, 1.5}) {
      auto out = trilinear_resize(constant(c), s);
      CHECK(out.shape().spatial_dims() == resized_dims(c.shape(), s));
      for (double v : out.value().data()) CHECK(v == doctest::Approx(0.37).epsilon(1e-14));
    }
  }

  TEST_CASE("scale 1 is the identity") {
    std::mt19937_64 rng(2);
    auto x = oracle::random_volume(Shape(2, 2, 3, 4, 5), rng);
    CHECK(trilinear_resize(constant(x), 1.0).value() == x);
  }

  TEST_CASE("ramp upscaled by 2 follows the coordinate formula") {
    auto x = Tensor<double>::from_data(Shape(1, 1, 1, 1, 4), {0, 1, 2, 3});
    auto out = trilinear_resize_to(constant(x), {1, 1, 8}).value();
    for (Index t = 0; t < 8; ++t) {
      const double src = std::clamp((t + 0.5) / 2.0 - 0.5, 0.0, 3.0);
      CHECK(out[t] == doctest::Approx(src).epsilon(1e-14));
    }
    CHECK(out[0] == 0.0);
    CHECK(out[1] == doctest::Approx(0.25));
    CHECK(out[7] == 3.0);
  }

  TEST_CASE("resize matches the pointwise oracle") {
    std::mt19937_64 rng(5);
    auto x = oracle::random_volume(Shape(2, 2, 4, 6, 5), rng);
    for (std::array<Index, 3> t : {std::array<Index, 3>{8, 12, 10}, {2, 3, 2}, {6, 9, 7}, {3, 4, 4}}) {
      auto got = trilinear_resize_to(constant(x), t);
      CHECK(max_abs_diff(got.value(), oracle::resize_to(x, t)) < 1e-12);
    }
  }

  TEST_CASE("zero field warps to the input exactly") {
    std::mt19937_64 rng(4);
    auto x = oracle::random_volume(Shape(2, 1, 4, 5, 3), rng);
    CHECK(warp_trilinear(constant(x), constant(zero_field(4, 5, 3))).value() == x);
  }

  TEST_CASE("integer shift of a ramp with border clamp") {
    auto x = testing::ramp<double>(Shape(1, 1, 4, 2, 2));
    auto out = warp_trilinear(constant(x), constant(constant_field(4, 2, 2, 1, 0, 0))).value();
    for (Index l = 0; l < 4; ++l)
      for (Index w = 0; w < 2; ++w)
        for (Index h = 0; h < 2; ++h) CHECK(out.at(0, 0, l, w, h) == x.at(0, 0, std::min<Index>(l + 1, 3), w, h));
  }

  TEST_CASE("half-voxel shift averages neighbours") {
    auto x = testing::ramp<double>(Shape(1, 1, 5, 1, 1));
    auto out = warp_trilinear(constant(x), constant(constant_field(5, 1, 1, 0.5, 0, 0))).value();
    for (Index l = 0; l < 4; ++l) CHECK(out[l] == doctest::Approx((x[l] + x[l + 1]) / 2));
    CHECK(out[4] == 4.0);
  }

  TEST_CASE("warp matches the trilinear oracle, including broadcast") {
    std::mt19937_64 rng(9);
    auto x = oracle::random_volume(Shape(2, 2, 4, 5, 6), rng);
    auto d = oracle::random_volume(Shape(1, 3, 4, 5, 6), rng, -2.5, 2.5);
    CHECK(max_abs_diff(warp_trilinear(constant(x), constant(d)).value(), oracle::warp(x, d)) < 1e-12);
    auto d2 = oracle::random_volume(Shape(2, 3, 4, 5, 6), rng, -1.5, 1.5);
    CHECK(max_abs_diff(warp_trilinear(constant(x), constant(d2)).value(), oracle::warp(x, d2)) < 1e-12);
    CHECK_THROWS_AS(warp_trilinear(constant(x), constant(zero_field(4, 5, 5))), DimensionError);
  }

  TEST_CASE("nearest-neighbour label transport") {
    std::mt19937_64 rng(11);
    auto lab = random_labels({4, 5, 6}, 5, rng);
    CHECK(warp_nearest(lab, zero_field(4, 5, 6)) == lab);
    CHECK(warp_nearest(lab, constant_field(4, 5, 6, 0.49, -0.49, 0.3)) == lab);

    auto shifted = warp_nearest(lab, constant_field(4, 5, 6, 0, 2, 0));
    for (Index l = 0; l < 4; ++l)
      for (Index w = 0; w < 5; ++w)
        for (Index h = 0; h < 6; ++h) CHECK(shifted.at(l, w, h) == lab.at(l, std::min<Index>(w + 2, 4), h));

    // 0.5 rounds up.
    auto half = warp_nearest(lab, constant_field(4, 5, 6, 0, 0, 0.5));
    CHECK(half.at(1, 1, 1) == lab.at(1, 1, 2));
  }

  TEST_CASE("shift overlap and differences") {
    CHECK(shift_overlap(Shape(1, 3, 4, 4, 4), ShiftVec(0, 0, 0)) == std::array<Index, 3>{4, 4, 4});
    CHECK(shift_overlap(Shape(1, 3, 4, 4, 4), ShiftVec(1, 0, 0)) == std::array<Index, 3>{3, 4, 4});

    std::mt19937_64 rng(1);
    auto z = oracle::random_volume(Shape(1, 3, 4, 4, 4), rng);
    auto d0 = shift_difference(constant(z), ShiftVec(0, 0, 0)).value();
    CHECK(d0.shape() == z.shape());
    for (double v : d0.data()) CHECK(v == 0.0);

    // Slopes 3 (L), 2 (W), 0.5 (H): z(x) - z(x + (1,1,1)) = -5.5 everywhere.
    Tensor<double> r(Shape(1, 1, 4, 4, 4));
    for (Index l = 0; l < 4; ++l)
      for (Index w = 0; w < 4; ++w)
        for (Index h = 0; h < 4; ++h) r.at(0, 0, l, w, h) = 3.0 * l + 2.0 * w + 0.5 * h;
    auto d = shift_difference(constant(r), ShiftVec(1, 1, 1)).value();
    CHECK(d.shape() == Shape(1, 1, 3, 3, 3));
    for (double v : d.data()) CHECK(v == doctest::Approx(-5.5));

    CHECK_THROWS_AS(ShiftVec(2, 0, 0), DimensionError);
    CHECK(all_shifts()[0].is_zero());
  }

  TEST_CASE("label resize uses the half-voxel grid") {
    LabelVolume lab({4, 1, 1});
    lab.data = {1, 2, 3, 4};
    auto down = resize_labels(lab, {2, 1, 1});
    // Centres 0.5 and 2.5 round up to voxels 1 and 3.
    CHECK(down.data == std::vector<std::uint16_t>{2, 4});
    auto up = resize_labels(lab, {8, 1, 1});
    CHECK(up.data == std::vector<std::uint16_t>{1, 1, 2, 2, 3, 3, 4, 4});
  }
}
