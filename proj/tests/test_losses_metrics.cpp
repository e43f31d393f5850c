// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "oracles.hpp"
#include "remreg/losses.hpp"
#include "remreg/metrics.hpp"
#include "remreg/ops.hpp"

using namespace remreg;
using testing::constant;

namespace {

LabelVolume random_labels(std::array<Index, 3> dims, int max_label, std::mt19937_64& rng) {
  LabelVolume lab(dims);
  std::uniform_int_distribution<int> u(0, max_label);
  for (auto& v : lab.data) v = static_cast<std::uint16_t>(u(rng));
  return lab;
}

Var<double> scalar(double v) { return constant(Tensor<double>::scalar(v)); }

}  // namespace

TEST_SUITE("losses") {
  TEST_CASE("lncc of an image with itself is close to one") {
    std::mt19937_64 rng(1);
    auto a = oracle::random_volume(Shape(1, 1, 6, 6, 6), rng, 0, 1);
    const double v = lncc(constant(a), constant(a), LnccCfg{3, 1e-5}).item();
    CHECK(v <= 1.0);
    CHECK(v > 1.0 - 1e-3);
  }

  TEST_CASE("lncc against a constant is close to zero") {
    std::mt19937_64 rng(1);
    auto a = oracle::random_volume(Shape(1, 1, 6, 6, 6), rng, 0, 1);
    // Constant zero keeps every zero-padded window constant too.
    const double v = lncc(constant(a), constant(Tensor<double>(a.shape(), 0.0)), LnccCfg{3, 1e-5}).item();
    CHECK(std::abs(v) < 1e-12);
  }

  TEST_CASE("lncc matches the brute-force window oracle") {
    std::mt19937_64 rng(2);
    for (int window : {3, 5}) {
      auto a = oracle::random_volume(Shape(2, 1, 5, 5, 5), rng, 0, 1);
      auto b = oracle::random_volume(Shape(2, 1, 5, 5, 5), rng, 0, 1);
      const double got = lncc(constant(a), constant(b), LnccCfg{window, 1e-5}).item();
      CHECK(std::abs(got - oracle::lncc(a, b, window, 1e-5)) < 1e-10);
    }
    CHECK_THROWS_AS((LnccCfg{4, 1e-5}).validate(), ConfigError);
  }

  TEST_CASE("huber branches") {
    const double delta = 0.1;
    const Shape s(1, 1, 2, 2, 2);
    const Tensor<double> zero(s, 0.0);
    CHECK(huber(constant(zero), constant(zero), delta).item() == 0.0);
    CHECK(huber(constant(Tensor<double>(s, delta / 2)), constant(zero), delta).item() ==
          doctest::Approx(delta * delta / 8).epsilon(1e-12));
    CHECK(huber(constant(zero), constant(Tensor<double>(s, 3 * delta)), delta).item() ==
          doctest::Approx(2.5 * delta * delta).epsilon(1e-12));
    std::mt19937_64 rng(4);
    auto a = oracle::random_volume(s, rng), b = oracle::random_volume(s, rng);
    CHECK(huber(constant(a), constant(b), 0.3).item() == doctest::Approx(oracle::huber(a, b, 0.3)).epsilon(1e-14));
  }

  TEST_CASE("smoothness") {
    CHECK(smoothness(constant(Tensor<double>(Shape(1, 3, 4, 4, 4), 1.7))).item() == 0.0);

    Tensor<double> spike(Shape(1, 3, 3, 3, 3));
    spike.at(0, 0, 1, 1, 1) = 1.0;
    CHECK(smoothness(constant(spike)).item() == doctest::Approx(oracle::smoothness(spike)).epsilon(1e-15));
    // Each of the 7 shifts touches the spike from both sides once: 14 unit differences.
    CHECK(smoothness(constant(spike)).item() == 14.0);

    // Single shift (1,0,0) on a ramp of slope s along L.
    const double slope = 0.7;
    Tensor<double> ramp(Shape(1, 1, 4, 3, 5));
    for (Index l = 0; l < 4; ++l)
      for (Index w = 0; w < 3; ++w)
        for (Index h = 0; h < 5; ++h) ramp.at(0, 0, l, w, h) = slope * l;
    auto d = shift_difference(constant(ramp), ShiftVec(1, 0, 0));
    CHECK(sum(mul(d, d)).item() == doctest::Approx(slope * slope * 3 * 3 * 5).epsilon(1e-14));

    std::mt19937_64 rng(5);
    auto z = oracle::random_volume(Shape(1, 3, 5, 4, 5), rng);
    CHECK(std::abs(smoothness(constant(z)).item() - oracle::smoothness(z)) < 1e-10);
  }

  TEST_CASE("main loss") {
    std::mt19937_64 rng(6);
    auto f = oracle::random_volume(Shape(1, 1, 8, 8, 8), rng, 0, 1);
    auto zero = constant(Tensor<double>(Shape(1, 3, 8, 8, 8)));
    const double same = main_loss(zero, constant(f), constant(f), LnccCfg{5, 1e-5}).item();
    CHECK(same == doctest::Approx(-1.0).epsilon(1e-3));
    // Independent zero-mean noise: the expected squared window correlation is about 1/(n-1).
    auto g = oracle::random_volume(Shape(1, 1, 16, 16, 16), rng);
    auto h = oracle::random_volume(Shape(1, 1, 16, 16, 16), rng);
    auto zero16 = constant(Tensor<double>(Shape(1, 3, 16, 16, 16)));
    const double noise = main_loss(zero16, constant(g), constant(h), LnccCfg{5, 1e-5}).item();
    CHECK(noise < 0.0);
    CHECK(noise > -0.03);
  }

  TEST_CASE("aux loss") {
    std::mt19937_64 rng(7);
    const Shape s(1, 1, 8, 8, 8);
    auto up = oracle::random_volume(s, rng, 0, 1);
    auto dvf = oracle::random_volume(Shape(1, 3, 8, 8, 8), rng, -1.5, 1.5);
    auto zero_dvf = Tensor<double>(Shape(1, 3, 8, 8, 8));
    auto rem = build_rem<double>({RemVariant::I, 2, 1}, 3);

    auto sr = rem_forward(rem, constant(up));
    CHECK(aux_loss(&rem, constant(zero_dvf), constant(up), sr, 0.1).item() == 0.0);

    auto zero_rem = build_rem<double>({RemVariant::I, 2, 1}, 3, RemInit::zero);
    auto fixed = oracle::random_volume(s, rng, 0, 1);
    const double with_zero_rem = aux_loss(&zero_rem, constant(dvf), constant(up), constant(fixed), 0.1).item();
    CHECK(with_zero_rem == doctest::Approx(oracle::huber(oracle::warp(up, dvf), fixed, 0.1)).epsilon(1e-12));

    const double composed =
        huber(rem_forward(rem, warp_trilinear(constant(up), constant(dvf))), constant(fixed), 0.1).item();
    CHECK(aux_loss(&rem, constant(dvf), constant(up), constant(fixed), 0.1).item() == composed);
  }

  TEST_CASE("total loss weighting") {
    CHECK(total_loss(-1.0, 0.0, 0.0, LossWeights{3.0, 7.0}) == -1.0);
    CHECK(total_loss(-0.9, 0.02, 1000.0, LossWeights{10.0, 1e-8}) == doctest::Approx(-0.69999).epsilon(1e-12));
    CHECK(total_loss(-0.4, 5.0, 9.0, LossWeights{0.0, 0.0}) == -0.4);
    CHECK(total_loss(scalar(-0.9), scalar(0.02), scalar(1000.0), LossWeights{10.0, 1e-8}).item() ==
          doctest::Approx(-0.69999).epsilon(1e-12));
    CHECK_THROWS_AS((LossWeights{-1.0, 0.0}).validate(), ConfigError);
  }
}

TEST_SUITE("metrics") {
  TEST_CASE("dice examples") {
    std::mt19937_64 rng(1);
    auto a = random_labels({4, 4, 4}, 3, rng);
    CHECK(dice(a, a, {1, 2, 3}).mean == 1.0);

    LabelVolume x({1, 1, 8}), y({1, 1, 8});
    x.data = {1, 1, 1, 1, 0, 0, 0, 0};
    y.data = {0, 0, 0, 0, 1, 1, 1, 1};
    CHECK(dice(x, y, {1}).mean == 0.0);
    y.data = {0, 0, 1, 1, 1, 1, 0, 0};
    CHECK(dice(x, y, {1}).mean == 0.5);
    CHECK(dice(y, x, {1}).mean == 0.5);

    // Label 2 is absent from both and does not enter the mean; label 3 in one only scores 0.
    y.data[7] = 3;
    auto r = dice(x, y, {1, 2, 3});
    CHECK(r.per_label.count(2) == 0);
    CHECK(r.per_label.at(3) == 0.0);
  }

  TEST_CASE("ncc examples") {
    std::mt19937_64 rng(2);
    auto a = oracle::random_volume(Shape(1, 1, 4, 4, 4), rng);
    Tensor<double> b = a, neg = a;
    for (Index i = 0; i < a.numel(); ++i) {
      b[i] = 2 * a[i] + 3;
      neg[i] = -a[i];
    }
    CHECK(*ncc_global(a, b) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(*ncc_global(a, neg) == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK_FALSE(ncc_global(a, Tensor<double>(a.shape(), 0.5)).has_value());

    auto c = oracle::random_volume(a.shape(), rng);
    Tensor<double> c2 = c;
    for (double& v : c2.data()) v = 3.5 * v - 0.25;
    CHECK(std::abs(*ncc_global(a, c) - *ncc_global(a, c2)) < 1e-12);
  }

  TEST_CASE("psnr examples") {
    const Shape s(1, 1, 2, 2, 5);
    Tensor<double> a(s, 0.5), b(s, 0.6), c(s, 0.51);
    CHECK(psnr_identical(psnr(a, a)));
    CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-12));
    CHECK(psnr(a, c) == doctest::Approx(40.0).epsilon(1e-12));
    CHECK(psnr(a, b) < psnr(a, c));
  }

  TEST_CASE("ssim examples") {
    std::mt19937_64 rng(3);
    auto a = oracle::random_volume(Shape(1, 1, 5, 5, 5), rng, 0, 1);
    CHECK(ssim3d(a, a) == 1.0);
    const Tensor<double> half(a.shape(), 0.5);
    CHECK(ssim3d(half, half) == 1.0);
    CHECK_THROWS_AS(ssim3d(Tensor<double>(Shape(1, 1, 2, 5, 5)), Tensor<double>(Shape(1, 1, 2, 5, 5))),
                    DimensionError);
  }

  TEST_CASE("metrics match brute-force oracles on small random instances") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
      const Index n = 3 + trial % 3;
      const Shape s(1, 1, n, n, 5);
      auto a = oracle::random_volume(s, rng, 0, 1), b = oracle::random_volume(s, rng, 0, 1);
      CHECK(std::abs(*ncc_global(a, b) - oracle::ncc(a, b)) < 1e-10);
      CHECK(std::abs(psnr(a, b) - oracle::psnr(a, b)) < 1e-10);
      CHECK(std::abs(ssim3d(a, b) - oracle::ssim(a, b)) < 1e-10);
      auto la = random_labels({n, n, 5}, 4, rng), lb = random_labels({n, n, 5}, 4, rng);
      CHECK(std::abs(dice(la, lb, {1, 2, 3, 4}).mean - oracle::dice(la, lb, {1, 2, 3, 4})) < 1e-10);
    }
  }
}
