// SPDX-License-Identifier: Apache-2.0
// Phantoms, degradation, RVOL volumes and checkpoints.
#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "helpers.hpp"
#include "oracles.hpp"
#include "remreg/checkpoint.hpp"
#include "remreg/metrics.hpp"
#include "remreg/phantom.hpp"
#include "remreg/volume_io.hpp"

using namespace remreg;
using testing::TempDir;

namespace {

PhantomCfg small_cfg() {
  PhantomCfg c;
  c.dims = {16, 16, 16};
  return c;
}

Tensor<float> volume_from(const std::function<double(Index, Index, Index)>& f, Index n) {
  Tensor<float> t(Shape(1, 1, n, n, n));
  for (Index l = 0; l < n; ++l)
    for (Index w = 0; w < n; ++w)
      for (Index h = 0; h < n; ++h) t.at(0, 0, l, w, h) = static_cast<float>(f(l, w, h));
  return t;
}

}  // namespace

TEST_SUITE("phantom") {
  TEST_CASE("generation is a pure function of the seed") {
    auto a = gen_phantom(5, small_cfg()), b = gen_phantom(5, small_cfg()), c = gen_phantom(6, small_cfg());
    CHECK(a.intensity == b.intensity);
    CHECK(a.labels == b.labels);
    CHECK_FALSE(a.intensity == c.intensity);
  }

  TEST_CASE("label histogram covers exactly 0..num_labels") {
    PhantomCfg cfg = small_cfg();
    cfg.num_labels = 4;
    auto s = gen_phantom(1, cfg);
    std::map<int, long> hist;
    for (auto v : s.labels.data) ++hist[v];
    CHECK(hist.size() == 5);
    for (int l = 0; l <= 4; ++l) CHECK(hist[l] > 0);
    for (float v : s.intensity.data()) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }

  TEST_CASE("zero amplitude reproduces the base phantom") {
    PhantomCfg cfg = small_cfg();
    cfg.deform_amplitude = 0.0;
    auto g = gen_phantom(3, cfg), b = base_phantom(3, cfg);
    CHECK(g.intensity == b.intensity);
    CHECK(g.labels == b.labels);
  }

  TEST_CASE("random smooth field") {
    auto zero = random_smooth_dvf(1, {16, 16, 16}, 0.0, 4.0);
    for (float v : zero.data()) CHECK(v == 0.0f);
    auto f = random_smooth_dvf(1, {16, 16, 16}, 2.5, 4.0);
    CHECK(f.shape() == Shape(1, 3, 16, 16, 16));
    double peak = 0.0;
    const Index n = 16 * 16 * 16;
    for (Index i = 0; i < n; ++i) {
      const double u = f[i], v = f[n + i], w = f[2 * n + i];
      peak = std::max(peak, std::sqrt(u * u + v * v + w * w));
    }
    CHECK(peak == doctest::Approx(2.5).epsilon(1e-5));
  }

  TEST_CASE("invalid configs are rejected") {
    PhantomCfg cfg = small_cfg();
    cfg.dims = {8, 16, 16};
    CHECK_THROWS_AS(gen_phantom(0, cfg), DimensionError);
    cfg = small_cfg();
    cfg.num_labels = 1;
    CHECK_THROWS_AS(gen_phantom(0, cfg), ConfigError);
  }

  TEST_CASE("degrade") {
    auto c = degrade(Tensor<float>(Shape(1, 1, 32, 32, 32), 0.4f), 2);
    CHECK(c.lr.shape() == Shape(1, 1, 16, 16, 16));
    CHECK(c.lr_up.shape() == Shape(1, 1, 32, 32, 32));
    for (float v : c.lr.data()) CHECK(v == doctest::Approx(0.4f));
    for (float v : c.lr_up.data()) CHECK(v == doctest::Approx(0.4f));

    auto s = gen_phantom(2, small_cfg());
    auto d = degrade(s.intensity, 4);
    auto x = Var<float>::constant(s.intensity);
    auto manual = trilinear_resize(trilinear_resize(x, 0.25), 4.0).value();
    CHECK(d.lr_up == manual);
    CHECK(d.lr == trilinear_resize(x, 0.25).value());
    CHECK_THROWS_AS(degrade(s.intensity, 3), ConfigError);
  }

  TEST_CASE("smooth volumes survive degradation better than high-frequency ones") {
    auto smooth = volume_from([](Index l, Index w, Index h) { return 0.5 + 0.4 * std::sin(0.2 * l + 0.15 * w + 0.1 * h); }, 32);
    auto rough = volume_from([](Index l, Index w, Index h) { return ((l + w + h) % 2) ? 0.9 : 0.1; }, 32);
    const double ps = psnr(degrade(smooth, 2).lr_up, smooth);
    const double pr = psnr(degrade(rough, 2).lr_up, rough);
    CHECK(ps > pr + 10.0);
  }

  TEST_CASE("dataset split and generation") {
    auto split = split_dataset(12);
    CHECK(split.train.size() == 9);
    CHECK(split.validation.size() == 1);
    CHECK(split.test.size() == 2);
    CHECK(split_dataset(40).train.size() == 30);
    CHECK(split_dataset(40).validation.size() == 4);
    CHECK(split_dataset(40).test.size() == 6);
    CHECK_THROWS_AS(split_dataset(4), ConfigError);

    auto data = make_dataset(7, 3, small_cfg());
    CHECK(data.size() == 3);
    CHECK(data[1].id == "phantom-1");
    CHECK(make_dataset(7, 3, small_cfg())[2].intensity == data[2].intensity);
    CHECK(foreground_labels(3) == std::vector<int>{1, 2, 3});
  }
}

TEST_SUITE("volume_io") {
  TEST_CASE("float volume round trip is bit exact") {
    std::mt19937_64 rng(1);
    Tensor<float> v(Shape(1, 1, 3, 4, 5));
    std::uniform_real_distribution<float> u(0, 1);
    for (float& x : v.data()) x = u(rng);
    TempDir dir("rvol");
    write_volume(dir / "v.rvol", v);
    CHECK(read_intensity(dir / "v.rvol") == v);

    auto bytes = encode_volume(v);
    REQUIRE(bytes.size() == 20 + 60 * 4);
    CHECK(std::string(bytes.begin(), bytes.begin() + 5) == "RVOL1");
    CHECK(bytes[5] == 0);
    CHECK(bytes[6] == 0);
    CHECK(le::get_u32(bytes.data() + 8) == 3);
    CHECK(le::get_u32(bytes.data() + 12) == 4);
    CHECK(le::get_u32(bytes.data() + 16) == 5);
    CHECK(le::get_f32(bytes.data() + 20) == v[0]);
  }

  TEST_CASE("label volume keeps its integer dtype") {
    LabelVolume lab({2, 3, 4});
    for (std::size_t i = 0; i < lab.data.size(); ++i) lab.data[i] = static_cast<std::uint16_t>(i * 977 % 65535);
    TempDir dir("rvol");
    write_volume(dir / "l.rvol", lab);
    CHECK(read_labels(dir / "l.rvol") == lab);
    CHECK(encode_volume(lab)[6] == 1);
    CHECK_THROWS_AS(read_intensity(dir / "l.rvol"), IoError);
  }

  TEST_CASE("corrupt inputs raise I/O errors") {
    auto bytes = encode_volume(Tensor<float>(Shape(1, 1, 2, 2, 2), 1.0f));
    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_WITH_AS(decode_volume(bad), doctest::Contains("bad magic"), IoError);
    auto truncated = bytes;
    truncated.pop_back();
    CHECK_THROWS_AS(decode_volume(truncated), IoError);
    auto dtype = bytes;
    dtype[6] = 7;
    CHECK_THROWS_AS(decode_volume(dtype), IoError);
    CHECK_THROWS_AS(read_file("/nonexistent/dir/file.rvol"), IoError);
  }
}

TEST_SUITE("checkpoint") {
  TEST_CASE("save, load, save gives identical bytes") {
    auto rem = build_rem<float>({RemVariant::III, 3, 2}, 4);
    auto reg = build_reg<float>({2, 3, 5});
    Checkpoint c = checkpoint_of(rem);
    c.reg = reg.config;
    export_params(c, reg.params, "reg/");
    AdamState<float> adam;
    adam.step = 17;
    adam.m["w"] = Tensor<float>(Shape(1, 1, 1, 2, 2), 0.25f);
    adam.v["w"] = Tensor<float>(Shape(1, 1, 1, 2, 2), 0.5f);
    export_adam(c, adam, "adam/");
    c.iteration = 123;
    c.extra["note"] = "x";

    TempDir dir("ckpt");
    save_checkpoint(dir / "a.ckpt", c);
    Checkpoint back = load_checkpoint(dir / "a.ckpt");
    save_checkpoint(dir / "b.ckpt", back);
    CHECK(read_file(dir / "a.ckpt") == read_file(dir / "b.ckpt"));
    CHECK(back.iteration == 123);
    CHECK(back.extra["note"] == "x");

    auto rem2 = rem_from_checkpoint(back);
    CHECK(rem2.config == rem.config);
    for (std::size_t i = 0; i < rem.params.size(); ++i) CHECK(rem2.params[i].var.value() == rem.params[i].var.value());
    auto reg2 = reg_from_checkpoint(back);
    CHECK(reg2.config == reg.config);
    auto adam2 = import_adam(back, "adam/");
    CHECK(adam2.step == 17);
    CHECK(adam2.v.at("w") == adam.v.at("w"));
  }

  TEST_CASE("mismatched config, missing tensors and bad headers are rejected") {
    auto rem = build_rem<float>({RemVariant::I, 3, 1}, 0);
    Checkpoint c = checkpoint_of(rem);
    Checkpoint wrong = c;
    wrong.rem = RemConfig{RemVariant::I, 4, 1};
    CHECK_THROWS_AS(rem_from_checkpoint(wrong), DimensionError);
    Checkpoint deeper = c;
    deeper.rem = RemConfig{RemVariant::I, 3, 2};
    CHECK_THROWS_AS(rem_from_checkpoint(deeper), IoError);

    auto bytes = encode_checkpoint(c);
    auto bad = bytes;
    bad[1] = 'X';
    CHECK_THROWS_AS(decode_checkpoint(bad), IoError);
    auto truncated = bytes;
    truncated.resize(bytes.size() - 3);
    CHECK_THROWS_AS(decode_checkpoint(truncated), IoError);

    Checkpoint future = c;
    future.format_version = kCheckpointVersion + 1;
    CHECK_THROWS_WITH_AS(decode_checkpoint(encode_checkpoint(future)), doctest::Contains("version"), IoError);
  }
}
