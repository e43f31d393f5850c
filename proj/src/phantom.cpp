// SPDX-License-Identifier: Apache-2.0
#include "remreg/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "remreg/random.hpp"

namespace remreg {

void PhantomCfg::validate() const {
  for (Index d : dims) {
    if (d < 16) throw DimensionError("phantom extents must be >= 16, got " + std::to_string(d));
  }
  if (num_labels < 2) throw ConfigError("phantom needs at least 2 labels");
  if (num_labels > 64) throw ConfigError("phantom supports at most 64 labels");
  if (!(deform_amplitude >= 0)) throw ConfigError("deformation amplitude must be non-negative");
  if (!(smooth_sigma > 0)) throw ConfigError("smoothing sigma must be positive");
}

std::vector<int> foreground_labels(int num_labels) {
  std::vector<int> out;
  for (int l = 1; l <= num_labels; ++l) out.push_back(l);
  return out;
}

namespace {

constexpr double kShellRadius = 0.8;  // interior/shell boundary in ellipsoid units
constexpr std::array<double, 3> kRadii{0.82, 0.86, 0.78};

struct Seed3 {
  double u, v, w;
};

// Interior region centres on a golden-angle spiral inside the inner ellipsoid.
std::vector<Seed3> region_centres(int count) {
  std::vector<Seed3> out;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    const double z = count == 1 ? 0.0 : 1.0 - 2.0 * (i + 0.5) / count;
    const double rad = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double th = golden * i;
    const double r = count == 1 ? 0.0 : 0.42;
    out.push_back({r * rad * std::cos(th), r * rad * std::sin(th), r * z});
  }
  return out;
}

double label_intensity(int label) {
  if (label == 0) return 0.0;
  if (label == 1) return 0.35;
  const double f = std::fmod((label - 2) * 0.618034 + 0.1, 1.0);
  return 0.45 + 0.5 * f;
}

}  // namespace

VolumeSample base_phantom(std::uint64_t seed, const PhantomCfg& cfg) {
  cfg.validate();
  const auto [L, W, H] = cfg.dims;
  const int inner_regions = cfg.num_labels - 1;
  const auto centres = region_centres(inner_regions);

  Rng rng(derive_seed(seed, "intensity"));
  std::uniform_real_distribution<double> jitter(-0.04, 0.04);
  std::vector<double> level(static_cast<std::size_t>(cfg.num_labels) + 1);
  for (int l = 0; l <= cfg.num_labels; ++l) level[static_cast<std::size_t>(l)] = label_intensity(l) + (l ? jitter(rng) : 0.0);

  VolumeSample s;
  s.id = "phantom-" + std::to_string(seed);
  s.intensity = Tensor<float>(Shape(1, 1, L, W, H));
  s.labels = LabelVolume(cfg.dims);
  const double two_pi = 2.0 * std::numbers::pi;
  for (Index l = 0; l < L; ++l) {
    const double u = (l + 0.5) / static_cast<double>(L) * 2.0 - 1.0;
    for (Index w = 0; w < W; ++w) {
      const double v = (w + 0.5) / static_cast<double>(W) * 2.0 - 1.0;
      for (Index h = 0; h < H; ++h) {
        const double x = (h + 0.5) / static_cast<double>(H) * 2.0 - 1.0;
        const double r = std::sqrt((u / kRadii[0]) * (u / kRadii[0]) + (v / kRadii[1]) * (v / kRadii[1]) +
                                   (x / kRadii[2]) * (x / kRadii[2]));
        int label = 0;
        if (r <= 1.0) {
          // Shell thickness wobbles smoothly with direction.
          const double wobble = 0.04 * std::sin(3.0 * std::atan2(v, u)) * std::cos(2.0 * x * std::numbers::pi);
          if (r > kShellRadius + wobble) {
            label = 1;
          } else {
            double best = 1e300;
            for (int i = 0; i < inner_regions; ++i) {
              const auto& c = centres[static_cast<std::size_t>(i)];
              const double du = u / kRadii[0] - c.u, dv = v / kRadii[1] - c.v, dw = x / kRadii[2] - c.w;
              const double d = std::sqrt(du * du + dv * dv + dw * dw) +
                               0.05 * std::sin(two_pi * (u + 0.37 * i)) * std::cos(two_pi * (v - 0.21 * i));
              if (d < best) {
                best = d;
                label = i + 2;
              }
            }
          }
        }
        double val = level[static_cast<std::size_t>(label)];
        if (label) val *= 1.0 + 0.06 * std::sin(two_pi * 1.5 * u) * std::sin(two_pi * 1.25 * v) * std::cos(two_pi * x);
        s.intensity.at(0, 0, l, w, h) = static_cast<float>(std::clamp(val, 0.0, 1.0));
        s.labels.at(l, w, h) = static_cast<std::uint16_t>(label);
      }
    }
  }
  return s;
}

VolumeSample gen_phantom(std::uint64_t seed, const PhantomCfg& cfg) {
  VolumeSample s = base_phantom(seed, cfg);
  if (cfg.deform_amplitude == 0.0) return s;
  const Tensor<float> dvf = random_smooth_dvf(derive_seed(seed, "deform"), cfg.dims, cfg.deform_amplitude,
                                              cfg.smooth_sigma);
  auto warped = warp_trilinear(Var<float>::constant(s.intensity), Var<float>::constant(dvf));
  s.intensity = warped.value();
  for (float& v : s.intensity.data()) v = std::clamp(v, 0.0f, 1.0f);
  s.labels = warp_nearest(s.labels, dvf);
  return s;
}

namespace {

// In-place box mean of width `win` along one axis, border replicated.
void box_blur_axis(std::vector<double>& v, const std::array<Index, 3>& dims, int axis, int win) {
  const Index r = win / 2;
  const Index n = dims[static_cast<std::size_t>(axis)];
  const Index stride = axis == 0 ? dims[1] * dims[2] : axis == 1 ? dims[2] : 1;
  const Index total = dims[0] * dims[1] * dims[2];
  std::vector<double> line(static_cast<std::size_t>(n));
  for (Index start = 0; start < total; ++start) {
    if ((start / stride) % n != 0) continue;
    for (Index i = 0; i < n; ++i) line[static_cast<std::size_t>(i)] = v[static_cast<std::size_t>(start + i * stride)];
    for (Index i = 0; i < n; ++i) {
      double acc = 0.0;
      for (Index j = i - r; j <= i + r; ++j) acc += line[static_cast<std::size_t>(std::clamp<Index>(j, 0, n - 1))];
      v[static_cast<std::size_t>(start + i * stride)] = acc / static_cast<double>(win);
    }
  }
}

}  // namespace

Tensor<float> random_smooth_dvf(std::uint64_t seed, const std::array<Index, 3>& dims, double amplitude,
                                double smooth_sigma) {
  if (!(amplitude >= 0)) throw ConfigError("random_smooth_dvf: amplitude must be non-negative");
  if (!(smooth_sigma > 0)) throw ConfigError("random_smooth_dvf: sigma must be positive");
  const Index vox = dims[0] * dims[1] * dims[2];
  Tensor<float> out(Shape(1, 3, dims[0], dims[1], dims[2]));
  if (amplitude == 0.0) return out;

  // Three passes of width w have variance 3 (w^2 - 1) / 12 = sigma^2.
  int win = static_cast<int>(std::lround(std::sqrt(4.0 * smooth_sigma * smooth_sigma + 1.0)));
  if (win % 2 == 0) ++win;
  // Noise is drawn on a grid padded by the full blur support and cropped
  // afterwards, so border voxels see as many independent samples as the interior.
  const Index pad = 3 * (win / 2);
  const std::array<Index, 3> big{dims[0] + 2 * pad, dims[1] + 2 * pad, dims[2] + 2 * pad};
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::array<std::vector<double>, 3> field;
  std::vector<double> work;
  for (auto& f : field) {
    work.resize(static_cast<std::size_t>(big[0] * big[1] * big[2]));
    for (double& x : work) x = noise(rng);
    for (int pass = 0; pass < 3; ++pass)
      for (int axis = 0; axis < 3; ++axis) box_blur_axis(work, big, axis, win);
    f.resize(static_cast<std::size_t>(vox));
    for (Index l = 0; l < dims[0]; ++l)
      for (Index w = 0; w < dims[1]; ++w)
        for (Index h = 0; h < dims[2]; ++h)
          f[static_cast<std::size_t>((l * dims[1] + w) * dims[2] + h)] =
              work[static_cast<std::size_t>(((l + pad) * big[1] + w + pad) * big[2] + h + pad)];
  }
  double max_norm = 0.0;
  for (Index i = 0; i < vox; ++i) {
    const auto k = static_cast<std::size_t>(i);
    max_norm = std::max(max_norm, std::sqrt(field[0][k] * field[0][k] + field[1][k] * field[1][k] + field[2][k] * field[2][k]));
  }
  const double gain = max_norm > 0 ? amplitude / max_norm : 0.0;
  for (int c = 0; c < 3; ++c) {
    float* dst = out.volume(0, c);
    for (Index i = 0; i < vox; ++i) dst[i] = static_cast<float>(field[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)] * gain);
  }
  return out;
}

Degraded degrade(const Tensor<float>& vol, int factor) {
  if (factor != 2 && factor != 4) throw ConfigError("degrade: factor must be 2 or 4");
  for (Index d : vol.shape().spatial_dims()) {
    if (d % factor != 0) {
      throw DimensionError("degrade: extent " + std::to_string(d) + " not divisible by " + std::to_string(factor));
    }
  }
  auto lr = trilinear_resize(Var<float>::constant(vol), 1.0 / factor);
  auto up = trilinear_resize(lr, static_cast<double>(factor));
  return {lr.value(), up.value()};
}

DatasetSplit split_dataset(std::size_t count) {
  if (count < 3) throw ConfigError("dataset needs at least 3 samples to split");
  const std::size_t n_train = std::max<std::size_t>(1, (count * 30 + 20) / 40);
  const std::size_t n_val = std::max<std::size_t>(1, count * 4 / 40);
  DatasetSplit s;
  for (std::size_t i = 0; i < count; ++i) {
    if (i < n_train) {
      s.train.push_back(i);
    } else if (i < n_train + n_val) {
      s.validation.push_back(i);
    } else {
      s.test.push_back(i);
    }
  }
  if (s.test.empty()) throw ConfigError("dataset too small to leave test samples");
  return s;
}

std::vector<VolumeSample> make_dataset(std::uint64_t seed, std::size_t count, const PhantomCfg& cfg) {
  std::vector<VolumeSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(gen_phantom(derive_seed(seed, "phantom", i), cfg));
    out.back().id = "phantom-" + std::to_string(i);
  }
  return out;
}

}  // namespace remreg
