// SPDX-License-Identifier: Apache-2.0
#include "remreg/metrics.hpp"

#include <cmath>
#include <limits>

namespace remreg {

DiceResult dice(const LabelVolume& a, const LabelVolume& b, const std::vector<int>& labels) {
  if (a.dims != b.dims) throw DimensionError("dice: label volumes differ in extent");
  std::map<int, Index> ca, cb, both;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const int la = a.data[i], lb = b.data[i];
    ++ca[la];
    ++cb[lb];
    if (la == lb) ++both[la];
  }
  DiceResult r;
  double acc = 0.0;
  int counted = 0;
  for (int l : labels) {
    const Index na = ca.count(l) ? ca[l] : 0;
    const Index nb = cb.count(l) ? cb[l] : 0;
    if (na + nb == 0) continue;
    const Index ni = both.count(l) ? both[l] : 0;
    const double d = 2.0 * static_cast<double>(ni) / static_cast<double>(na + nb);
    r.per_label[l] = d;
    acc += d;
    ++counted;
  }
  r.mean = counted ? acc / counted : 0.0;
  return r;
}

template <typename T>
std::optional<double> ncc_global(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "ncc_global");
  const Index n = a.numel();
  if (n == 0) return std::nullopt;
  double ma = 0, mb = 0;
  for (Index i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0, saa = 0, sbb = 0;
  for (Index i = 0; i < n; ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

template <typename T>
double psnr(const Tensor<T>& a, const Tensor<T>& b, double peak) {
  require_same_shape(a.shape(), b.shape(), "psnr");
  if (!(peak > 0)) throw ConfigError("psnr: peak must be positive");
  double se = 0.0;
  for (Index i = 0; i < a.numel(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    se += d * d;
  }
  if (se == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = se / static_cast<double>(a.numel());
  return 10.0 * std::log10(peak * peak / mse);
}

template <typename T>
double ssim3d(const Tensor<T>& a, const Tensor<T>& b, const SsimCfg& cfg) {
  require_same_shape(a.shape(), b.shape(), "ssim3d");
  if (cfg.window < 1 || cfg.window % 2 == 0) throw ConfigError("ssim3d: window must be odd");
  const Shape& s = a.shape();
  const Index r = cfg.window / 2;
  const Index L = s.depth(), W = s.rows(), H = s.cols();
  if (L < cfg.window || W < cfg.window || H < cfg.window) {
    throw DimensionError("ssim3d: volume " + s.str() + " smaller than window");
  }
  const double c1 = (cfg.k1 * cfg.peak) * (cfg.k1 * cfg.peak);
  const double c2 = (cfg.k2 * cfg.peak) * (cfg.k2 * cfg.peak);
  const double n = static_cast<double>(cfg.window) * cfg.window * cfg.window;
  double acc = 0.0;
  Index count = 0;
  for (Index bb = 0; bb < s.batch(); ++bb) {
    for (Index c = 0; c < s.channels(); ++c) {
      for (Index l = r; l < L - r; ++l) {
        for (Index w = r; w < W - r; ++w) {
          for (Index h = r; h < H - r; ++h) {
            double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
            for (Index dl = -r; dl <= r; ++dl)
              for (Index dw = -r; dw <= r; ++dw)
                for (Index dh = -r; dh <= r; ++dh) {
                  const double x = a.at(bb, c, l + dl, w + dw, h + dh);
                  const double y = b.at(bb, c, l + dl, w + dw, h + dh);
                  sa += x;
                  sb += y;
                  saa += x * x;
                  sbb += y * y;
                  sab += x * y;
                }
            const double mu_a = sa / n, mu_b = sb / n;
            const double var_a = saa / n - mu_a * mu_a;
            const double var_b = sbb / n - mu_b * mu_b;
            const double cov = sab / n - mu_a * mu_b;
            acc += ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) /
                   ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
            ++count;
          }
        }
      }
    }
  }
  return acc / static_cast<double>(count);
}

template std::optional<double> ncc_global(const Tensor<float>&, const Tensor<float>&);
template std::optional<double> ncc_global(const Tensor<double>&, const Tensor<double>&);
template double psnr(const Tensor<float>&, const Tensor<float>&, double);
template double psnr(const Tensor<double>&, const Tensor<double>&, double);
template double ssim3d(const Tensor<float>&, const Tensor<float>&, const SsimCfg&);
template double ssim3d(const Tensor<double>&, const Tensor<double>&, const SsimCfg&);

}  // namespace remreg
