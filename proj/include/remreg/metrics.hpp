// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "remreg/tensor.hpp"

namespace remreg {

struct DiceResult {
  std::map<int, double> per_label;
  double mean = 0.0;  // over labels present in at least one volume
};

/// Per-label 2|A∩B| / (|A|+|B|). Labels empty in both volumes are left out of
/// the mean; a label empty in exactly one scores 0.
DiceResult dice(const LabelVolume& a, const LabelVolume& b, const std::vector<int>& labels);

/// Population correlation over all voxels; nullopt when either input is constant.
template <typename T>
std::optional<double> ncc_global(const Tensor<T>& a, const Tensor<T>& b);

/// 10 log10(peak^2 / MSE); +infinity marks identical inputs.
template <typename T>
double psnr(const Tensor<T>& a, const Tensor<T>& b, double peak = 1.0);

inline bool psnr_identical(double db) { return db == std::numeric_limits<double>::infinity(); }

struct SsimCfg {
  int window = 3;
  double k1 = 0.01;
  double k2 = 0.03;
  double peak = 1.0;
};

/// Mean SSIM over every voxel-centred cubic window that lies fully inside the
/// volume, uniform weights, population (co)variances.
template <typename T>
double ssim3d(const Tensor<T>& a, const Tensor<T>& b, const SsimCfg& cfg = {});

}  // namespace remreg
