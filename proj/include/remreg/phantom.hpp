// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "remreg/resample.hpp"
#include "remreg/tensor.hpp"

namespace remreg {

/// Intensity volume in [0, 1] with its ground-truth label map.
struct VolumeSample {
  std::string id;
  Tensor<float> intensity;  // (1, 1, L, W, H)
  LabelVolume labels;       // values in [0, num_labels]
};

struct PhantomCfg {
  std::array<Index, 3> dims{32, 32, 32};
  int num_labels = 6;
  double deform_amplitude = 5.0;  // max displacement norm, voxels
  double smooth_sigma = 4.0;

  void validate() const;
};

/// Deterministic multi-region ellipsoid shared by all subjects of a seed:
/// label 1 is an outer shell, labels 2..num_labels partition the interior.
/// `seed` only jitters per-region intensities.
VolumeSample base_phantom(std::uint64_t seed, const PhantomCfg& cfg);

/// base_phantom individualised by a random smooth deformation; intensities
/// are warped trilinearly and labels by nearest neighbour.
VolumeSample gen_phantom(std::uint64_t seed, const PhantomCfg& cfg);

/// Gaussian-like smoothed white noise (three box passes per axis), scaled so
/// the largest per-voxel displacement norm equals `amplitude`.
Tensor<float> random_smooth_dvf(std::uint64_t seed, const std::array<Index, 3>& dims, double amplitude,
                                double smooth_sigma);

struct Degraded {
  Tensor<float> lr;     // dims / factor
  Tensor<float> lr_up;  // back on the input grid
};

/// Trilinear downscale by 1/factor followed by trilinear upscale by factor.
Degraded degrade(const Tensor<float>& vol, int factor);

/// Indices into a sample list.
struct DatasetSplit {
  std::vector<std::size_t> train, validation, test;
};

/// 30/4/6-proportional split in index order (12 -> 9/1/2).
DatasetSplit split_dataset(std::size_t count);

/// `count` phantoms from the "phantom" sub-stream of `seed`.
std::vector<VolumeSample> make_dataset(std::uint64_t seed, std::size_t count, const PhantomCfg& cfg);

/// Sorted label values 1..num_labels.
std::vector<int> foreground_labels(int num_labels);

}  // namespace remreg
