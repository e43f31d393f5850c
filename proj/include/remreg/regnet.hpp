// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "remreg/autograd.hpp"
#include "remreg/rem.hpp"
#include "remreg/resample.hpp"

namespace remreg {

/// U-shaped encoder/decoder predicting a displacement field from a
/// (fixed, moving) channel pair.
struct RegConfig {
  int levels = 3;
  int base_channels = 8;
  std::uint64_t seed = 0;

  void validate() const;
  /// Encoder width at pyramid level i (level 0 is full resolution).
  int channels_at(int level) const { return level == 0 ? base_channels : 2 * base_channels; }
  bool operator==(const RegConfig&) const = default;
};

template <typename T>
struct RegModel {
  RegConfig config;
  std::vector<Param<T>> params;

  Param<T>& param(const std::string& name);
  Index num_scalars() const { return count_scalars(params); }
};

/// Kaiming-initialised encoder/decoder with a zero-initialised flow head,
/// so a fresh model predicts the identity transform.
template <typename T>
RegModel<T> build_reg(const RegConfig& cfg);

/// (2, 1, L, W, H) -> (1, 2, L, W, H): batch entry 0 (fixed) becomes channel 0,
/// entry 1 (moving) channel 1.
template <typename T>
Var<T> rearrange_pair(const Var<T>& y);

/// Inverse of rearrange_pair.
template <typename T>
Var<T> unrearrange_pair(const Var<T>& y);

/// Dense displacement field (1, 3, L, W, H) for a pair (1, 2, L, W, H).
/// Spatial extents must be divisible by 2^levels.
template <typename T>
Dvf<T> reg_forward(const RegModel<T>& model, const Var<T>& pair);

template <typename T>
struct CascadeOutput {
  Var<T> fixed_sr;
  Var<T> moving_sr;
  Dvf<T> dvf;
};

/// Stacks (fixed, moving) into a batch, enhances both with `rem` (identity
/// when null), swaps batch and channel, and predicts the field.
template <typename T>
CascadeOutput<T> cascade_forward(const RemModel<T>* rem, const RegModel<T>& reg, const Var<T>& fixed_up,
                                 const Var<T>& moving_up);

}  // namespace remreg
