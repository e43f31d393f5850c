// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "remreg/autograd.hpp"

namespace remreg {

/// Residual layout of the resolution enhancement network.
///  - I:   image-domain skip, out = x + tail(block(head(x)))
///  - II:  feature-domain skip around the intermediate block, out = tail(h + block(h))
///  - III: identity skip on every intermediate layer plus the image skip
enum class RemVariant { I, II, III };

std::string to_string(RemVariant v);
RemVariant parse_variant(const std::string& s);

struct RemConfig {
  RemVariant variant = RemVariant::I;
  int k = 16;  // filters per conv
  int n = 8;   // intermediate conv layers

  void validate() const;
  bool operator==(const RemConfig&) const = default;
};

enum class RemInit { kaiming, zero };

template <typename T>
struct RemModel {
  RemConfig config;
  std::vector<Param<T>> params;

  Param<T>& param(const std::string& name);
  const Param<T>& param(const std::string& name) const;
  void set_frozen(bool frozen);
  Index num_scalars() const { return count_scalars(params); }
};

/// head (1 -> k) + n intermediates (k -> k) + tail (k -> 1), all 3x3x3 with bias.
std::int64_t rem_param_count(const RemConfig& cfg);

/// Kaiming fan-in normal weights from `seed`, zero biases. Parameter names
/// are head.*, block.<i>.*, tail.*.
template <typename T>
RemModel<T> build_rem(const RemConfig& cfg, std::uint64_t seed, RemInit init = RemInit::kaiming);

/// Enhances a trilinear-upsampled single-channel batch (B, 1, L, W, H).
template <typename T>
Var<T> rem_forward(const RemModel<T>& model, const Var<T>& x);

}  // namespace remreg
