// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "remreg/autograd.hpp"

namespace remreg {

/// Step decay: lr = max(floor, lr0 * decay^(iter / period)).
struct ScheduleCfg {
  double lr0 = 1e-3;
  double decay = 0.95;
  long period = 200;
  double floor = 1e-4;

  void validate() const;
};

/// Supervised super-resolution training: 1e-3, x0.95 every 200 steps, floor 1e-4.
inline ScheduleCfg rem_schedule() { return {1e-3, 0.95, 200, 1e-4}; }
/// Registration training: 2e-3, x0.9 every 1000 steps, floor 1e-4.
inline ScheduleCfg cascade_schedule() { return {2e-3, 0.9, 1000, 1e-4}; }

double lr_schedule(long iter, const ScheduleCfg& cfg);

/// Adam moments keyed by parameter name.
template <typename T>
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::map<std::string, Tensor<T>> m;
  std::map<std::string, Tensor<T>> v;
};

/// One bias-corrected Adam update over every non-frozen param, then clears
/// their gradients. Throws if a non-frozen param has no gradient.
template <typename T>
void adam_step(std::vector<Param<T>>& params, AdamState<T>& state, double lr);

template <typename T>
void zero_grads(std::vector<Param<T>>& params) {
  for (auto& p : params) p.var.zero_grad();
}

}  // namespace remreg
