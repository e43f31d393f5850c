// SPDX-License-Identifier: Apache-2.0
#include "remreg/optim.hpp"

#include <algorithm>
#include <cmath>

namespace remreg {

void ScheduleCfg::validate() const {
  if (!(lr0 > 0)) throw ConfigError("schedule: lr0 must be positive");
  if (!(decay > 0 && decay < 1)) throw ConfigError("schedule: decay must lie in (0, 1)");
  if (period < 1) throw ConfigError("schedule: period must be positive");
  if (floor > lr0) throw ConfigError("schedule: floor exceeds lr0");
}

double lr_schedule(long iter, const ScheduleCfg& cfg) {
  if (iter < 0) throw ConfigError("lr_schedule: negative iteration");
  const double lr = cfg.lr0 * std::pow(cfg.decay, static_cast<double>(iter / cfg.period));
  return std::max(cfg.floor, lr);
}

template <typename T>
void adam_step(std::vector<Param<T>>& params, AdamState<T>& state, double lr) {
  if (!(lr > 0)) throw ConfigError("adam_step: learning rate must be positive");
  for (const auto& p : params) {
    if (!p.frozen && !p.var.grad()) throw Error("adam_step: missing gradient for parameter '" + p.name + "'");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  const T b1 = static_cast<T>(state.beta1);
  const T b2 = static_cast<T>(state.beta2);
  for (auto& p : params) {
    if (p.frozen) continue;
    Tensor<T>& value = p.var.mutable_value();
    const Tensor<T>& g = *p.var.grad();
    auto [mit, m_new] = state.m.try_emplace(p.name, value.shape());
    auto [vit, v_new] = state.v.try_emplace(p.name, value.shape());
    Tensor<T>& m = mit->second;
    Tensor<T>& v = vit->second;
    require_same_shape(m.shape(), value.shape(), "adam first moment");
    require_same_shape(v.shape(), value.shape(), "adam second moment");
    for (Index i = 0; i < value.numel(); ++i) {
      m[i] = b1 * m[i] + (T(1) - b1) * g[i];
      v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
      const double mhat = static_cast<double>(m[i]) / c1;
      const double vhat = static_cast<double>(v[i]) / c2;
      value[i] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + state.eps));
    }
    p.var.zero_grad();
  }
}

template void adam_step(std::vector<Param<float>>&, AdamState<float>&, double);
template void adam_step(std::vector<Param<double>>&, AdamState<double>&, double);

}  // namespace remreg
