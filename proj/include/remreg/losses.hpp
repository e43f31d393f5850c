// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "remreg/autograd.hpp"
#include "remreg/rem.hpp"
#include "remreg/resample.hpp"

namespace remreg {

/// Weights of the auxiliary and smoothness terms in the total loss.
struct LossWeights {
  double aux = 10.0;     // lambda_1
  double reg = 1e-8;     // lambda_2

  void validate() const;
};

struct LnccCfg {
  int window = 5;
  double eps = 1e-5;

  void validate() const;
};

/// Mean over voxel-centred windows of C^2 / (A B + eps), where C, A, B are the
/// centred cross and auto sums over the window. Windows are zero padded and
/// always count window^3 samples. Inputs are single channel.
template <typename T>
Var<T> lncc(const Var<T>& a, const Var<T>& b, const LnccCfg& cfg);

/// Mean Huber penalty of a - b with threshold delta.
template <typename T>
Var<T> huber(const Var<T>& a, const Var<T>& b, double delta);

/// Sum over the eight binary shifts m of ||z - S_m z||^2 on the overlap,
/// summed over channels.
template <typename T>
Var<T> smoothness(const Dvf<T>& z);

/// -lncc(warp(moving_sr, dvf), fixed_sr).
template <typename T>
Var<T> main_loss(const Dvf<T>& dvf, const Var<T>& fixed_sr, const Var<T>& moving_sr, const LnccCfg& cfg);

/// huber(rem(warp(moving_up, dvf)), fixed_sr): warp the upsampled LR image
/// first, then enhance. A null `rem` is the identity.
template <typename T>
Var<T> aux_loss(const RemModel<T>* rem, const Dvf<T>& dvf, const Var<T>& moving_up, const Var<T>& fixed_sr,
                double delta);

/// main + w.aux * aux + w.reg * reg.
template <typename T>
Var<T> total_loss(const Var<T>& main, const Var<T>& aux, const Var<T>& reg, const LossWeights& w);

inline double total_loss(double main, double aux, double reg, const LossWeights& w) {
  return main + w.aux * aux + w.reg * reg;
}

}  // namespace remreg
