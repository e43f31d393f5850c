// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "remreg/autograd.hpp"
#include "remreg/random.hpp"

namespace remreg {

/// Weight-initialisation stream shared by the network builders.
class InitStream {
 public:
  explicit InitStream(std::uint64_t seed) : rng_(derive_seed(seed, "init")) {}

  /// Kaiming fan-in normal: std = sqrt(2 / fan_in).
  template <typename T>
  Tensor<T> kaiming(const Shape& s, Index fan_in) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    Tensor<T> t(s);
    for (T& v : t.data()) v = static_cast<T>(dist(rng_));
    return t;
  }

 private:
  Rng rng_;
};

/// Appends `<prefix>.weight` (cout, cin, 3, 3, 3) and `<prefix>.bias`.
template <typename T>
void append_conv(std::vector<Param<T>>& params, const std::string& prefix, Index cin, Index cout, InitStream& rng,
                 bool zero) {
  const Shape ws(cout, cin, 3, 3, 3);
  Tensor<T> w = zero ? Tensor<T>(ws) : rng.kaiming<T>(ws, cin * 27);
  params.push_back({prefix + ".weight", Var<T>::leaf(std::move(w), true), false});
  params.push_back({prefix + ".bias", Var<T>::leaf(Tensor<T>(Shape(1, cout, 1, 1, 1)), true), false});
}

}  // namespace remreg
