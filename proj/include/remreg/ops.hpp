// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "remreg/autograd.hpp"

namespace remreg {

/// 3x3x3 cross-correlation with zero padding 1.
///
/// `weight` has shape (Cout, Cin, 3, 3, 3) and `bias` holds Cout values in
/// any shape. With stride 1 the spatial extent is preserved; with stride 2
/// each extent d becomes (d - 1) / 2 + 1.
template <typename T>
Var<T> conv3d(const Var<T>& input, const Var<T>& weight, const Var<T>& bias, int stride = 1);

template <typename T>
Var<T> relu(const Var<T>& x);

/// max(x, slope * x); subgradient at 0 is `slope`.
template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope);

template <typename T>
Var<T> add(const Var<T>& x, const Var<T>& y);

template <typename T>
Var<T> sub(const Var<T>& x, const Var<T>& y);

/// Elementwise product.
template <typename T>
Var<T> mul(const Var<T>& x, const Var<T>& y);

template <typename T>
Var<T> scale(const Var<T>& x, T factor);

template <typename T>
Var<T> sum(const Var<T>& x);

template <typename T>
Var<T> mean(const Var<T>& x);

/// Concatenates along the channel axis; batch and spatial extents must agree.
template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& parts);

/// Concatenates along the batch axis; all other extents must agree.
template <typename T>
Var<T> concat_batch(const std::vector<Var<T>>& parts);

/// Batch entries [first, first + count).
template <typename T>
Var<T> slice_batch(const Var<T>& x, Index first, Index count);

/// Exchanges the batch and channel axes: (B, C, ...) -> (C, B, ...).
template <typename T>
Var<T> swap_batch_channel(const Var<T>& x);

}  // namespace remreg
