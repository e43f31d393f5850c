// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>

#include "remreg/autograd.hpp"

namespace remreg {

/// Displacement field (1, 3, L, W, H): per-voxel offsets (d_u, d_v, d_w)
/// along (L, W, H) in voxel units of the fixed grid.
template <typename T>
using Dvf = Var<T>;

/// Binary shift m = (u, v, w) for the smoothness penalty.
struct ShiftVec {
  int u = 0, v = 0, w = 0;

  ShiftVec() = default;
  ShiftVec(int u_, int v_, int w_);
  bool is_zero() const { return u == 0 && v == 0 && w == 0; }
};

/// All eight binary shifts, (0,0,0) first.
std::array<ShiftVec, 8> all_shifts();

/// Output extent floor(dim * scale) for every spatial axis.
std::array<Index, 3> resized_dims(const Shape& s, double scale);

/// Separable trilinear resize with half-voxel centred coordinates,
/// src = (t + 0.5) / scale - 0.5, clamped to the border.
template <typename T>
Var<T> trilinear_resize(const Var<T>& vol, double scale);

/// Resize to an explicit target extent (per-axis ratio out/in).
template <typename T>
Var<T> trilinear_resize_to(const Var<T>& vol, const std::array<Index, 3>& target);

/// out(x) = vol sampled trilinearly at x + d(x), border clamped. `dvf` batch
/// must be 1 (broadcast) or equal to vol's batch.
template <typename T>
Var<T> warp_trilinear(const Var<T>& vol, const Dvf<T>& dvf);

/// Nearest-neighbour label transport: round-half-up of x + d(x), clamped.
template <typename T>
LabelVolume warp_nearest(const LabelVolume& labels, const Tensor<T>& dvf);

/// Per-axis extent over which z(x) and z(x + m) are both defined.
std::array<Index, 3> shift_overlap(const Shape& s, const ShiftVec& m);

/// z(x) - z(x + m) over the overlap region, shape (B, C, overlap...).
template <typename T>
Var<T> shift_difference(const Var<T>& z, const ShiftVec& m);

/// z translated by m, restricted to the overlap: out(x) = z(x + m).
template <typename T>
Tensor<T> shift_volume(const Tensor<T>& z, const ShiftVec& m);

/// Nearest-neighbour label resize onto the half-voxel centred grid.
LabelVolume resize_labels(const LabelVolume& labels, const std::array<Index, 3>& target);

}  // namespace remreg
