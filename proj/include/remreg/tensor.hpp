// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <new>
#include <span>
#include <string>
#include <vector>

#include "remreg/error.hpp"

namespace remreg {

using Index = std::int64_t;

/// Allocator with a fixed 64-byte alignment. Vectorised kernels peel
/// unaligned heads differently, so a fixed alignment keeps their rounding
/// identical from run to run.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::size_t kAlign = 64;

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{kAlign})); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, std::align_val_t{kAlign}); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

/// Extents of a 5-D array laid out as (batch, channel, L, W, H), H fastest.
struct Shape {
  std::array<Index, 5> dims{0, 0, 0, 0, 0};

  Shape() = default;
  Shape(Index b, Index c, Index l, Index w, Index h) : dims{b, c, l, w, h} {}

  Index batch() const { return dims[0]; }
  Index channels() const { return dims[1]; }
  Index depth() const { return dims[2]; }
  Index rows() const { return dims[3]; }
  Index cols() const { return dims[4]; }
  Index spatial() const { return dims[2] * dims[3] * dims[4]; }
  Index numel() const { return dims[0] * dims[1] * spatial(); }
  std::array<Index, 3> spatial_dims() const { return {dims[2], dims[3], dims[4]}; }

  bool operator==(const Shape&) const = default;

  std::string str() const {
    std::string s = "(";
    for (std::size_t i = 0; i < 5; ++i) {
      s += std::to_string(dims[i]);
      s += (i + 1 < 5) ? "," : ")";
    }
    return s;
  }
};

inline void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (!(a == b)) {
    throw DimensionError(std::string(what) + ": shape mismatch " + a.str() + " vs " + b.str());
  }
}

/// Dense row-major 5-D array of T.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(const Shape& shape, T fill = T(0))
      : shape_(shape), data_(static_cast<std::size_t>(checked_numel(shape)), fill) {}

  /// Adopts `data`; rejects a size mismatch or any non-finite value.
  static Tensor from_data(const Shape& shape, std::vector<T> data) {
    if (static_cast<Index>(data.size()) != checked_numel(shape)) {
      throw DimensionError("tensor data length " + std::to_string(data.size()) +
                           " does not match shape " + shape.str());
    }
    Tensor t;
    t.shape_ = shape;
    t.data_.assign(data.begin(), data.end());
    t.require_finite("tensor creation");
    return t;
  }

  static Tensor scalar(T v) { return from_data(Shape(1, 1, 1, 1, 1), {v}); }

  const Shape& shape() const { return shape_; }
  Index numel() const { return static_cast<Index>(data_.size()); }
  bool empty() const { return data_.empty(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  T* ptr() { return data_.data(); }
  const T* ptr() const { return data_.data(); }
  AlignedVector<T>& storage() { return data_; }
  const AlignedVector<T>& storage() const { return data_; }

  Index offset(Index b, Index c, Index l, Index w, Index h) const {
    const auto& d = shape_.dims;
    return (((b * d[1] + c) * d[2] + l) * d[3] + w) * d[4] + h;
  }
  T& at(Index b, Index c, Index l, Index w, Index h) { return data_[offset(b, c, l, w, h)]; }
  T at(Index b, Index c, Index l, Index w, Index h) const { return data_[offset(b, c, l, w, h)]; }
  T& operator[](Index i) { return data_[static_cast<std::size_t>(i)]; }
  T operator[](Index i) const { return data_[static_cast<std::size_t>(i)]; }

  /// Pointer to the first voxel of volume (b, c).
  T* volume(Index b, Index c) { return data_.data() + offset(b, c, 0, 0, 0); }
  const T* volume(Index b, Index c) const { return data_.data() + offset(b, c, 0, 0, 0); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    for (T v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }
  void require_finite(const char* where) const {
    if (!all_finite()) throw NumericError(std::string(where) + ": non-finite value");
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) out.storage()[i] = static_cast<U>(data_[i]);
    return out;
  }

  bool operator==(const Tensor&) const = default;

 private:
  static Index checked_numel(const Shape& s) {
    for (Index d : s.dims) {
      if (d < 0) throw DimensionError("negative extent in shape " + s.str());
    }
    return s.numel();
  }

  Shape shape_;
  AlignedVector<T> data_;
};

/// Integer label volume (L, W, H), H fastest.
struct LabelVolume {
  std::array<Index, 3> dims{0, 0, 0};
  std::vector<std::uint16_t> data;

  LabelVolume() = default;
  explicit LabelVolume(std::array<Index, 3> d, std::uint16_t fill = 0)
      : dims(d), data(static_cast<std::size_t>(d[0] * d[1] * d[2]), fill) {}

  Index numel() const { return dims[0] * dims[1] * dims[2]; }
  Index offset(Index l, Index w, Index h) const { return (l * dims[1] + w) * dims[2] + h; }
  std::uint16_t at(Index l, Index w, Index h) const { return data[offset(l, w, h)]; }
  std::uint16_t& at(Index l, Index w, Index h) { return data[offset(l, w, h)]; }

  bool operator==(const LabelVolume&) const = default;
};

}  // namespace remreg
