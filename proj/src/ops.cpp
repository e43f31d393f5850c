// SPDX-License-Identifier: Apache-2.0
#include "remreg/ops.hpp"

#include <Eigen/Core>

#include "remreg/parallel.hpp"

namespace remreg {
namespace {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRM = Eigen::Map<MatRM<T>>;
template <typename T>
using CMapRM = Eigen::Map<const MatRM<T>>;

struct ConvGeometry {
  Index cin, l, w, h;     // input
  Index lo, wo, ho;       // output
  int stride;
  Index out_spatial() const { return lo * wo * ho; }
  Index out_rows() const { return lo * wo; }
  Index taps() const { return cin * 27; }
};

// Output rows (ol, ow) are processed in chunks so the column buffer stays in
// cache; a chunk spans `rows` rows of `ho` voxels.
constexpr Index kChunkVoxels = 1024;

inline Index chunk_rows(const ConvGeometry& g) { return std::max<Index>(1, kChunkVoxels / g.ho); }

// col[(ci*27 + tap), j] = in[ci, o*stride + k - 1] (or 0 outside) for the
// output voxels j of rows [r0, r1).
template <typename T>
void im2col(const T* in, const ConvGeometry& g, Index r0, Index r1, T* col) {
  const Index n = (r1 - r0) * g.ho;
  for (Index ci = 0; ci < g.cin; ++ci) {
    const T* src = in + ci * g.l * g.w * g.h;
    for (int kl = 0; kl < 3; ++kl) {
      for (int kw = 0; kw < 3; ++kw) {
        for (int kh = 0; kh < 3; ++kh) {
          T* row = col + ((ci * 27) + kl * 9 + kw * 3 + kh) * n;
          for (Index r = r0; r < r1; ++r) {
            const Index il = (r / g.wo) * g.stride + kl - 1;
            const Index iw = (r % g.wo) * g.stride + kw - 1;
            T* dst = row + (r - r0) * g.ho;
            if (il < 0 || il >= g.l || iw < 0 || iw >= g.w) {
              std::fill(dst, dst + g.ho, T(0));
              continue;
            }
            const T* line = src + (il * g.w + iw) * g.h;
            if (g.stride == 1) {
              // ih = oh + kh - 1
              const Index lo_h = (kh == 0) ? 1 : 0;
              const Index hi_h = (kh == 2) ? g.ho - 1 : g.ho;
              if (kh == 0) dst[0] = T(0);
              if (kh == 2) dst[g.ho - 1] = T(0);
              for (Index oh = lo_h; oh < hi_h; ++oh) dst[oh] = line[oh + kh - 1];
            } else {
              for (Index oh = 0; oh < g.ho; ++oh) {
                const Index ih = oh * g.stride + kh - 1;
                dst[oh] = (ih >= 0 && ih < g.h) ? line[ih] : T(0);
              }
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add a column chunk back onto the input grid.
template <typename T>
void col2im(const T* col, const ConvGeometry& g, Index r0, Index r1, T* in) {
  const Index n = (r1 - r0) * g.ho;
  for (Index ci = 0; ci < g.cin; ++ci) {
    T* dst_vol = in + ci * g.l * g.w * g.h;
    for (int kl = 0; kl < 3; ++kl) {
      for (int kw = 0; kw < 3; ++kw) {
        for (int kh = 0; kh < 3; ++kh) {
          const T* row = col + ((ci * 27) + kl * 9 + kw * 3 + kh) * n;
          for (Index r = r0; r < r1; ++r) {
            const Index il = (r / g.wo) * g.stride + kl - 1;
            const Index iw = (r % g.wo) * g.stride + kw - 1;
            if (il < 0 || il >= g.l || iw < 0 || iw >= g.w) continue;
            const T* src = row + (r - r0) * g.ho;
            T* line = dst_vol + (il * g.w + iw) * g.h;
            for (Index oh = 0; oh < g.ho; ++oh) {
              const Index ih = oh * g.stride + kh - 1;
              if (ih >= 0 && ih < g.h) line[ih] += src[oh];
            }
          }
        }
      }
    }
  }
}

template <typename T>
using StridedRM = Eigen::Map<MatRM<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using CStridedRM = Eigen::Map<const MatRM<T>, 0, Eigen::OuterStride<>>;

}  // namespace

template <typename T>
Var<T> conv3d(const Var<T>& input, const Var<T>& weight, const Var<T>& bias, int stride) {
  const Shape& is = input.shape();
  const Shape& ws = weight.shape();
  if (stride != 1 && stride != 2) throw DimensionError("conv3d: stride must be 1 or 2");
  if (ws.dims[2] != 3 || ws.dims[3] != 3 || ws.dims[4] != 3) {
    throw DimensionError("conv3d: kernel must be 3x3x3, got " + ws.str());
  }
  if (ws.dims[1] != is.channels()) {
    throw DimensionError("conv3d: input has " + std::to_string(is.channels()) + " channels, kernel expects " +
                         std::to_string(ws.dims[1]));
  }
  const Index cout = ws.dims[0];
  if (bias.value().numel() != cout) {
    throw DimensionError("conv3d: bias has " + std::to_string(bias.value().numel()) + " values, expected " +
                         std::to_string(cout));
  }
  ConvGeometry g{is.channels(), is.depth(), is.rows(), is.cols(), 0, 0, 0, stride};
  g.lo = (g.l - 1) / stride + 1;
  g.wo = (g.w - 1) / stride + 1;
  g.ho = (g.h - 1) / stride + 1;
  if (g.l < 1 || g.w < 1 || g.h < 1) throw DimensionError("conv3d: empty spatial extent " + is.str());

  const Index batch = is.batch();
  const Index n = g.out_spatial();
  const Index k = g.taps();
  Tensor<T> out(Shape(batch, cout, g.lo, g.wo, g.ho));
  const CMapRM<T> wmat(weight.value().ptr(), cout, k);
  const T* bvals = bias.value().ptr();

  const Index step = chunk_rows(g);
  parallel_for(batch, [&](Index b) {
    AlignedVector<T> col(static_cast<std::size_t>(k * step * g.ho));
    const T* src = input.value().volume(b, 0);
    T* dst = out.volume(b, 0);
    for (Index r0 = 0; r0 < g.out_rows(); r0 += step) {
      const Index r1 = std::min(g.out_rows(), r0 + step);
      const Index nc = (r1 - r0) * g.ho;
      im2col(src, g, r0, r1, col.data());
      StridedRM<T> omat(dst + r0 * g.ho, cout, nc, Eigen::OuterStride<>(n));
      omat.noalias() = wmat * CMapRM<T>(col.data(), k, nc);
      for (Index co = 0; co < cout; ++co) omat.row(co).array() += bvals[co];
    }
  });

  return make_result<T>(std::move(out), {input, weight, bias}, [g, cout, batch, n, k](Node<T>& self) {
    const Tensor<T>& gout = *self.grad;
    Node<T>& in = *self.inputs[0];
    Node<T>& wt = *self.inputs[1];
    Node<T>& bs = *self.inputs[2];
    const CMapRM<T> wmat(wt.value.ptr(), cout, k);
    const Index step = chunk_rows(g);
    AlignedVector<T> col(static_cast<std::size_t>(k * step * g.ho));
    AlignedVector<T> gcol;
    if (wt.requires_grad) wt.grad_buffer();
    if (bs.requires_grad) bs.grad_buffer();
    if (in.requires_grad) {
      in.grad_buffer();
      gcol.resize(col.size());
    }
    // Batch entries and chunks are reduced in a fixed order so weight
    // gradients are deterministic.
    for (Index b = 0; b < batch; ++b) {
      if (bs.requires_grad) {
        const CMapRM<T> gmat(gout.volume(b, 0), cout, n);
        T* gb = bs.grad->ptr();
        for (Index co = 0; co < cout; ++co) gb[co] += gmat.row(co).sum();
      }
      for (Index r0 = 0; r0 < g.out_rows(); r0 += step) {
        const Index r1 = std::min(g.out_rows(), r0 + step);
        const Index nc = (r1 - r0) * g.ho;
        const CStridedRM<T> gmat(gout.volume(b, 0) + r0 * g.ho, cout, nc, Eigen::OuterStride<>(n));
        if (wt.requires_grad) {
          im2col(in.value.volume(b, 0), g, r0, r1, col.data());
          MapRM<T> gw(wt.grad->ptr(), cout, k);
          gw.noalias() += gmat * CMapRM<T>(col.data(), k, nc).transpose();
        }
        if (in.requires_grad) {
          MapRM<T> gc(gcol.data(), k, nc);
          gc.noalias() = wmat.transpose() * gmat;
          col2im(gcol.data(), g, r0, r1, in.grad->volume(b, 0));
        }
      }
    }
  });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope) {
  Tensor<T> out(x.shape());
  const T* src = x.value().ptr();
  T* dst = out.ptr();
  const Index n = out.numel();
  for (Index i = 0; i < n; ++i) dst[i] = src[i] > T(0) ? src[i] : slope * src[i];
  return make_result<T>(std::move(out), {x}, [slope](Node<T>& self) {
    Node<T>& in = *self.inputs[0];
    Tensor<T>& gin = in.grad_buffer();
    const T* g = self.grad->ptr();
    const T* v = in.value.ptr();
    const Index n = gin.numel();
    for (Index i = 0; i < n; ++i) gin[i] += v[i] > T(0) ? g[i] : slope * g[i];
  });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  return leaky_relu(x, T(0));
}

template <typename T>
Var<T> add(const Var<T>& x, const Var<T>& y) {
  require_same_shape(x.shape(), y.shape(), "add");
  Tensor<T> out(x.value());
  const T* b = y.value().ptr();
  T* d = out.ptr();
  const Index n = out.numel();
  for (Index i = 0; i < n; ++i) d[i] += b[i];
  return make_result<T>(std::move(out), {x, y}, [](Node<T>& self) {
    for (auto& in : self.inputs) {
      if (in->requires_grad) in->accumulate(*self.grad);
    }
  });
}

template <typename T>
Var<T> sub(const Var<T>& x, const Var<T>& y) {
  require_same_shape(x.shape(), y.shape(), "sub");
  Tensor<T> out(x.value());
  const T* b = y.value().ptr();
  T* d = out.ptr();
  const Index n = out.numel();
  for (Index i = 0; i < n; ++i) d[i] -= b[i];
  return make_result<T>(std::move(out), {x, y}, [](Node<T>& self) {
    const Tensor<T>& g = *self.grad;
    if (self.inputs[0]->requires_grad) self.inputs[0]->accumulate(g);
    if (self.inputs[1]->requires_grad) {
      Tensor<T>& gy = self.inputs[1]->grad_buffer();
      for (Index i = 0; i < g.numel(); ++i) gy[i] -= g[i];
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& x, const Var<T>& y) {
  require_same_shape(x.shape(), y.shape(), "mul");
  Tensor<T> out(x.value());
  const T* b = y.value().ptr();
  T* d = out.ptr();
  const Index n = out.numel();
  for (Index i = 0; i < n; ++i) d[i] *= b[i];
  return make_result<T>(std::move(out), {x, y}, [](Node<T>& self) {
    const Tensor<T>& g = *self.grad;
    Node<T>& a = *self.inputs[0];
    Node<T>& b = *self.inputs[1];
    if (a.requires_grad) {
      Tensor<T>& ga = a.grad_buffer();
      for (Index i = 0; i < g.numel(); ++i) ga[i] += g[i] * b.value[i];
    }
    if (b.requires_grad) {
      Tensor<T>& gb = b.grad_buffer();
      for (Index i = 0; i < g.numel(); ++i) gb[i] += g[i] * a.value[i];
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& x, T factor) {
  Tensor<T> out(x.value());
  for (T& v : out.data()) v *= factor;
  return make_result<T>(std::move(out), {x}, [factor](Node<T>& self) {
    Tensor<T>& gin = self.inputs[0]->grad_buffer();
    const Tensor<T>& g = *self.grad;
    for (Index i = 0; i < g.numel(); ++i) gin[i] += factor * g[i];
  });
}

template <typename T>
Var<T> sum(const Var<T>& x) {
  T acc = 0;
  for (T v : x.value().data()) acc += v;
  return make_result<T>(Tensor<T>::scalar(acc), {x}, [](Node<T>& self) {
    Tensor<T>& gin = self.inputs[0]->grad_buffer();
    const T g = (*self.grad)[0];
    for (T& v : gin.data()) v += g;
  });
}

template <typename T>
Var<T> mean(const Var<T>& x) {
  const Index n = x.value().numel();
  if (n == 0) throw DimensionError("mean of empty tensor");
  return scale(sum(x), T(1) / static_cast<T>(n));
}

template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw DimensionError("concat_channels: no inputs");
  Shape s = parts.front().shape();
  Index total = 0;
  for (const auto& p : parts) {
    const Shape& ps = p.shape();
    if (ps.batch() != s.batch() || ps.spatial_dims() != s.spatial_dims()) {
      throw DimensionError("concat_channels: incompatible shapes " + s.str() + " and " + ps.str());
    }
    total += ps.channels();
  }
  s.dims[1] = total;
  Tensor<T> out(s);
  const Index vox = s.spatial();
  std::vector<Index> offsets;
  Index c0 = 0;
  for (const auto& p : parts) {
    offsets.push_back(c0);
    const Index pc = p.shape().channels();
    for (Index b = 0; b < s.batch(); ++b) {
      std::copy_n(p.value().volume(b, 0), pc * vox, out.volume(b, c0));
    }
    c0 += pc;
  }
  return make_result<T>(std::move(out), parts, [offsets, vox](Node<T>& self) {
    const Tensor<T>& g = *self.grad;
    for (std::size_t i = 0; i < self.inputs.size(); ++i) {
      Node<T>& in = *self.inputs[i];
      if (!in.requires_grad) continue;
      Tensor<T>& gin = in.grad_buffer();
      const Index pc = in.value.shape().channels();
      for (Index b = 0; b < g.shape().batch(); ++b) {
        const T* src = g.volume(b, offsets[i]);
        T* dst = gin.volume(b, 0);
        for (Index j = 0; j < pc * vox; ++j) dst[j] += src[j];
      }
    }
  });
}

template <typename T>
Var<T> concat_batch(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw DimensionError("concat_batch: no inputs");
  Shape s = parts.front().shape();
  Index total = 0;
  for (const auto& p : parts) {
    Shape ps = p.shape();
    ps.dims[0] = s.dims[0];
    if (!(ps == s)) throw DimensionError("concat_batch: incompatible shapes " + s.str() + " and " + p.shape().str());
    total += p.shape().batch();
  }
  s.dims[0] = total;
  Tensor<T> out(s);
  T* dst = out.ptr();
  for (const auto& p : parts) dst = std::copy(p.value().data().begin(), p.value().data().end(), dst);
  return make_result<T>(std::move(out), parts, [](Node<T>& self) {
    const T* g = self.grad->ptr();
    for (auto& in : self.inputs) {
      const Index n = in->value.numel();
      if (in->requires_grad) {
        Tensor<T>& gin = in->grad_buffer();
        for (Index j = 0; j < n; ++j) gin[j] += g[j];
      }
      g += n;
    }
  });
}

template <typename T>
Var<T> slice_batch(const Var<T>& x, Index first, Index count) {
  const Shape& xs = x.shape();
  if (first < 0 || count < 1 || first + count > xs.batch()) {
    throw DimensionError("slice_batch: range [" + std::to_string(first) + ", " + std::to_string(first + count) +
                         ") outside batch of " + xs.str());
  }
  Shape s = xs;
  s.dims[0] = count;
  Tensor<T> out(s);
  const T* src = x.value().volume(first, 0);
  std::copy_n(src, out.numel(), out.ptr());
  return make_result<T>(std::move(out), {x}, [first](Node<T>& self) {
    Tensor<T>& gin = self.inputs[0]->grad_buffer();
    const Tensor<T>& g = *self.grad;
    T* dst = gin.volume(first, 0);
    for (Index j = 0; j < g.numel(); ++j) dst[j] += g[j];
  });
}

template <typename T>
Var<T> swap_batch_channel(const Var<T>& x) {
  const Shape& xs = x.shape();
  const Shape s(xs.channels(), xs.batch(), xs.depth(), xs.rows(), xs.cols());
  const Index vox = xs.spatial();
  Tensor<T> out(s);
  for (Index b = 0; b < xs.batch(); ++b) {
    for (Index c = 0; c < xs.channels(); ++c) std::copy_n(x.value().volume(b, c), vox, out.volume(c, b));
  }
  return make_result<T>(std::move(out), {x}, [vox](Node<T>& self) {
    Tensor<T>& gin = self.inputs[0]->grad_buffer();
    const Tensor<T>& g = *self.grad;
    const Shape& gs = g.shape();
    for (Index b = 0; b < gs.batch(); ++b) {
      for (Index c = 0; c < gs.channels(); ++c) {
        const T* src = g.volume(b, c);
        T* dst = gin.volume(c, b);
        for (Index j = 0; j < vox; ++j) dst[j] += src[j];
      }
    }
  });
}

#define REMREG_INSTANTIATE_OPS(T)                                                        \
  template Var<T> conv3d(const Var<T>&, const Var<T>&, const Var<T>&, int);             \
  template Var<T> relu(const Var<T>&);                                                   \
  template Var<T> leaky_relu(const Var<T>&, T);                                          \
  template Var<T> add(const Var<T>&, const Var<T>&);                                     \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                     \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                     \
  template Var<T> scale(const Var<T>&, T);                                               \
  template Var<T> sum(const Var<T>&);                                                    \
  template Var<T> mean(const Var<T>&);                                                   \
  template Var<T> concat_channels(const std::vector<Var<T>>&);                           \
  template Var<T> concat_batch(const std::vector<Var<T>>&);                              \
  template Var<T> slice_batch(const Var<T>&, Index, Index);                              \
  template Var<T> swap_batch_channel(const Var<T>&);

REMREG_INSTANTIATE_OPS(float)
REMREG_INSTANTIATE_OPS(double)

}  // namespace remreg
