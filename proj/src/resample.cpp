// SPDX-License-Identifier: Apache-2.0
#include "remreg/resample.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace remreg {

ShiftVec::ShiftVec(int u_, int v_, int w_) : u(u_), v(v_), w(w_) {
  for (int c : {u, v, w}) {
    if (c != 0 && c != 1) throw DimensionError("shift vector components must be 0 or 1");
  }
}

std::array<ShiftVec, 8> all_shifts() {
  std::array<ShiftVec, 8> out;
  for (int i = 0; i < 8; ++i) out[static_cast<std::size_t>(i)] = ShiftVec((i >> 2) & 1, (i >> 1) & 1, i & 1);
  return out;
}

std::array<Index, 3> resized_dims(const Shape& s, double scale) {
  if (!(scale > 0)) throw DimensionError("resize scale must be positive");
  std::array<Index, 3> out{};
  const auto in = s.spatial_dims();
  for (std::size_t a = 0; a < 3; ++a) {
    out[a] = static_cast<Index>(std::floor(static_cast<double>(in[a]) * scale + 1e-9));
    if (out[a] < 1) throw DimensionError("resize by " + std::to_string(scale) + " of " + s.str() + " is empty");
  }
  return out;
}

namespace {

struct LerpTap {
  Index i0, i1;
  double frac;
};

// Sample positions of a 1-D half-voxel centred resize with step 1/ratio.
std::vector<LerpTap> resize_taps(Index in, Index out, double ratio) {
  std::vector<LerpTap> taps(static_cast<std::size_t>(out));
  for (Index t = 0; t < out; ++t) {
    double s = (static_cast<double>(t) + 0.5) / ratio - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(in - 1));
    const Index i0 = static_cast<Index>(std::floor(s));
    taps[static_cast<std::size_t>(t)] = {i0, std::min(i0 + 1, in - 1), s - static_cast<double>(i0)};
  }
  return taps;
}

// One 1-D lerp pass along spatial axis `axis` (2, 3 or 4). The a + f (b - a)
// form reproduces constants exactly.
template <typename T>
Var<T> resize_axis(const Var<T>& x, int axis, Index out_len, double ratio) {
  const Shape& s = x.shape();
  const Index in_len = s.dims[static_cast<std::size_t>(axis)];
  if (out_len == in_len && ratio == 1.0) return x;
  Index outer = 1, inner = 1;
  for (int a = 0; a < axis; ++a) outer *= s.dims[static_cast<std::size_t>(a)];
  for (int a = axis + 1; a < 5; ++a) inner *= s.dims[static_cast<std::size_t>(a)];
  Shape os = s;
  os.dims[static_cast<std::size_t>(axis)] = out_len;
  auto taps = resize_taps(in_len, out_len, ratio);

  Tensor<T> out(os);
  const T* src = x.value().ptr();
  T* dst = out.ptr();
  for (Index o = 0; o < outer; ++o) {
    for (Index t = 0; t < out_len; ++t) {
      const LerpTap& tp = taps[static_cast<std::size_t>(t)];
      const T f = static_cast<T>(tp.frac);
      const T* a = src + (o * in_len + tp.i0) * inner;
      const T* b = src + (o * in_len + tp.i1) * inner;
      T* d = dst + (o * out_len + t) * inner;
      for (Index i = 0; i < inner; ++i) d[i] = a[i] + f * (b[i] - a[i]);
    }
  }
  return make_result<T>(std::move(out), {x}, [taps = std::move(taps), outer, inner, in_len, out_len](Node<T>& self) {
    Tensor<T>& gin = self.inputs[0]->grad_buffer();
    const T* g = self.grad->ptr();
    T* gi = gin.ptr();
    for (Index o = 0; o < outer; ++o) {
      for (Index t = 0; t < out_len; ++t) {
        const LerpTap& tp = taps[static_cast<std::size_t>(t)];
        const T f = static_cast<T>(tp.frac);
        const T* gd = g + (o * out_len + t) * inner;
        T* a = gi + (o * in_len + tp.i0) * inner;
        T* b = gi + (o * in_len + tp.i1) * inner;
        for (Index i = 0; i < inner; ++i) {
          a[i] += (T(1) - f) * gd[i];
          b[i] += f * gd[i];
        }
      }
    }
  });
}

struct Corner {
  Index i0, i1;
  double f;
  bool clamped;
};

inline Corner locate(double p, Index n) {
  const double hi = static_cast<double>(n - 1);
  bool clamped = false;
  if (p < 0.0) {
    p = 0.0;
    clamped = true;
  } else if (p > hi) {
    p = hi;
    clamped = true;
  }
  const Index i0 = static_cast<Index>(std::floor(p));
  return {i0, std::min(i0 + 1, n - 1), p - static_cast<double>(i0), clamped};
}

}  // namespace

template <typename T>
Var<T> trilinear_resize(const Var<T>& vol, double scale) {
  const auto target = resized_dims(vol.shape(), scale);
  Var<T> y = vol;
  for (int axis = 2; axis < 5; ++axis) y = resize_axis(y, axis, target[static_cast<std::size_t>(axis - 2)], scale);
  return y;
}

template <typename T>
Var<T> trilinear_resize_to(const Var<T>& vol, const std::array<Index, 3>& target) {
  Var<T> y = vol;
  for (int axis = 2; axis < 5; ++axis) {
    const Index in = vol.shape().dims[static_cast<std::size_t>(axis)];
    const Index out = target[static_cast<std::size_t>(axis - 2)];
    if (out < 1) throw DimensionError("trilinear_resize_to: empty target extent");
    y = resize_axis(y, axis, out, static_cast<double>(out) / static_cast<double>(in));
  }
  return y;
}

template <typename T>
Var<T> warp_trilinear(const Var<T>& vol, const Dvf<T>& dvf) {
  const Shape& vs = vol.shape();
  const Shape& ds = dvf.shape();
  if (ds.channels() != 3) throw DimensionError("warp: displacement field needs 3 channels, got " + ds.str());
  if (vs.spatial_dims() != ds.spatial_dims()) {
    throw DimensionError("warp: volume " + vs.str() + " and field " + ds.str() + " differ in spatial extent");
  }
  if (ds.batch() != 1 && ds.batch() != vs.batch()) {
    throw DimensionError("warp: field batch must be 1 or match volume batch");
  }
  const Index L = vs.depth(), W = vs.rows(), H = vs.cols();
  const Index vox = vs.spatial();
  const Index B = vs.batch(), C = vs.channels();

  Tensor<T> out(vs);
  for (Index b = 0; b < B; ++b) {
    const Index db = ds.batch() == 1 ? 0 : b;
    const T* du = dvf.value().volume(db, 0);
    const T* dv = dvf.value().volume(db, 1);
    const T* dw = dvf.value().volume(db, 2);
    for (Index l = 0; l < L; ++l) {
      for (Index w = 0; w < W; ++w) {
        for (Index h = 0; h < H; ++h) {
          const Index x = (l * W + w) * H + h;
          const Corner cl = locate(static_cast<double>(l) + static_cast<double>(du[x]), L);
          const Corner cw = locate(static_cast<double>(w) + static_cast<double>(dv[x]), W);
          const Corner ch = locate(static_cast<double>(h) + static_cast<double>(dw[x]), H);
          const T fl = static_cast<T>(cl.f), fw = static_cast<T>(cw.f), fh = static_cast<T>(ch.f);
          const T gl = T(1) - fl, gw = T(1) - fw, gh = T(1) - fh;
          const Index o000 = (cl.i0 * W + cw.i0) * H + ch.i0;
          const Index o001 = (cl.i0 * W + cw.i0) * H + ch.i1;
          const Index o010 = (cl.i0 * W + cw.i1) * H + ch.i0;
          const Index o011 = (cl.i0 * W + cw.i1) * H + ch.i1;
          const Index o100 = (cl.i1 * W + cw.i0) * H + ch.i0;
          const Index o101 = (cl.i1 * W + cw.i0) * H + ch.i1;
          const Index o110 = (cl.i1 * W + cw.i1) * H + ch.i0;
          const Index o111 = (cl.i1 * W + cw.i1) * H + ch.i1;
          for (Index c = 0; c < C; ++c) {
            const T* v = vol.value().volume(b, c);
            out.volume(b, c)[x] = gl * gw * gh * v[o000] + gl * gw * fh * v[o001] + gl * fw * gh * v[o010] +
                                  gl * fw * fh * v[o011] + fl * gw * gh * v[o100] + fl * gw * fh * v[o101] +
                                  fl * fw * gh * v[o110] + fl * fw * fh * v[o111];
          }
        }
      }
    }
  }

  return make_result<T>(std::move(out), {vol, dvf}, [L, W, H, vox, B, C](Node<T>& self) {
    Node<T>& vn = *self.inputs[0];
    Node<T>& dn = *self.inputs[1];
    const Tensor<T>& g = *self.grad;
    if (vn.requires_grad) vn.grad_buffer();
    if (dn.requires_grad) dn.grad_buffer();
    const Index dbatch = dn.value.shape().batch();
    for (Index b = 0; b < B; ++b) {
      const Index db = dbatch == 1 ? 0 : b;
      const T* du = dn.value.volume(db, 0);
      const T* dv = dn.value.volume(db, 1);
      const T* dw = dn.value.volume(db, 2);
      for (Index x = 0; x < vox; ++x) {
        const Index l = x / (W * H), w = (x / H) % W, h = x % H;
        const Corner cl = locate(static_cast<double>(l) + static_cast<double>(du[x]), L);
        const Corner cw = locate(static_cast<double>(w) + static_cast<double>(dv[x]), W);
        const Corner ch = locate(static_cast<double>(h) + static_cast<double>(dw[x]), H);
        const T fl = static_cast<T>(cl.f), fw = static_cast<T>(cw.f), fh = static_cast<T>(ch.f);
        const T gl = T(1) - fl, gw = T(1) - fw, gh = T(1) - fh;
        const Index o[8] = {(cl.i0 * W + cw.i0) * H + ch.i0, (cl.i0 * W + cw.i0) * H + ch.i1,
                            (cl.i0 * W + cw.i1) * H + ch.i0, (cl.i0 * W + cw.i1) * H + ch.i1,
                            (cl.i1 * W + cw.i0) * H + ch.i0, (cl.i1 * W + cw.i0) * H + ch.i1,
                            (cl.i1 * W + cw.i1) * H + ch.i0, (cl.i1 * W + cw.i1) * H + ch.i1};
        const T wt[8] = {gl * gw * gh, gl * gw * fh, gl * fw * gh, gl * fw * fh,
                         fl * gw * gh, fl * gw * fh, fl * fw * gh, fl * fw * fh};
        T sdu = 0, sdv = 0, sdw = 0;
        for (Index c = 0; c < C; ++c) {
          const T gx = g.volume(b, c)[x];
          if (vn.requires_grad) {
            T* gv = vn.grad->volume(b, c);
            for (int k = 0; k < 8; ++k) gv[o[k]] += wt[k] * gx;
          }
          if (dn.requires_grad) {
            const T* v = vn.value.volume(b, c);
            // Partial derivatives of the trilinear blend along each axis.
            const T dl = gw * gh * (v[o[4]] - v[o[0]]) + gw * fh * (v[o[5]] - v[o[1]]) +
                         fw * gh * (v[o[6]] - v[o[2]]) + fw * fh * (v[o[7]] - v[o[3]]);
            const T dwv = gl * gh * (v[o[2]] - v[o[0]]) + gl * fh * (v[o[3]] - v[o[1]]) +
                          fl * gh * (v[o[6]] - v[o[4]]) + fl * fh * (v[o[7]] - v[o[5]]);
            const T dh = gl * gw * (v[o[1]] - v[o[0]]) + gl * fw * (v[o[3]] - v[o[2]]) +
                         fl * gw * (v[o[5]] - v[o[4]]) + fl * fw * (v[o[7]] - v[o[6]]);
            sdu += gx * dl;
            sdv += gx * dwv;
            sdw += gx * dh;
          }
        }
        if (dn.requires_grad) {
          if (!cl.clamped) dn.grad->volume(db, 0)[x] += sdu;
          if (!cw.clamped) dn.grad->volume(db, 1)[x] += sdv;
          if (!ch.clamped) dn.grad->volume(db, 2)[x] += sdw;
        }
      }
    }
  });
}

template <typename T>
LabelVolume warp_nearest(const LabelVolume& labels, const Tensor<T>& dvf) {
  const Shape& ds = dvf.shape();
  if (ds.channels() != 3 || ds.batch() != 1) throw DimensionError("warp_nearest: field must be (1,3,...), got " + ds.str());
  if (ds.spatial_dims() != labels.dims) throw DimensionError("warp_nearest: label and field extents differ");
  const Index L = labels.dims[0], W = labels.dims[1], H = labels.dims[2];
  const T* du = dvf.volume(0, 0);
  const T* dv = dvf.volume(0, 1);
  const T* dw = dvf.volume(0, 2);
  auto pick = [](double p, Index n) {
    const Index i = static_cast<Index>(std::floor(p + 0.5));
    return std::clamp<Index>(i, 0, n - 1);
  };
  LabelVolume out(labels.dims);
  for (Index l = 0; l < L; ++l) {
    for (Index w = 0; w < W; ++w) {
      for (Index h = 0; h < H; ++h) {
        const Index x = labels.offset(l, w, h);
        const Index sl = pick(static_cast<double>(l) + static_cast<double>(du[x]), L);
        const Index sw = pick(static_cast<double>(w) + static_cast<double>(dv[x]), W);
        const Index sh = pick(static_cast<double>(h) + static_cast<double>(dw[x]), H);
        out.data[static_cast<std::size_t>(x)] = labels.at(sl, sw, sh);
      }
    }
  }
  return out;
}

std::array<Index, 3> shift_overlap(const Shape& s, const ShiftVec& m) {
  return {s.depth() - m.u, s.rows() - m.v, s.cols() - m.w};
}

template <typename T>
Tensor<T> shift_volume(const Tensor<T>& z, const ShiftVec& m) {
  const Shape& s = z.shape();
  const auto ov = shift_overlap(s, m);
  Tensor<T> out(Shape(s.batch(), s.channels(), ov[0], ov[1], ov[2]));
  for (Index b = 0; b < s.batch(); ++b)
    for (Index c = 0; c < s.channels(); ++c)
      for (Index l = 0; l < ov[0]; ++l)
        for (Index w = 0; w < ov[1]; ++w)
          for (Index h = 0; h < ov[2]; ++h) out.at(b, c, l, w, h) = z.at(b, c, l + m.u, w + m.v, h + m.w);
  return out;
}

template <typename T>
Var<T> shift_difference(const Var<T>& z, const ShiftVec& m) {
  const Shape& s = z.shape();
  const auto ov = shift_overlap(s, m);
  if (ov[0] < 1 || ov[1] < 1 || ov[2] < 1) throw DimensionError("shift_difference: volume too small for shift");
  const Shape os(s.batch(), s.channels(), ov[0], ov[1], ov[2]);
  Tensor<T> out(os);
  const Tensor<T>& zv = z.value();
  for (Index b = 0; b < s.batch(); ++b)
    for (Index c = 0; c < s.channels(); ++c)
      for (Index l = 0; l < ov[0]; ++l)
        for (Index w = 0; w < ov[1]; ++w)
          for (Index h = 0; h < ov[2]; ++h)
            out.at(b, c, l, w, h) = zv.at(b, c, l, w, h) - zv.at(b, c, l + m.u, w + m.v, h + m.w);
  return make_result<T>(std::move(out), {z}, [m, ov](Node<T>& self) {
    Tensor<T>& gz = self.inputs[0]->grad_buffer();
    const Tensor<T>& g = *self.grad;
    const Shape& gs = g.shape();
    for (Index b = 0; b < gs.batch(); ++b)
      for (Index c = 0; c < gs.channels(); ++c)
        for (Index l = 0; l < ov[0]; ++l)
          for (Index w = 0; w < ov[1]; ++w)
            for (Index h = 0; h < ov[2]; ++h) {
              const T gv = g.at(b, c, l, w, h);
              gz.at(b, c, l, w, h) += gv;
              gz.at(b, c, l + m.u, w + m.v, h + m.w) -= gv;
            }
  });
}

LabelVolume resize_labels(const LabelVolume& labels, const std::array<Index, 3>& target) {
  LabelVolume out(target);
  std::array<std::vector<Index>, 3> idx;
  for (std::size_t a = 0; a < 3; ++a) {
    const double ratio = static_cast<double>(target[a]) / static_cast<double>(labels.dims[a]);
    for (Index t = 0; t < target[a]; ++t) {
      const double s = (static_cast<double>(t) + 0.5) / ratio - 0.5;
      idx[a].push_back(std::clamp<Index>(static_cast<Index>(std::floor(s + 0.5)), 0, labels.dims[a] - 1));
    }
  }
  for (Index l = 0; l < target[0]; ++l)
    for (Index w = 0; w < target[1]; ++w)
      for (Index h = 0; h < target[2]; ++h)
        out.at(l, w, h) = labels.at(idx[0][static_cast<std::size_t>(l)], idx[1][static_cast<std::size_t>(w)],
                                    idx[2][static_cast<std::size_t>(h)]);
  return out;
}

#define REMREG_INSTANTIATE_RESAMPLE(T)                                               \
  template Var<T> trilinear_resize(const Var<T>&, double);                          \
  template Var<T> trilinear_resize_to(const Var<T>&, const std::array<Index, 3>&);  \
  template Var<T> warp_trilinear(const Var<T>&, const Dvf<T>&);                     \
  template LabelVolume warp_nearest(const LabelVolume&, const Tensor<T>&);          \
  template Var<T> shift_difference(const Var<T>&, const ShiftVec&);                 \
  template Tensor<T> shift_volume(const Tensor<T>&, const ShiftVec&);

REMREG_INSTANTIATE_RESAMPLE(float)
REMREG_INSTANTIATE_RESAMPLE(double)

}  // namespace remreg
