// SPDX-License-Identifier: Apache-2.0
#include "remreg/losses.hpp"

#include <cmath>
#include <vector>

#include "remreg/ops.hpp"

namespace remreg {

void LossWeights::validate() const {
  if (!(aux >= 0) || !(reg >= 0)) throw ConfigError("loss weights must be non-negative");
}

void LnccCfg::validate() const {
  if (window < 3 || window % 2 == 0) throw ConfigError("LNCC window must be odd and >= 3");
  if (!(eps > 0)) throw ConfigError("LNCC eps must be positive");
}

namespace {

// Zero-padded box sum of side `win` over each (L, W, H) volume, separable.
// The operator is symmetric, so it is also its own adjoint.
void box_sum(std::vector<double>& v, Index vols, Index L, Index W, Index H, int win) {
  const Index r = win / 2;
  std::vector<double> line;
  const Index dims[3] = {L, W, H};
  const Index strides[3] = {W * H, H, 1};
  for (int axis = 0; axis < 3; ++axis) {
    const Index n = dims[axis];
    const Index st = strides[axis];
    line.resize(static_cast<std::size_t>(n));
    for (Index vol = 0; vol < vols; ++vol) {
      double* base = v.data() + vol * L * W * H;
      for (Index start = 0; start < L * W * H; ++start) {
        // Visit each line once: positions whose coordinate along `axis` is 0.
        if ((start / st) % n != 0) continue;
        for (Index i = 0; i < n; ++i) line[static_cast<std::size_t>(i)] = base[start + i * st];
        for (Index i = 0; i < n; ++i) {
          double acc = 0.0;
          const Index lo = std::max<Index>(0, i - r), hi = std::min<Index>(n - 1, i + r);
          for (Index j = lo; j <= hi; ++j) acc += line[static_cast<std::size_t>(j)];
          base[start + i * st] = acc;
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Var<T> lncc(const Var<T>& a, const Var<T>& b, const LnccCfg& cfg) {
  cfg.validate();
  require_same_shape(a.shape(), b.shape(), "lncc");
  const Shape& s = a.shape();
  if (s.channels() != 1) throw DimensionError("lncc expects single-channel volumes, got " + s.str());
  const Index N = s.numel();
  const Index L = s.depth(), W = s.rows(), H = s.cols();
  const double wn = static_cast<double>(cfg.window) * cfg.window * cfg.window;

  std::vector<double> sa(N), sb(N), saa(N), sbb(N), sab(N);
  const T* av = a.value().ptr();
  const T* bv = b.value().ptr();
  for (Index i = 0; i < N; ++i) {
    const double x = av[i], y = bv[i];
    sa[i] = x;
    sb[i] = y;
    saa[i] = x * x;
    sbb[i] = y * y;
    sab[i] = x * y;
  }
  for (auto* v : {&sa, &sb, &saa, &sbb, &sab}) box_sum(*v, s.batch(), L, W, H, cfg.window);

  double total = 0.0;
  for (Index i = 0; i < N; ++i) {
    const double c = sab[i] - sa[i] * sb[i] / wn;
    const double va = saa[i] - sa[i] * sa[i] / wn;
    const double vb = sbb[i] - sb[i] * sb[i] / wn;
    total += c * c / (va * vb + cfg.eps);
  }
  const double value = total / static_cast<double>(N);

  return make_result<T>(
      Tensor<T>::scalar(static_cast<T>(value)), {a, b},
      [sa = std::move(sa), sb = std::move(sb), saa = std::move(saa), sbb = std::move(sbb), sab = std::move(sab), N,
       L, W, H, wn, cfg, batch = s.batch()](Node<T>& self) {
        const double k = static_cast<double>((*self.grad)[0]) / static_cast<double>(N);
        std::vector<double> g_a(N), g_b(N), g_aa(N), g_bb(N), g_ab(N);
        for (Index i = 0; i < N; ++i) {
          const double c = sab[i] - sa[i] * sb[i] / wn;
          const double va = saa[i] - sa[i] * sa[i] / wn;
          const double vb = sbb[i] - sb[i] * sb[i] / wn;
          const double d = va * vb + cfg.eps;
          const double dc = 2.0 * c / d;
          const double dva = -c * c * vb / (d * d);
          const double dvb = -c * c * va / (d * d);
          g_ab[i] = k * dc;
          g_aa[i] = k * dva;
          g_bb[i] = k * dvb;
          g_a[i] = k * (-dc * sb[i] / wn - 2.0 * dva * sa[i] / wn);
          g_b[i] = k * (-dc * sa[i] / wn - 2.0 * dvb * sb[i] / wn);
        }
        for (auto* v : {&g_a, &g_b, &g_aa, &g_bb, &g_ab}) box_sum(*v, batch, L, W, H, cfg.window);
        Node<T>& an = *self.inputs[0];
        Node<T>& bn = *self.inputs[1];
        if (an.requires_grad) {
          Tensor<T>& ga = an.grad_buffer();
          for (Index i = 0; i < N; ++i) {
            const double x = an.value[i], y = bn.value[i];
            ga[i] += static_cast<T>(g_a[i] + 2.0 * x * g_aa[i] + y * g_ab[i]);
          }
        }
        if (bn.requires_grad) {
          Tensor<T>& gb = bn.grad_buffer();
          for (Index i = 0; i < N; ++i) {
            const double x = an.value[i], y = bn.value[i];
            gb[i] += static_cast<T>(g_b[i] + 2.0 * y * g_bb[i] + x * g_ab[i]);
          }
        }
      });
}

template <typename T>
Var<T> huber(const Var<T>& a, const Var<T>& b, double delta) {
  require_same_shape(a.shape(), b.shape(), "huber");
  if (!(delta > 0)) throw ConfigError("huber: delta must be positive");
  const Index N = a.value().numel();
  double total = 0.0;
  for (Index i = 0; i < N; ++i) {
    const double d = static_cast<double>(a.value()[i]) - static_cast<double>(b.value()[i]);
    const double ad = std::abs(d);
    total += ad <= delta ? 0.5 * d * d : delta * (ad - 0.5 * delta);
  }
  return make_result<T>(Tensor<T>::scalar(static_cast<T>(total / static_cast<double>(N))), {a, b},
                        [delta, N](Node<T>& self) {
                          const double k = static_cast<double>((*self.grad)[0]) / static_cast<double>(N);
                          Node<T>& an = *self.inputs[0];
                          Node<T>& bn = *self.inputs[1];
                          if (an.requires_grad) an.grad_buffer();
                          if (bn.requires_grad) bn.grad_buffer();
                          for (Index i = 0; i < N; ++i) {
                            const double d = static_cast<double>(an.value[i]) - static_cast<double>(bn.value[i]);
                            const double g = k * std::clamp(d, -delta, delta);
                            if (an.requires_grad) (*an.grad)[i] += static_cast<T>(g);
                            if (bn.requires_grad) (*bn.grad)[i] -= static_cast<T>(g);
                          }
                        });
}

template <typename T>
Var<T> smoothness(const Dvf<T>& z) {
  if (z.shape().channels() != 3) throw DimensionError("smoothness expects a 3-channel field, got " + z.shape().str());
  Var<T> total;
  for (const ShiftVec& m : all_shifts()) {
    Var<T> d = shift_difference(z, m);
    Var<T> term = sum(mul(d, d));
    total = total.defined() ? add(total, term) : term;
  }
  return total;
}

template <typename T>
Var<T> main_loss(const Dvf<T>& dvf, const Var<T>& fixed_sr, const Var<T>& moving_sr, const LnccCfg& cfg) {
  return scale(lncc(warp_trilinear(moving_sr, dvf), fixed_sr, cfg), T(-1));
}

template <typename T>
Var<T> aux_loss(const RemModel<T>* rem, const Dvf<T>& dvf, const Var<T>& moving_up, const Var<T>& fixed_sr,
                double delta) {
  Var<T> warped = warp_trilinear(moving_up, dvf);
  Var<T> enhanced = rem ? rem_forward(*rem, warped) : warped;
  return huber(enhanced, fixed_sr, delta);
}

template <typename T>
Var<T> total_loss(const Var<T>& main, const Var<T>& aux, const Var<T>& reg, const LossWeights& w) {
  w.validate();
  Var<T> out = main;
  if (w.aux != 0.0) out = add(out, scale(aux, static_cast<T>(w.aux)));
  if (w.reg != 0.0) out = add(out, scale(reg, static_cast<T>(w.reg)));
  return out;
}

#define REMREG_INSTANTIATE_LOSSES(T)                                                                       \
  template Var<T> lncc(const Var<T>&, const Var<T>&, const LnccCfg&);                                     \
  template Var<T> huber(const Var<T>&, const Var<T>&, double);                                            \
  template Var<T> smoothness(const Dvf<T>&);                                                              \
  template Var<T> main_loss(const Dvf<T>&, const Var<T>&, const Var<T>&, const LnccCfg&);                 \
  template Var<T> aux_loss(const RemModel<T>*, const Dvf<T>&, const Var<T>&, const Var<T>&, double);      \
  template Var<T> total_loss(const Var<T>&, const Var<T>&, const Var<T>&, const LossWeights&);

REMREG_INSTANTIATE_LOSSES(float)
REMREG_INSTANTIATE_LOSSES(double)

}  // namespace remreg
