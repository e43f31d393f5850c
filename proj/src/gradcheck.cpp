// SPDX-License-Identifier: Apache-2.0
#include "remreg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "remreg/losses.hpp"
#include "remreg/ops.hpp"
#include "remreg/random.hpp"
#include "remreg/regnet.hpp"
#include "remreg/rem.hpp"
#include "remreg/resample.hpp"

namespace remreg {

void gradcheck_fn(const ScalarFn& fn, std::vector<Tensor<double>> inputs, const std::vector<bool>& check,
                  const GradCheckCfg& cfg, std::uint64_t stream, GradCheckResult& result) {
  if (check.size() != inputs.size()) throw ConfigError("gradcheck: check mask size differs from input count");
  std::vector<Var<double>> leaves;
  for (std::size_t i = 0; i < inputs.size(); ++i) leaves.push_back(Var<double>::leaf(inputs[i], check[i]));
  backward(fn(leaves));

  Rng rng(stream);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (!check[i]) continue;
    const Index n = inputs[i].numel();
    std::vector<Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Index{0});
    if (n > cfg.max_elements) {
      std::vector<Index> pick;
      std::sample(idx.begin(), idx.end(), std::back_inserter(pick), cfg.max_elements, rng);
      idx = std::move(pick);
    }
    const auto& grad = leaves[i].grad();
    for (Index e : idx) {
      std::vector<Var<double>> probe;
      auto eval = [&](double delta) {
        probe.clear();
        for (std::size_t j = 0; j < inputs.size(); ++j) {
          Tensor<double> t = inputs[j];
          if (j == i) t[e] += delta;
          probe.push_back(Var<double>::constant(std::move(t)));
        }
        return fn(probe).item();
      };
      const double numeric = (eval(cfg.h) - eval(-cfg.h)) / (2.0 * cfg.h);
      const double analytic = grad ? (*grad)[e] : 0.0;
      const double err = std::abs(analytic - numeric);
      const double tol = std::max(cfg.abs_floor, cfg.rel_tol * std::max(std::abs(analytic), std::abs(numeric)));
      result.worst = std::max(result.worst, err / tol);
      ++result.checked;
      if (err > tol) ++result.failures;
    }
  }
  ++result.instances;
}

namespace {

Tensor<double> uniform(Rng& rng, const Shape& s, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor<double> t(s);
  for (double& v : t.data()) v = d(rng);
  return t;
}

// Keeps values at least `gap` away from zero so kinks stay outside the stencil.
Tensor<double> away_from_zero(Rng& rng, const Shape& s, double gap) {
  Tensor<double> t = uniform(rng, s, -1.0, 1.0);
  for (double& v : t.data()) {
    if (std::abs(v) < gap) v = v < 0 ? v - gap : v + gap;
  }
  return t;
}

// Displacements whose fractional parts stay in [0.1, 0.9], away from the
// integer lattice where trilinear weights have kinks.
Tensor<double> lattice_safe_dvf(Rng& rng, const Shape& s) {
  std::uniform_int_distribution<int> whole(-1, 1);
  std::uniform_real_distribution<double> frac(0.1, 0.9);
  Tensor<double> t(s);
  for (double& v : t.data()) v = whole(rng) + frac(rng);
  return t;
}

Var<double> project(const Var<double>& y, const Tensor<double>& r) { return sum(mul(y, Var<double>::constant(r))); }

const Shape kVol(1, 1, 4, 4, 4);

void run_instance(const std::string& op, Rng& rng, const GradCheckCfg& cfg, std::uint64_t stream,
                  GradCheckResult& res, int instance) {
  if (op == "conv3d" || op == "conv3d_stride2") {
    const int stride = op == "conv3d" ? 1 : 2;
    const Shape out = stride == 1 ? Shape(1, 3, 4, 4, 4) : Shape(1, 3, 2, 2, 2);
    const Tensor<double> r = uniform(rng, out, -1, 1);
    ScalarFn fn = [&](const std::vector<Var<double>>& v) { return project(conv3d(v[0], v[1], v[2], stride), r); };
    gradcheck_fn(fn,
                 {uniform(rng, Shape(1, 2, 4, 4, 4), -1, 1), uniform(rng, Shape(3, 2, 3, 3, 3), -0.5, 0.5),
                  uniform(rng, Shape(1, 3, 1, 1, 1), -0.5, 0.5)},
                 {true, true, true}, cfg, stream, res);
  } else if (op == "relu" || op == "leaky_relu") {
    const Tensor<double> r = uniform(rng, kVol, -1, 1);
    const double slope = op == "relu" ? 0.0 : 0.2;
    ScalarFn fn = [&](const std::vector<Var<double>>& v) { return project(leaky_relu(v[0], slope), r); };
    gradcheck_fn(fn, {away_from_zero(rng, kVol, 0.01)}, {true}, cfg, stream, res);
  } else if (op == "add" || op == "mul") {
    const Tensor<double> r = uniform(rng, kVol, -1, 1);
    const bool is_add = op == "add";
    ScalarFn fn = [&](const std::vector<Var<double>>& v) {
      return project(is_add ? add(v[0], v[1]) : mul(v[0], v[1]), r);
    };
    gradcheck_fn(fn, {uniform(rng, kVol, -1, 1), uniform(rng, kVol, -1, 1)}, {true, true}, cfg, stream, res);
  } else if (op == "concat_channels") {
    const Tensor<double> r = uniform(rng, Shape(1, 3, 4, 4, 4), -1, 1);
    ScalarFn fn = [&](const std::vector<Var<double>>& v) { return project(concat_channels<double>({v[0], v[1]}), r); };
    gradcheck_fn(fn, {uniform(rng, kVol, -1, 1), uniform(rng, Shape(1, 2, 4, 4, 4), -1, 1)}, {true, true}, cfg,
                 stream, res);
  } else if (op == "trilinear_resize") {
    static constexpr double kScales[] = {2.0, 0.5, 1.5, 0.75};
    const double scale = kScales[instance % 4];
    const auto d = resized_dims(kVol, scale);
    const Tensor<double> r = uniform(rng, Shape(1, 1, d[0], d[1], d[2]), -1, 1);
    ScalarFn fn = [&](const std::vector<Var<double>>& v) { return project(trilinear_resize(v[0], scale), r); };
    gradcheck_fn(fn, {uniform(rng, kVol, 0, 1)}, {true}, cfg, stream, res);
  } else if (op == "warp_trilinear") {
    const Tensor<double> r = uniform(rng, kVol, -1, 1);
    ScalarFn fn = [&](const std::vector<Var<double>>& v) { return project(warp_trilinear(v[0], v[1]), r); };
    gradcheck_fn(fn, {uniform(rng, kVol, 0, 1), lattice_safe_dvf(rng, Shape(1, 3, 4, 4, 4))}, {true, true}, cfg,
                 stream, res);
  } else if (op == "lncc") {
    ScalarFn fn = [](const std::vector<Var<double>>& v) { return lncc(v[0], v[1], LnccCfg{3, 1e-5}); };
    gradcheck_fn(fn, {uniform(rng, kVol, 0, 1), uniform(rng, kVol, 0, 1)}, {true, true}, cfg, stream, res);
  } else if (op == "huber") {
    ScalarFn fn = [](const std::vector<Var<double>>& v) { return huber(v[0], v[1], 0.1); };
    gradcheck_fn(fn, {uniform(rng, kVol, 0, 1), uniform(rng, kVol, 0, 1)}, {true, true}, cfg, stream, res);
  } else if (op == "smoothness") {
    ScalarFn fn = [](const std::vector<Var<double>>& v) { return smoothness(v[0]); };
    gradcheck_fn(fn, {uniform(rng, Shape(1, 3, 4, 4, 4), -2, 2)}, {true}, cfg, stream, res);
  } else if (op == "rem_forward") {
    static constexpr RemVariant kVariants[] = {RemVariant::I, RemVariant::II, RemVariant::III};
    const RemConfig rc{kVariants[instance % 3], 2, 1};
    const RemModel<double> proto = build_rem<double>(rc, rng());
    const Tensor<double> r = uniform(rng, kVol, -1, 1);
    ScalarFn fn = [&](const std::vector<Var<double>>& v) {
      RemModel<double> m{rc, {}};
      for (std::size_t i = 0; i < proto.params.size(); ++i) m.params.push_back({proto.params[i].name, v[i + 1]});
      return project(rem_forward(m, v[0]), r);
    };
    std::vector<Tensor<double>> in{uniform(rng, kVol, 0, 1)};
    for (const auto& p : proto.params) {
      Tensor<double> t = p.var.value();
      // Nonzero biases so ReLU inputs do not sit at zero.
      if (p.name.find("bias") != std::string::npos) t = uniform(rng, t.shape(), 0.05, 0.2);
      in.push_back(std::move(t));
    }
    gradcheck_fn(fn, std::move(in), std::vector<bool>(proto.params.size() + 1, true), cfg, stream, res);
  } else if (op == "cascade") {
    // End-to-end total loss on an 8^3 pair w.r.t. every registration parameter,
    // REM frozen. Small weights with unit biases keep every rectifier on one
    // side of its kink (gating is covered by the relu and rem_forward checks),
    // and the flow head is offset so displacements stay near +0.5, clear of
    // the interpolation lattice.
    auto one_sided = [&](std::vector<Param<double>>& params, const std::string& linear) {
      for (auto& p : params) {
        Tensor<double>& t = p.var.mutable_value();
        if (p.name.rfind(linear, 0) == 0) continue;
        const bool bias = p.name.find("bias") != std::string::npos;
        t = bias ? Tensor<double>(t.shape(), 1.0) : uniform(rng, t.shape(), -0.02, 0.02);
      }
    };
    const RemConfig rc{RemVariant::I, 2, 1};
    RemModel<double> rem = build_rem<double>(rc, rng());
    one_sided(rem.params, "tail.");
    rem.set_frozen(true);
    const RegConfig gc{1, 2, rng()};
    RegModel<double> proto = build_reg<double>(gc);
    one_sided(proto.params, "flow.");
    const Shape vol(1, 1, 8, 8, 8);
    const Tensor<double> fixed = uniform(rng, vol, 0, 1);
    const Tensor<double> moving = uniform(rng, vol, 0, 1);
    const LossWeights w{10.0, 0.1};
    ScalarFn fn = [&](const std::vector<Var<double>>& v) {
      RegModel<double> reg{gc, {}};
      for (std::size_t i = 0; i < proto.params.size(); ++i) reg.params.push_back({proto.params[i].name, v[i]});
      const auto out = cascade_forward(&rem, reg, Var<double>::constant(fixed), Var<double>::constant(moving));
      const Var<double> main = main_loss(out.dvf, out.fixed_sr, out.moving_sr, LnccCfg{3, 1e-5});
      const Var<double> aux = aux_loss(&rem, out.dvf, Var<double>::constant(moving), out.fixed_sr, 0.1);
      return total_loss(main, aux, smoothness(out.dvf), w);
    };
    std::vector<Tensor<double>> in;
    for (const auto& p : proto.params) {
      Tensor<double> t = p.var.value();
      if (p.name == "flow.weight") t = uniform(rng, t.shape(), -0.01, 0.01);
      if (p.name == "flow.bias") t.fill(0.5);
      in.push_back(std::move(t));
    }
    gradcheck_fn(fn, std::move(in), std::vector<bool>(proto.params.size(), true), cfg, stream, res);
  } else {
    throw ConfigError("unknown gradcheck op '" + op + "'");
  }
}

}  // namespace

std::vector<std::string> gradcheck_ops() {
  return {"conv3d", "conv3d_stride2", "relu",   "leaky_relu", "add",        "mul",         "concat_channels",
          "trilinear_resize", "warp_trilinear", "lncc", "huber", "smoothness", "rem_forward", "cascade"};
}

GradCheckResult gradcheck_op(const std::string& op, const GradCheckCfg& cfg) {
  GradCheckResult res;
  res.op = op;
  for (int i = 0; i < cfg.instances; ++i) {
    Rng rng(derive_seed(cfg.seed, "gradcheck:" + op, static_cast<std::uint64_t>(i)));
    const std::uint64_t stream = rng();
    run_instance(op, rng, cfg, stream, res, i);
  }
  return res;
}

std::vector<GradCheckResult> gradcheck_all(const GradCheckCfg& cfg) {
  std::vector<GradCheckResult> out;
  for (const auto& op : gradcheck_ops()) out.push_back(gradcheck_op(op, cfg));
  return out;
}

}  // namespace remreg
