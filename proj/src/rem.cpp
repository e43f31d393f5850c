// SPDX-License-Identifier: Apache-2.0
#include "remreg/rem.hpp"

#include "remreg/init.hpp"
#include "remreg/ops.hpp"

namespace remreg {

std::string to_string(RemVariant v) {
  switch (v) {
    case RemVariant::I: return "I";
    case RemVariant::II: return "II";
    case RemVariant::III: return "III";
  }
  return "?";
}

RemVariant parse_variant(const std::string& s) {
  if (s == "I" || s == "1") return RemVariant::I;
  if (s == "II" || s == "2") return RemVariant::II;
  if (s == "III" || s == "3") return RemVariant::III;
  throw ConfigError("unknown REM variant '" + s + "' (expected I, II or III)");
}

void RemConfig::validate() const {
  if (k < 1 || k > 64) throw ConfigError("REM: k must lie in [1, 64], got " + std::to_string(k));
  if (n < 1 || n > 16) throw ConfigError("REM: n must lie in [1, 16], got " + std::to_string(n));
}

std::int64_t rem_param_count(const RemConfig& cfg) {
  cfg.validate();
  const std::int64_t k = cfg.k, n = cfg.n;
  return (27 * k + k) + n * (27 * k * k + k) + (27 * k + 1);
}

template <typename T>
Param<T>& RemModel<T>::param(const std::string& name) {
  for (auto& p : params) {
    if (p.name == name) return p;
  }
  throw ConfigError("REM has no parameter '" + name + "'");
}

template <typename T>
const Param<T>& RemModel<T>::param(const std::string& name) const {
  return const_cast<RemModel*>(this)->param(name);
}

template <typename T>
void RemModel<T>::set_frozen(bool frozen) {
  for (auto& p : params) p.set_frozen(frozen);
}

template <typename T>
RemModel<T> build_rem(const RemConfig& cfg, std::uint64_t seed, RemInit init) {
  cfg.validate();
  RemModel<T> model;
  model.config = cfg;
  InitStream rng(seed);
  const bool zero = init == RemInit::zero;
  append_conv(model.params, "head", 1, cfg.k, rng, zero);
  for (int i = 0; i < cfg.n; ++i) append_conv(model.params, "block." + std::to_string(i), cfg.k, cfg.k, rng, zero);
  append_conv(model.params, "tail", cfg.k, 1, rng, zero);
  return model;
}

template <typename T>
Var<T> rem_forward(const RemModel<T>& model, const Var<T>& x) {
  if (x.shape().channels() != 1) {
    throw DimensionError("REM expects a single-channel input, got " + x.shape().str());
  }
  const auto& P = model.params;
  const int n = model.config.n;
  auto conv = [&](const Var<T>& in, std::size_t idx) { return conv3d(in, P[2 * idx].var, P[2 * idx + 1].var); };
  const std::size_t tail = static_cast<std::size_t>(n) + 1;

  Var<T> head = relu(conv(x, 0));
  Var<T> f = head;
  for (int i = 0; i < n; ++i) {
    Var<T> act = relu(conv(f, static_cast<std::size_t>(i) + 1));
    f = model.config.variant == RemVariant::III ? add(f, act) : act;
  }
  switch (model.config.variant) {
    case RemVariant::I:
    case RemVariant::III: return add(x, conv(f, tail));
    case RemVariant::II: return conv(add(head, f), tail);
  }
  return f;
}

template struct RemModel<float>;
template struct RemModel<double>;
template RemModel<float> build_rem(const RemConfig&, std::uint64_t, RemInit);
template RemModel<double> build_rem(const RemConfig&, std::uint64_t, RemInit);
template Var<float> rem_forward(const RemModel<float>&, const Var<float>&);
template Var<double> rem_forward(const RemModel<double>&, const Var<double>&);

}  // namespace remreg
