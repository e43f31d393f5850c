// SPDX-License-Identifier: Apache-2.0
#include "remreg/regnet.hpp"

#include "remreg/init.hpp"
#include "remreg/ops.hpp"

namespace remreg {
namespace {
constexpr double kLeakySlope = 0.2;
}

void RegConfig::validate() const {
  if (levels < 1) throw ConfigError("registration net: levels must be >= 1");
  if (base_channels < 1) throw ConfigError("registration net: base_channels must be >= 1");
}

template <typename T>
Param<T>& RegModel<T>::param(const std::string& name) {
  for (auto& p : params) {
    if (p.name == name) return p;
  }
  throw ConfigError("registration net has no parameter '" + name + "'");
}

// Parameter order: enc.0 .. enc.<levels>, dec.<levels-1> .. dec.0, flow.
template <typename T>
RegModel<T> build_reg(const RegConfig& cfg) {
  cfg.validate();
  RegModel<T> model;
  model.config = cfg;
  InitStream rng(cfg.seed);
  append_conv(model.params, "enc.0", 2, cfg.channels_at(0), rng, false);
  for (int i = 1; i <= cfg.levels; ++i) {
    append_conv(model.params, "enc." + std::to_string(i), cfg.channels_at(i - 1), cfg.channels_at(i), rng, false);
  }
  for (int i = cfg.levels - 1; i >= 0; --i) {
    const int in = cfg.channels_at(i + 1) + cfg.channels_at(i);
    append_conv(model.params, "dec." + std::to_string(i), in, cfg.channels_at(i), rng, false);
  }
  append_conv(model.params, "flow", cfg.channels_at(0), 3, rng, true);
  return model;
}

template <typename T>
Var<T> rearrange_pair(const Var<T>& y) {
  const Shape& s = y.shape();
  if (s.batch() != 2 || s.channels() != 1) throw DimensionError("rearrange_pair expects (2,1,...), got " + s.str());
  return swap_batch_channel(y);
}

template <typename T>
Var<T> unrearrange_pair(const Var<T>& y) {
  const Shape& s = y.shape();
  if (s.batch() != 1 || s.channels() != 2) throw DimensionError("unrearrange_pair expects (1,2,...), got " + s.str());
  return swap_batch_channel(y);
}

template <typename T>
Dvf<T> reg_forward(const RegModel<T>& model, const Var<T>& pair) {
  const Shape& s = pair.shape();
  if (s.channels() != 2) throw DimensionError("registration net expects 2 channels, got " + s.str());
  const Index factor = Index(1) << model.config.levels;
  for (Index d : s.spatial_dims()) {
    if (d % factor != 0) {
      throw DimensionError("registration net: extent " + std::to_string(d) + " not divisible by " +
                           std::to_string(factor));
    }
  }
  const auto& P = model.params;
  const T slope = static_cast<T>(kLeakySlope);
  auto conv = [&](const Var<T>& in, std::size_t idx, int stride) {
    return conv3d(in, P[2 * idx].var, P[2 * idx + 1].var, stride);
  };
  const int levels = model.config.levels;

  std::vector<Var<T>> enc;
  enc.push_back(leaky_relu(conv(pair, 0, 1), slope));
  for (int i = 1; i <= levels; ++i) enc.push_back(leaky_relu(conv(enc.back(), static_cast<std::size_t>(i), 2), slope));

  Var<T> d = enc.back();
  std::size_t idx = static_cast<std::size_t>(levels) + 1;
  for (int i = levels - 1; i >= 0; --i, ++idx) {
    const Var<T>& skip = enc[static_cast<std::size_t>(i)];
    Var<T> up = trilinear_resize_to(d, skip.shape().spatial_dims());
    d = leaky_relu(conv(concat_channels<T>({up, skip}), idx, 1), slope);
  }
  return conv(d, idx, 1);
}

template <typename T>
CascadeOutput<T> cascade_forward(const RemModel<T>* rem, const RegModel<T>& reg, const Var<T>& fixed_up,
                                 const Var<T>& moving_up) {
  const Shape& fs = fixed_up.shape();
  const Shape& ms = moving_up.shape();
  if (fs.batch() != 1 || fs.channels() != 1) throw DimensionError("cascade: fixed image must be (1,1,...)");
  require_same_shape(fs, ms, "cascade (fixed vs moving)");
  Var<T> x = concat_batch<T>({fixed_up, moving_up});
  Var<T> y = rem ? rem_forward(*rem, x) : x;
  Dvf<T> dvf = reg_forward(reg, rearrange_pair(y));
  return {slice_batch(y, 0, 1), slice_batch(y, 1, 1), dvf};
}

#define REMREG_INSTANTIATE_REG(T)                                                                     \
  template struct RegModel<T>;                                                                       \
  template RegModel<T> build_reg(const RegConfig&);                                                  \
  template Var<T> rearrange_pair(const Var<T>&);                                                     \
  template Var<T> unrearrange_pair(const Var<T>&);                                                   \
  template Dvf<T> reg_forward(const RegModel<T>&, const Var<T>&);                                    \
  template CascadeOutput<T> cascade_forward(const RemModel<T>*, const RegModel<T>&, const Var<T>&,   \
                                            const Var<T>&);

REMREG_INSTANTIATE_REG(float)
REMREG_INSTANTIATE_REG(double)

}  // namespace remreg
