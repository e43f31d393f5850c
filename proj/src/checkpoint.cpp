// SPDX-License-Identifier: Apache-2.0
#include "remreg/checkpoint.hpp"

#include <cstring>

#include "remreg/volume_io.hpp"

namespace remreg {
namespace {
constexpr char kMagic[7] = {'R', 'C', 'K', 'P', 'T', '1', '\0'};
using nlohmann::json;
}  // namespace

const Tensor<float>& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw IoError("checkpoint is missing tensor '" + name + "'");
}

bool Checkpoint::has_tensor(const std::string& name) const {
  for (const auto& entry : tensors) {
    if (entry.first == name) return true;
  }
  return false;
}

void Checkpoint::add_tensor(std::string name, Tensor<float> t) {
  if (has_tensor(name)) throw IoError("duplicate checkpoint tensor '" + name + "'");
  tensors.emplace_back(std::move(name), std::move(t));
}

json to_json(const RemConfig& c) { return {{"variant", to_string(c.variant)}, {"k", c.k}, {"n", c.n}}; }
json to_json(const RegConfig& c) {
  return {{"levels", c.levels}, {"base_channels", c.base_channels}, {"seed", c.seed}};
}

RemConfig rem_config_from_json(const json& j) {
  RemConfig c;
  c.variant = parse_variant(j.at("variant").get<std::string>());
  c.k = j.at("k").get<int>();
  c.n = j.at("n").get<int>();
  c.validate();
  return c;
}

RegConfig reg_config_from_json(const json& j) {
  RegConfig c;
  c.levels = j.at("levels").get<int>();
  c.base_channels = j.at("base_channels").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  json header;
  header["format_version"] = ckpt.format_version;
  header["iteration"] = ckpt.iteration;
  if (ckpt.rem) header["rem"] = to_json(*ckpt.rem);
  if (ckpt.reg) header["reg"] = to_json(*ckpt.reg);
  if (ckpt.optimizer) header["optimizer"] = *ckpt.optimizer;
  header["extra"] = ckpt.extra;
  json dir = json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : ckpt.tensors) {
    t.require_finite("save_checkpoint");
    const auto& d = t.shape().dims;
    dir.push_back({{"name", name}, {"shape", {d[0], d[1], d[2], d[3], d[4]}}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(t.numel()) * 4;
  }
  header["tensors"] = dir;
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(kMagic, kMagic + 7);
  le::put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.reserve(out.size() + offset);
  for (const auto& entry : ckpt.tensors) {
    for (float v : entry.second.data()) le::put_f32(out, v);
  }
  return out;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 11) throw IoError("truncated checkpoint");
  if (std::memcmp(bytes.data(), kMagic, 7) != 0) throw IoError("bad magic: not a checkpoint file");
  const std::uint32_t hlen = le::get_u32(bytes.data() + 7);
  if (bytes.size() < 11 + static_cast<std::size_t>(hlen)) throw IoError("truncated checkpoint header");
  json header;
  try {
    header = json::parse(bytes.begin() + 11, bytes.begin() + 11 + hlen);
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed checkpoint header: ") + e.what());
  }
  Checkpoint c;
  try {
    c.format_version = header.at("format_version").get<int>();
    if (c.format_version != kCheckpointVersion) {
      throw IoError("checkpoint version mismatch: file has " + std::to_string(c.format_version) + ", expected " +
                    std::to_string(kCheckpointVersion));
    }
    c.iteration = header.at("iteration").get<long>();
    if (header.contains("rem")) c.rem = rem_config_from_json(header["rem"]);
    if (header.contains("reg")) c.reg = reg_config_from_json(header["reg"]);
    if (header.contains("optimizer")) c.optimizer = header["optimizer"];
    if (header.contains("extra")) c.extra = header["extra"];
    const std::size_t base = 11 + hlen;
    std::uint64_t expected = 0;
    for (const auto& e : header.at("tensors")) {
      const auto dims = e.at("shape").get<std::vector<Index>>();
      if (dims.size() != 5) throw IoError("checkpoint tensor shape must have 5 extents");
      const Shape s(dims[0], dims[1], dims[2], dims[3], dims[4]);
      const auto off = e.at("offset").get<std::uint64_t>();
      if (off != expected) throw IoError("checkpoint tensor directory is not contiguous");
      const std::size_t n = static_cast<std::size_t>(s.numel());
      if (base + off + n * 4 > bytes.size()) throw IoError("truncated checkpoint payload");
      std::vector<float> data(n);
      for (std::size_t i = 0; i < n; ++i) data[i] = le::get_f32(bytes.data() + base + off + 4 * i);
      c.add_tensor(e.at("name").get<std::string>(), Tensor<float>::from_data(s, std::move(data)));
      expected = off + n * 4;
    }
    if (base + expected != bytes.size()) throw IoError("trailing bytes after checkpoint payload");
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed checkpoint header: ") + e.what());
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

void export_params(Checkpoint& ckpt, const std::vector<Param<float>>& params, const std::string& prefix) {
  for (const auto& p : params) ckpt.add_tensor(prefix + p.name, p.var.value());
}

void import_params(const Checkpoint& ckpt, std::vector<Param<float>>& params, const std::string& prefix) {
  for (auto& p : params) {
    const Tensor<float>& t = ckpt.tensor(prefix + p.name);
    if (!(t.shape() == p.var.shape())) {
      throw DimensionError("shape mismatch for '" + prefix + p.name + "': checkpoint " + t.shape().str() +
                           ", model " + p.var.shape().str());
    }
    p.var.mutable_value() = t;
  }
}

void export_adam(Checkpoint& ckpt, const AdamState<float>& state, const std::string& prefix) {
  ckpt.optimizer = json{{"beta1", state.beta1}, {"beta2", state.beta2}, {"eps", state.eps}, {"step", state.step}};
  for (const auto& [name, t] : state.m) ckpt.add_tensor(prefix + "m/" + name, t);
  for (const auto& [name, t] : state.v) ckpt.add_tensor(prefix + "v/" + name, t);
}

AdamState<float> import_adam(const Checkpoint& ckpt, const std::string& prefix) {
  if (!ckpt.optimizer) throw IoError("checkpoint has no optimizer state");
  AdamState<float> s;
  const json& o = *ckpt.optimizer;
  s.beta1 = o.at("beta1").get<double>();
  s.beta2 = o.at("beta2").get<double>();
  s.eps = o.at("eps").get<double>();
  s.step = o.at("step").get<long>();
  const std::string pm = prefix + "m/", pv = prefix + "v/";
  for (const auto& [name, t] : ckpt.tensors) {
    if (name.rfind(pm, 0) == 0) s.m.emplace(name.substr(pm.size()), t);
    if (name.rfind(pv, 0) == 0) s.v.emplace(name.substr(pv.size()), t);
  }
  return s;
}

RemModel<float> rem_from_checkpoint(const Checkpoint& ckpt) {
  if (!ckpt.rem) throw IoError("checkpoint carries no REM config");
  auto model = build_rem<float>(*ckpt.rem, 0, RemInit::zero);
  import_params(ckpt, model.params, "rem/");
  return model;
}

RegModel<float> reg_from_checkpoint(const Checkpoint& ckpt) {
  if (!ckpt.reg) throw IoError("checkpoint carries no registration-net config");
  auto model = build_reg<float>(*ckpt.reg);
  import_params(ckpt, model.params, "reg/");
  return model;
}

Checkpoint checkpoint_of(const RemModel<float>& rem) {
  Checkpoint c;
  c.rem = rem.config;
  export_params(c, rem.params, "rem/");
  return c;
}

Checkpoint checkpoint_of(const RegModel<float>& reg) {
  Checkpoint c;
  c.reg = reg.config;
  export_params(c, reg.params, "reg/");
  return c;
}

}  // namespace remreg
