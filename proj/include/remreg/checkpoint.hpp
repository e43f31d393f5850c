// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "remreg/optim.hpp"
#include "remreg/regnet.hpp"
#include "remreg/rem.hpp"

namespace remreg {

// Checkpoint layout (little endian):
//   "RCKPT1\0" | u32 header length | UTF-8 JSON header | f32 tensor payloads
// The header carries the format version, model configs, iteration, the
// tensor directory (name, shape, byte offset into the payload) and a free
// "extra" object for trainer state.
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  int format_version = kCheckpointVersion;
  long iteration = 0;
  std::optional<RemConfig> rem;
  std::optional<RegConfig> reg;
  std::optional<nlohmann::json> optimizer;  // beta1, beta2, eps, step
  nlohmann::json extra = nlohmann::json::object();
  std::vector<std::pair<std::string, Tensor<float>>> tensors;

  const Tensor<float>& tensor(const std::string& name) const;
  bool has_tensor(const std::string& name) const;
  void add_tensor(std::string name, Tensor<float> t);
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Stores every param as `<prefix><name>`.
void export_params(Checkpoint& ckpt, const std::vector<Param<float>>& params, const std::string& prefix);
/// Copies `<prefix><name>` into each param; missing tensors and shape
/// mismatches raise.
void import_params(const Checkpoint& ckpt, std::vector<Param<float>>& params, const std::string& prefix);

void export_adam(Checkpoint& ckpt, const AdamState<float>& state, const std::string& prefix);
AdamState<float> import_adam(const Checkpoint& ckpt, const std::string& prefix);

/// Builds a REM from the checkpoint's config and `rem/` tensors.
RemModel<float> rem_from_checkpoint(const Checkpoint& ckpt);
/// Builds a registration net from the checkpoint's config and `reg/` tensors.
RegModel<float> reg_from_checkpoint(const Checkpoint& ckpt);

Checkpoint checkpoint_of(const RemModel<float>& rem);
Checkpoint checkpoint_of(const RegModel<float>& reg);

nlohmann::json to_json(const RemConfig& c);
nlohmann::json to_json(const RegConfig& c);
RemConfig rem_config_from_json(const nlohmann::json& j);
RegConfig reg_config_from_json(const nlohmann::json& j);

}  // namespace remreg
