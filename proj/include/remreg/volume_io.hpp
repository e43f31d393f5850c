// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "remreg/tensor.hpp"

namespace remreg {

// RVOL layout (little endian):
//   "RVOL1\0" | u8 dtype (0 = f32, 1 = u16 labels) | u8 reserved | u32 L, W, H | payload, H fastest
enum class VolumeDtype : std::uint8_t { float32 = 0, uint16_labels = 1 };

using VolumeData = std::variant<Tensor<float>, LabelVolume>;

std::vector<std::uint8_t> encode_volume(const Tensor<float>& vol);
std::vector<std::uint8_t> encode_volume(const LabelVolume& labels);
VolumeData decode_volume(const std::vector<std::uint8_t>& bytes);

void write_volume(const std::filesystem::path& path, const Tensor<float>& vol);
void write_volume(const std::filesystem::path& path, const LabelVolume& labels);
VolumeData read_volume(const std::filesystem::path& path);

/// read_volume that insists on a float32 payload, returned as (1, 1, L, W, H).
Tensor<float> read_intensity(const std::filesystem::path& path);
/// read_volume that insists on a label payload.
LabelVolume read_labels(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

// Little-endian primitives shared with the checkpoint codec.
namespace le {
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_f32(std::vector<std::uint8_t>& out, float v);
std::uint32_t get_u32(const std::uint8_t* p);
float get_f32(const std::uint8_t* p);
}  // namespace le

}  // namespace remreg
