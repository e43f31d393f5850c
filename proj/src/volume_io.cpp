// SPDX-License-Identifier: Apache-2.0
#include "remreg/volume_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace remreg {
namespace {
constexpr char kMagic[6] = {'R', 'V', 'O', 'L', '1', '\0'};
constexpr std::size_t kHeaderSize = 6 + 1 + 1 + 12;

void put_header(std::vector<std::uint8_t>& out, VolumeDtype dtype, const std::array<Index, 3>& dims) {
  out.insert(out.end(), kMagic, kMagic + 6);
  out.push_back(static_cast<std::uint8_t>(dtype));
  out.push_back(0);
  for (Index d : dims) {
    if (d < 1 || d > 0xFFFFFFFFLL) throw IoError("volume extent out of range for RVOL");
    le::put_u32(out, static_cast<std::uint32_t>(d));
  }
}
}  // namespace

namespace le {
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_f32(std::vector<std::uint8_t>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }
std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
float get_f32(const std::uint8_t* p) { return std::bit_cast<float>(get_u32(p)); }
}  // namespace le

std::vector<std::uint8_t> encode_volume(const Tensor<float>& vol) {
  const Shape& s = vol.shape();
  if (s.batch() != 1 || s.channels() != 1) throw IoError("RVOL stores single volumes, got " + s.str());
  vol.require_finite("write_volume");
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + static_cast<std::size_t>(vol.numel()) * 4);
  put_header(out, VolumeDtype::float32, s.spatial_dims());
  for (float v : vol.data()) le::put_f32(out, v);
  return out;
}

std::vector<std::uint8_t> encode_volume(const LabelVolume& labels) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + labels.data.size() * 2);
  put_header(out, VolumeDtype::uint16_labels, labels.dims);
  for (std::uint16_t v : labels.data) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  return out;
}

VolumeData decode_volume(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kHeaderSize) throw IoError("truncated RVOL header");
  if (std::memcmp(bytes.data(), kMagic, 6) != 0) throw IoError("bad magic: not an RVOL file");
  const std::uint8_t dtype = bytes[6];
  std::array<Index, 3> dims{};
  for (int i = 0; i < 3; ++i) dims[static_cast<std::size_t>(i)] = le::get_u32(bytes.data() + 8 + 4 * i);
  const std::size_t count = static_cast<std::size_t>(dims[0] * dims[1] * dims[2]);
  const std::uint8_t* p = bytes.data() + kHeaderSize;
  if (dtype == static_cast<std::uint8_t>(VolumeDtype::float32)) {
    if (bytes.size() != kHeaderSize + count * 4) throw IoError("truncated or oversized RVOL float32 payload");
    std::vector<float> data(count);
    for (std::size_t i = 0; i < count; ++i) data[i] = le::get_f32(p + 4 * i);
    try {
      return Tensor<float>::from_data(Shape(1, 1, dims[0], dims[1], dims[2]), std::move(data));
    } catch (const NumericError&) {
      throw IoError("RVOL payload contains non-finite values");
    }
  }
  if (dtype == static_cast<std::uint8_t>(VolumeDtype::uint16_labels)) {
    if (bytes.size() != kHeaderSize + count * 2) throw IoError("truncated or oversized RVOL label payload");
    LabelVolume lv(dims);
    for (std::size_t i = 0; i < count; ++i) lv.data[i] = static_cast<std::uint16_t>(p[2 * i] | (p[2 * i + 1] << 8));
    return lv;
  }
  throw IoError("unknown RVOL dtype code " + std::to_string(dtype));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to '" + path.string() + "'");
}

void write_volume(const std::filesystem::path& path, const Tensor<float>& vol) { write_file(path, encode_volume(vol)); }
void write_volume(const std::filesystem::path& path, const LabelVolume& labels) {
  write_file(path, encode_volume(labels));
}
VolumeData read_volume(const std::filesystem::path& path) { return decode_volume(read_file(path)); }

Tensor<float> read_intensity(const std::filesystem::path& path) {
  auto v = read_volume(path);
  if (auto* t = std::get_if<Tensor<float>>(&v)) return std::move(*t);
  throw IoError("dtype mismatch: '" + path.string() + "' holds labels, expected float32");
}

LabelVolume read_labels(const std::filesystem::path& path) {
  auto v = read_volume(path);
  if (auto* l = std::get_if<LabelVolume>(&v)) return std::move(*l);
  throw IoError("dtype mismatch: '" + path.string() + "' holds float32, expected labels");
}

}  // namespace remreg
