#pragma once

#include <string>
#include <vector>

#include "arclite/config.hpp"
#include "arclite/tensor.hpp"

namespace arclite {

// Container format, little-endian throughout:
//   magic "ALTW" | version u32 | tensor_count u32
//   per tensor: name_len u16 | name | dtype u8 | rank u8 |
//               extents u32 x rank (innermost first) |
//               data_offset u64 | data_len u64
//   data section, each tensor 64-byte aligned, offsets from file start
// A reserved rank-1 F32 tensor "__config" of 16 floats carries the model
// dimensions and must come first.

inline constexpr uint32_t kWeightMagic = 0x57544C41;  // "ALTW"
inline constexpr uint32_t kWeightVersion = 1;
inline constexpr const char* kConfigTensorName = "__config";
inline constexpr size_t kWeightDataAlign = 64;

// A tensor staged in host memory, either headed to a file or read from one.
struct RawTensor {
  std::string name;
  DType dtype = DType::F32;
  Shape shape;
  std::vector<std::byte> data;

  const float* f32() const {
    return reinterpret_cast<const float*>(data.data());
  }
};

struct WeightFileData {
  uint32_t version = kWeightVersion;
  ModelConfig config;
  std::vector<RawTensor> tensors;  // without __config

  const RawTensor& tensor(const std::string& name) const;
  const RawTensor* find(const std::string& name) const;
};

RawTensor encode_config(const ModelConfig& cfg);
ModelConfig decode_config(const RawTensor& t);

// Writes config plus tensors. Tensor data lengths must match their shapes.
void write_weight_file(const std::string& path, const ModelConfig& cfg,
                       const std::vector<RawTensor>& tensors);

// Full validation pass: magic, version, unique names, in-bounds offsets,
// lengths matching byte_size, config first. Each failure mode carries its
// own error code.
WeightFileData read_weight_file(const std::string& path);

}  // namespace arclite
