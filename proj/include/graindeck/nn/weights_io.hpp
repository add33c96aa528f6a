#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "graindeck/nn/tensor.hpp"

namespace graindeck::nn {

// Weight file layout, version 1. All integers are little-endian uint32,
// values little-endian IEEE-754 binary32:
//
//   "GDWT"  magic (4 bytes)
//   version            (= 1)
//   tensor_count
//   tensor_count x {
//     name_length, name bytes (UTF-8, no terminator)
//     4 dims (N, C, H, W)
//     N*C*H*W float32 values, NCHW order
//   }
//
// Tensors are stored in the model's state order; loading matches by name
// and requires identical shapes.

inline constexpr std::uint32_t kWeightsVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor<float> tensor;
};

std::string encode_weights(const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> decode_weights(const std::string& bytes);

/// Serializes the referenced state (float only).
void save_weights(const std::filesystem::path& path, const std::vector<StateRef<float>>& state);

/// Fills the referenced state from a file. Throws DataError on a missing
/// name, extra tensors, shape mismatch or a malformed file.
void load_weights(const std::filesystem::path& path, const std::vector<StateRef<float>>& state);

}  // namespace graindeck::nn
