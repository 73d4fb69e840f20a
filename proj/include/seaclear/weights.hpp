#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "seaclear/params.hpp"

namespace seaclear {

/// Binary weights container:
///
///   "DSOW"  u32 version  u32 tensor count
///   per tensor: u16 name length, name bytes, u8 rank, u32 dims[rank],
///               float64 values[prod(dims)]
///
/// All integers and floats are little-endian.
inline constexpr std::uint32_t kWeightsVersion = 1;

struct StoredTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<double> values;

  friend bool operator==(const StoredTensor&, const StoredTensor&) = default;
};

std::string encode_weights(const TensorList& tensors);
std::vector<StoredTensor> decode_weights(const std::string& bytes, const std::string& origin = "<memory>");

void save_weights(const std::string& path, const TensorList& tensors);
std::vector<StoredTensor> read_weights(const std::string& path);

/// Copies stored values into `tensors`, which must match the file in
/// count, order, names and dims (DimensionError otherwise).
void load_weights(const std::string& path, const TensorList& tensors);

}  // namespace seaclear
