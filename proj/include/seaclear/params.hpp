#pragma once

#include <string>
#include <vector>

#include "seaclear/ops.hpp"

namespace seaclear {

/// Named view of one learnable array inside a model struct.
struct TensorRef {
  std::string name;
  std::vector<int> dims;
  std::vector<double>* values = nullptr;
};

using TensorList = std::vector<TensorRef>;

/// Appends `<prefix>.weight` [out,in,kh,kw] and `<prefix>.bias` [out].
void collect(const std::string& prefix, ConvParams& layer, TensorList& out);

std::size_t total_size(const TensorList& tensors);

/// Concatenates every tensor's values in list order.
std::vector<double> flatten(const TensorList& tensors);

/// Inverse of flatten; `flat` must hold exactly total_size(tensors) values.
void unflatten(const TensorList& tensors, const std::vector<double>& flat);

}  // namespace seaclear
