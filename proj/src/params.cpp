#include "seaclear/params.hpp"

#include <algorithm>

#include "seaclear/error.hpp"

namespace seaclear {

void collect(const std::string& prefix, ConvParams& layer, TensorList& out) {
  out.push_back({prefix + ".weight",
                 {layer.out_channels, layer.in_channels, layer.kernel_h, layer.kernel_w},
                 &layer.weights});
  out.push_back({prefix + ".bias", {layer.out_channels}, &layer.bias});
}

std::size_t total_size(const TensorList& tensors) {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.values->size();
  return n;
}

std::vector<double> flatten(const TensorList& tensors) {
  std::vector<double> flat;
  flat.reserve(total_size(tensors));
  for (const auto& t : tensors) flat.insert(flat.end(), t.values->begin(), t.values->end());
  return flat;
}

void unflatten(const TensorList& tensors, const std::vector<double>& flat) {
  if (flat.size() != total_size(tensors)) {
    throw DimensionError("unflatten: " + std::to_string(flat.size()) + " values for " +
                         std::to_string(total_size(tensors)) + " parameters");
  }
  auto it = flat.begin();
  for (const auto& t : tensors) {
    std::copy(it, it + static_cast<std::ptrdiff_t>(t.values->size()), t.values->begin());
    it += static_cast<std::ptrdiff_t>(t.values->size());
  }
}

}  // namespace seaclear
