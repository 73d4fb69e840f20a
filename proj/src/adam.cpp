#include "seaclear/adam.hpp"

#include <cmath>

#include "seaclear/error.hpp"

namespace seaclear {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double learning_rate) {
  if (params.size() != grads.size()) {
    throw DimensionError("adam_step: " + std::to_string(params.size()) + " parameters but " +
                         std::to_string(grads.size()) + " gradients");
  }
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw DimensionError("adam_step: moment arrays sized for " +
                         std::to_string(state.first_moment.size()) + " parameters, got " +
                         std::to_string(params.size()));
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * grads[i];
    v = state.beta2 * v + (1.0 - state.beta2) * grads[i] * grads[i];
    params[i] -= learning_rate * (m / c1) / (std::sqrt(v / c2) + state.epsilon);
  }
}

void AdamGroup::step(const TensorList& params, const TensorList& grads, double learning_rate) {
  if (params.size() != grads.size()) {
    throw DimensionError("AdamGroup::step: " + std::to_string(params.size()) + " tensors but " +
                         std::to_string(grads.size()) + " gradients");
  }
  if (states_.empty()) {
    states_.reserve(params.size());
    for (const auto& p : params) states_.emplace_back(p.values->size());
  } else if (states_.size() != params.size()) {
    throw DimensionError("AdamGroup::step: tensor count changed between steps");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    adam_step(*params[k].values, *grads[k].values, states_[k], learning_rate);
  }
}

}  // namespace seaclear
